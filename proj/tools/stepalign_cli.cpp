// stepalign command line: synth, split, train, align, retrieve, evaluate, gradcheck.

#include "stepalign/checkpoint.hpp"
#include "stepalign/config.hpp"
#include "stepalign/dataset.hpp"
#include "stepalign/embedding_table.hpp"
#include "stepalign/gradcheck.hpp"
#include "stepalign/pipeline.hpp"
#include "stepalign/split.hpp"
#include "stepalign/synth.hpp"
#include "stepalign/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace stepalign;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

json config_json(const std::string& described) {
  json j = json::object();
  std::istringstream in(described);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return j;
}

/// Reproducibility record written next to a command's outputs once it finishes.
struct RunManifest {
  std::string path;
  json doc = json::object();

  RunManifest(const std::string& command, int argc, char** argv) {
    doc["command"] = command;
    doc["version"] = STEPALIGN_VERSION;
    doc["argv"] = std::vector<std::string>(argv, argv + argc);
    doc["started"] = utc_now();
    doc["outputs"] = json::array();
  }
  void output(const std::string& p) { doc["outputs"].push_back(p); }
  void write() {
    if (path.empty()) return;
    doc["finished"] = utc_now();
    write_file_atomically(path, doc.dump(2) + "\n");
  }
};

struct DataPaths {
  std::string manifest, diagrams, clips;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--manifest", manifest, "Dataset manifest (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--diagrams", diagrams, "Diagram embeddings (.emb)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--clips", clips, "Clip embeddings (.emb)")->required()->check(CLI::ExistingFile);
  }
};

struct LoadedData {
  Dataset ds;
  EmbeddingTable diagrams, clips;
};

LoadedData load_data(const DataPaths& p) {
  LoadedData d{load_manifest(p.manifest), read_embedding_table(p.diagrams), read_embedding_table(p.clips)};
  const ValidationReport report = validate_dataset(d.ds, d.diagrams, d.clips);
  if (!report.empty()) fail("dataset does not validate against its embeddings:\n" + report.to_string());
  return d;
}

/// Model options shared by commands that can run without a checkpoint (untrained heads).
struct ModelSource {
  std::string checkpoint;
  TrainConfig init;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--checkpoint", checkpoint, "Trained checkpoint; without it, freshly initialized heads are used")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", init.seed, "Seed for untrained heads")->capture_default_str();
    cmd->add_option("--out-dim", init.out_dim, "Output width of untrained heads")->capture_default_str();
    cmd->add_option("--hidden", init.hidden, "Hidden width of untrained heads (0: input width)")->capture_default_str();
    cmd->add_flag("!--no-sprf", init.use_sprf, "Untrained heads take inputs without the progress feature");
  }

  Checkpoint resolve(const LoadedData& d) const {
    if (!checkpoint.empty()) return load_checkpoint(checkpoint);
    Checkpoint c;
    c.use_sprf = init.use_sprf;
    const FeatureBuilder probe(d.ds, d.diagrams, d.clips, c.use_sprf);
    c.model = init_model(probe.video_input_dim(), probe.diagram_input_dim(), init);
    return c;
  }
};

struct AlignOptions {
  AlignConfig cfg;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--method", cfg.method, "raw, ot or dtw")->capture_default_str();
    cmd->add_option("--epsilon", cfg.epsilon, "Entropy weight of the transport problem")->capture_default_str();
    cmd->add_option("--alpha", cfg.alpha, "Exponent of the cost matrix")->capture_default_str();
    cmd->add_option("--tol", cfg.tol, "Sinkhorn marginal tolerance")->capture_default_str();
    cmd->add_option("--max-iter", cfg.max_iter, "Sinkhorn iteration cap")->capture_default_str();
    cmd->add_flag("--literal-cost", cfg.literal_cost, "Minimize sum T*C - eps*H(T) instead of maximizing similarity mass");
  }
};

SampleMode mode_for(Split s) { return s == Split::val ? SampleMode::val : SampleMode::test; }

std::vector<Granularity> parse_granularities(const std::string& text) {
  std::vector<Granularity> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(parse_granularity(item));
  if (out.empty()) fail("no granularity given");
  return out;
}

std::size_t count_unconverged(const std::vector<VideoAlignment>& alignments) {
  std::size_t n = 0;
  for (const auto& a : alignments) n += !a.converged;
  return n;
}

EmbeddingTable matrix_table(const MatrixXd& m, const std::vector<std::string>& row_ids) {
  EmbeddingTable t(static_cast<int>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r)
    t.add(row_ids[static_cast<std::size_t>(r)], VectorXf(m.row(r).transpose().cast<float>()));
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Align instructional-video clips with manual diagrams: training, alignment and evaluation."};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file with option defaults (section per command); flags override");
  int threads = 1;
  std::string run_manifest_path;
  app.add_option("--threads", threads, "Worker cap for parallel alignment")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--run-manifest", run_manifest_path, "Where to write the run manifest (default: next to the outputs)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with known ground truth");
  SynthConfig scfg;
  std::string synth_steps = "4..12", synth_segments = "1..3", synth_ratios = "0.6,0.2,0.2", synth_out;
  synth->add_option("--manuals", scfg.manuals, "Number of manuals")->capture_default_str();
  synth->add_option("--steps", synth_steps, "Steps per manual, N or A..B")->capture_default_str();
  synth->add_option("--segments", synth_segments, "Segments per step, N or A..B")->capture_default_str();
  synth->add_option("--videos-per-manual", scfg.videos_per_manual, "Videos per manual")->capture_default_str();
  synth->add_option("--dim", scfg.dim, "Raw embedding width")->capture_default_str();
  synth->add_option("--sigma", scfg.sigma, "Expected norm of the clip noise")->capture_default_str();
  synth->add_option("--drift", scfg.drift, "Cosine similarity of adjacent step prototypes")->capture_default_str();
  synth->add_option("--clips-per-segment", scfg.clips_per_segment, "0: one row per segment; k: k test windows")
      ->capture_default_str();
  synth->add_option("--ratios", synth_ratios, "Train,val,test ratios")->capture_default_str();
  synth->add_option("--seed", scfg.seed, "Random seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();

  // split
  auto* split = app.add_subcommand("split", "Assign videos to train/val/test, balancing segment counts and attributes");
  std::string split_manifest, split_out, split_ratios = "0.6,0.2,0.2";
  std::uint64_t split_seed = 1;
  split->add_option("--manifest", split_manifest, "Dataset manifest (JSON)")->required()->check(CLI::ExistingFile);
  split->add_option("--ratios", split_ratios, "Train,val,test ratios")->capture_default_str();
  split->add_option("--seed", split_seed, "Seed for ordering videos of equal length")->capture_default_str();
  split->add_option("--out", split_out, "Output manifest (default: rewrite the input)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the projection heads");
  DataPaths train_data;
  train_data.add_to(train_cmd);
  TrainConfig tcfg;
  std::string train_losses = format_loss_terms(tcfg.losses), train_selection = "step", train_out, train_log;
  train_cmd->add_option("--losses", train_losses, "Loss terms, e.g. B:step,C:step,A:page,clip,cos")->capture_default_str();
  std::string train_preset;
  train_cmd->add_option("--preset", train_preset, "Loss-combination row (CosSim, CLIP, A1..D2); sets --losses and the batch size")
      ->excludes(train_cmd->get_option("--losses"));
  auto* train_batch = train_cmd->add_option("--batch-size", tcfg.batch_size, "Clips per batch")->capture_default_str();
  train_cmd->add_option("--epochs", tcfg.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--lr", tcfg.optim.lr, "AdamW learning rate")->capture_default_str();
  train_cmd->add_option("--weight-decay", tcfg.optim.weight_decay, "AdamW weight decay")->capture_default_str();
  train_cmd->add_option("--seed", tcfg.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--hidden", tcfg.hidden, "Hidden width (0: input width)")->capture_default_str();
  train_cmd->add_option("--out-dim", tcfg.out_dim, "Shared embedding width")->capture_default_str();
  train_cmd->add_flag("!--no-sprf", tcfg.use_sprf, "Drop the sinusoidal progress feature");
  train_cmd->add_option("--selection", train_selection, "Granularity of the validation top-1 used for model selection")
      ->capture_default_str();
  train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--log", train_log, "Training log CSV (default: <out>.log.csv)");
  bool train_quiet = false;
  train_cmd->add_flag("--quiet", train_quiet, "No per-epoch progress");

  // align
  auto* align = app.add_subcommand("align", "Align every video of a split with its manual");
  DataPaths align_data;
  align_data.add_to(align);
  ModelSource align_model;
  align_model.add_to(align);
  AlignOptions align_opt;
  align_opt.add_to(align);
  std::string align_split_name = "test", align_gran = "step", align_out;
  bool dump_matrices = false;
  align->add_option("--split", align_split_name, "train, val or test")->capture_default_str();
  align->add_option("--granularity", align_gran, "step, page or step,page")->capture_default_str();
  align->add_option("--out", align_out, "Output directory")->required();
  align->add_flag("--dump-matrices", dump_matrices, "Also write S (and T for ot) per video as .emb tables");

  // retrieve
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Rank candidates for one segment (v2i) or diagram (i2v)");
  DataPaths ret_data;
  ret_data.add_to(retrieve_cmd);
  ModelSource ret_model;
  ret_model.add_to(retrieve_cmd);
  AlignOptions ret_opt;
  ret_opt.add_to(retrieve_cmd);
  std::string ret_query, ret_direction = "v2i", ret_split_name = "test", ret_gran = "step";
  std::size_t ret_k = 5;
  retrieve_cmd->add_option("--query", ret_query, "Segment id (v2i) or diagram id (i2v)")->required();
  retrieve_cmd->add_option("--direction", ret_direction, "v2i or i2v")->capture_default_str();
  retrieve_cmd->add_option("--k", ret_k, "Number of results")->capture_default_str();
  retrieve_cmd->add_option("--split", ret_split_name, "Split whose segments form the pools")->capture_default_str();
  retrieve_cmd->add_option("--granularity", ret_gran, "step or page")->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Top-1, AIE, R@1, R@3 and AUROC at step and page granularity");
  DataPaths eval_data;
  eval_data.add_to(evaluate);
  ModelSource eval_model;
  eval_model.add_to(evaluate);
  AlignOptions eval_opt;
  eval_opt.add_to(evaluate);
  std::string eval_split_name = "test", eval_gran = "step,page", eval_out;
  evaluate->add_option("--split", eval_split_name, "train, val or test")->capture_default_str();
  evaluate->add_option("--granularity", eval_gran, "step, page or step,page")->capture_default_str();
  evaluate->add_option("--out", eval_out, "Report CSV");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic loss gradients with central differences");
  std::uint64_t gc_seed = 1;
  int gc_instances = 20;
  GradcheckOptions gc_opt;
  bool gc_verbose = false;
  gradcheck->add_option("--seed", gc_seed, "Random seed")->capture_default_str();
  gradcheck->add_option("--instances", gc_instances, "Random problems to check")->capture_default_str();
  gradcheck->add_option("--step", gc_opt.h, "Finite-difference step")->capture_default_str();
  gradcheck->add_option("--tol", gc_opt.tol, "Relative error tolerance")->capture_default_str();
  gradcheck->add_flag("--verbose", gc_verbose, "One line per check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      RunManifest run("synth", argc, argv);
      std::tie(scfg.min_steps, scfg.max_steps) = parse_int_range(synth_steps);
      std::tie(scfg.min_segments_per_step, scfg.max_segments_per_step) = parse_int_range(synth_segments);
      scfg.ratios = parse_ratios(synth_ratios);
      const SynthData data = generate_synthetic(scfg);
      write_synthetic(data, synth_out);
      std::cout << format_summary(summarize(data.dataset)) << "\n";
      const std::filesystem::path root(synth_out);
      for (const char* f : {"manifest.json", "diagrams.emb", "clips.emb"}) run.output((root / f).string());
      run.doc["seed"] = scfg.seed;
      run.path = run_manifest_path.empty() ? (root / "synth.run.json").string() : run_manifest_path;
      run.write();
      return 0;
    }

    if (*split) {
      RunManifest run("split", argc, argv);
      Dataset ds = load_manifest(split_manifest);
      const SplitAssignment a = split_dataset(split_items(ds), parse_ratios(split_ratios), split_seed);
      ds.splits = a.lists();
      ds.build();
      const std::string out = split_out.empty() ? split_manifest : split_out;
      save_manifest(ds, out);
      for (Split s : {Split::train, Split::val, Split::test})
        std::cout << to_string(s) << ": " << a.videos[static_cast<std::size_t>(s)] << " videos, "
                  << a.segments[static_cast<std::size_t>(s)] << " segments\n";
      run.output(out);
      run.doc["seed"] = split_seed;
      run.path = run_manifest_path.empty() ? out + ".run.json" : run_manifest_path;
      run.write();
      return 0;
    }

    if (*train_cmd) {
      RunManifest run("train", argc, argv);
      tcfg.losses = parse_loss_terms(train_losses);
      if (!train_preset.empty()) {
        const LossPreset& preset = find_loss_preset(train_preset);
        tcfg.losses = preset.losses;
        if (train_batch->count() == 0) tcfg.batch_size = preset.batch_size;
      }
      tcfg.selection = parse_granularity(train_selection);
      tcfg.validate();
      const LoadedData d = load_data(train_data);
      const FeatureBuilder features(d.ds, d.diagrams, d.clips, tcfg.use_sprf);
      std::cout << describe(tcfg);
      const TrainResult r = train(features, tcfg, train_quiet ? nullptr : &std::cout);
      save_checkpoint({r.best, tcfg.use_sprf}, train_out);
      const std::string log_path = train_log.empty() ? train_out + ".log.csv" : train_log;
      write_file_atomically(log_path, training_log_csv(r, tcfg));
      std::cout << "best epoch " << r.best_epoch << ", val top-1 " << r.best_val_top1 << "\n";
      run.doc["config"] = config_json(describe(tcfg));
      run.doc["seed"] = tcfg.seed;
      run.doc["metrics"] = {{"best_epoch", r.best_epoch}, {"best_val_top1", r.best_val_top1}};
      run.output(train_out);
      run.output(log_path);
      run.path = run_manifest_path.empty() ? train_out + ".run.json" : run_manifest_path;
      run.write();
      return 0;
    }

    if (*align) {
      RunManifest run("align", argc, argv);
      align_opt.cfg.validate();
      const LoadedData d = load_data(align_data);
      const Checkpoint ckpt = align_model.resolve(d);
      const FeatureBuilder features(d.ds, d.diagrams, d.clips, ckpt.use_sprf);
      const Split s = parse_split(align_split_name);
      std::filesystem::create_directories(align_out);
      const std::filesystem::path root(align_out);
      std::size_t unconverged = 0;
      json metrics = json::object();
      for (Granularity g : parse_granularities(align_gran)) {
        const auto alignments = align_split(ckpt.model, features, s, g, mode_for(s), align_opt.cfg, threads);
        unconverged += count_unconverged(alignments);
        for (const auto& a : alignments) {
          const std::string stem = (root / (a.video_id + "." + to_string(g))).string();
          write_file_atomically(stem + ".csv", alignment_csv(a));
          run.output(stem + ".csv");
          if (dump_matrices) {
            std::ostringstream bytes(std::ios::binary);
            write_embedding_table(matrix_table(a.S, a.segment_ids), bytes);
            write_file_atomically(stem + ".S.emb", bytes.str());
            run.output(stem + ".S.emb");
            if (a.T.size() > 0) {
              std::ostringstream tb(std::ios::binary);
              write_embedding_table(matrix_table(a.T, a.segment_ids), tb);
              write_file_atomically(stem + ".T.emb", tb.str());
              run.output(stem + ".T.emb");
            }
          }
        }
        metrics[to_string(g)] = {{"videos", alignments.size()}, {"top1", alignment_top1(alignments)}};
        std::cout << to_string(g) << ": " << alignments.size() << " videos, top-1 " << alignment_top1(alignments) << "\n";
      }
      run.doc["config"] = config_json(describe(align_opt.cfg));
      run.doc["metrics"] = metrics;
      run.path = run_manifest_path.empty() ? (root / "align.run.json").string() : run_manifest_path;
      run.write();
      if (unconverged > 0) {
        std::cerr << "warning: Sinkhorn did not converge for " << unconverged << " video(s)\n";
        return 2;
      }
      return 0;
    }

    if (*retrieve_cmd) {
      const LoadedData d = load_data(ret_data);
      const Checkpoint ckpt = ret_model.resolve(d);
      const FeatureBuilder features(d.ds, d.diagrams, d.clips, ckpt.use_sprf);
      const Split s = parse_split(ret_split_name);
      const auto alignments =
          align_split(ckpt.model, features, s, parse_granularity(ret_gran), mode_for(s), ret_opt.cfg, threads);
      const auto ranked = retrieve(alignments, ret_query, parse_direction(ret_direction), ret_k);
      if (ranked.size() < ret_k)
        std::cerr << "warning: pool holds only " << ranked.size() << " candidates (k=" << ret_k << ")\n";
      std::cout << "rank,id,score\n";
      std::cout << std::setprecision(9);
      for (std::size_t r = 0; r < ranked.size(); ++r) std::cout << r + 1 << "," << ranked[r].id << "," << ranked[r].score << "\n";
      return 0;
    }

    if (*evaluate) {
      RunManifest run("evaluate", argc, argv);
      eval_opt.cfg.validate();
      const LoadedData d = load_data(eval_data);
      const Checkpoint ckpt = eval_model.resolve(d);
      const FeatureBuilder features(d.ds, d.diagrams, d.clips, ckpt.use_sprf);
      const Split s = parse_split(eval_split_name);
      EvaluationReport report;
      report.method = eval_opt.cfg.method;
      std::size_t unconverged = 0;
      for (Granularity g : parse_granularities(eval_gran)) {
        const auto alignments = align_split(ckpt.model, features, s, g, mode_for(s), eval_opt.cfg, threads);
        unconverged += count_unconverged(alignments);
        report.by_granularity[g] = evaluate_alignments(alignments);
      }
      std::cout << report.format_table();
      for (const auto& [g, m] : report.by_granularity)
        if (m.i2v_without_positive > 0)
          std::cout << to_string(g) << ": " << m.i2v_without_positive << " of " << m.i2v_queries
                    << " diagram queries have no positive segment (AUROC 0, excluded from R@k)\n";
      run.doc["config"] = config_json(describe(eval_opt.cfg));
      run.doc["metrics"] = json::object();
      for (const auto& [g, m] : report.by_granularity)
        run.doc["metrics"][to_string(g)] = {{"top1", m.top1}, {"aie", m.aie}, {"r1", m.r1}, {"r3", m.r3}, {"auroc", m.auroc}};
      if (!eval_out.empty()) {
        write_file_atomically(eval_out, report.to_csv());
        run.output(eval_out);
        run.path = run_manifest_path.empty() ? eval_out + ".run.json" : run_manifest_path;
      } else {
        run.path = run_manifest_path;
      }
      run.write();
      if (unconverged > 0) {
        std::cerr << "warning: Sinkhorn did not converge for " << unconverged << " video(s)\n";
        return 2;
      }
      return 0;
    }

    if (*gradcheck) {
      const auto t0 = std::chrono::steady_clock::now();
      const GradcheckSummary s = run_gradcheck(gc_seed, gc_instances, gc_opt);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      for (const auto& r : s.results)
        if (gc_verbose || !r.passed)
          std::cout << (r.passed ? "ok   " : "FAIL ") << r.label << ": " << r.checked << " params, max rel err "
                    << r.max_rel_error << " (" << r.worst << "); largest coordinate error " << r.coordinate_max_rel_error
                    << " at " << r.worst_coordinate << "\n";
      std::cout << s.results.size() << " checks, max relative error " << s.max_rel_error << ", " << secs << " s: "
                << (s.passed ? "pass" : "fail") << "\n";
      return s.passed ? 0 : 2;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::numerical ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
