#include "stepalign/training.hpp"

#include "stepalign/optim.hpp"

#include <cmath>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace stepalign {

Model<double> init_model(Index video_in, Index diagram_in, const TrainConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  Model<double> m;
  const Index out = cfg.out_dim;
  m.video = ProjectionHead<double>(video_in, cfg.hidden > 0 ? cfg.hidden : video_in, out);
  m.diagram = ProjectionHead<double>(diagram_in, cfg.hidden > 0 ? cfg.hidden : diagram_in, out);
  m.video.init_uniform(rng);
  m.diagram.init_uniform(rng);
  const double log_tau = std::log(cfg.init_tau);
  m.params = {log_tau, log_tau, log_tau, std::log(cfg.init_theta)};
  return m;
}

std::vector<ObjectiveBatch<double>> sample_objective_batches(const FeatureBuilder& features,
                                                             const std::map<Granularity, std::vector<SegmentHandle>>& pools,
                                                             const TrainConfig& cfg, std::uint64_t seed) {
  const Dataset& ds = features.dataset();
  std::mt19937_64 rng(seed);
  std::vector<ObjectiveBatch<double>> out;
  for (Granularity g : {Granularity::step, Granularity::page}) {
    ObjectiveBatch<double> batch;
    batch.granularity = g;
    for (const LossTerm& t : cfg.losses) {
      if (t.granularity != g) continue;
      (uses_pair_batch(t.kind) ? batch.pair_losses : batch.manual_losses).push_back(t.kind);
    }
    if (batch.pair_losses.empty() && batch.manual_losses.empty()) continue;
    auto pool = pools.find(g);
    if (pool == pools.end() || pool->second.empty()) fail("training: no labeled " + std::string(to_string(g)) + " segments");

    if (!batch.pair_losses.empty()) {
      const PairBatch pb = build_pair_batch(ds, pool->second, cfg.batch_size, rng(), g);
      const auto B = static_cast<Index>(pb.size());
      batch.pair.video.resize(B, features.video_input_dim());
      batch.pair.diagram.resize(B, features.diagram_input_dim());
      for (Index b = 0; b < B; ++b) {
        const auto k = static_cast<std::size_t>(b);
        batch.pair.video.row(b) = features.video_input(pb.clips[k], SampleMode::train, rng()).transpose();
        const Manual& man = ds.manuals[pb.manuals[k]];
        const auto& list = man.diagrams(g);
        batch.pair.diagram.row(b) =
            features.diagram_input(list[static_cast<std::size_t>(pb.gt_index[k] - 1)], static_cast<int>(list.size()))
                .transpose();
      }
      batch.pair.positive.resize(B, B);
      for (Index a = 0; a < B; ++a)
        for (Index b = 0; b < B; ++b)
          batch.pair.positive(a, b) = pb.diagram_ids[static_cast<std::size_t>(a)] == pb.diagram_ids[static_cast<std::size_t>(b)];
    }

    if (!batch.manual_losses.empty()) {
      const ManualBatch mb = build_manual_batch(ds, pool->second, cfg.batch_size, rng(), g);
      const auto B = static_cast<Index>(mb.size());
      batch.manual.video.resize(B, features.video_input_dim());
      for (Index b = 0; b < B; ++b)
        batch.manual.video.row(b) =
            features.video_input(mb.clips[static_cast<std::size_t>(b)], SampleMode::train, rng()).transpose();
      std::vector<Index> offsets;
      Index K = 0;
      for (const auto& ids : mb.diagram_ids) {
        offsets.push_back(K);
        K += static_cast<Index>(ids.size());
      }
      batch.manual.diagram.resize(K, features.diagram_input_dim());
      for (std::size_t s = 0; s < mb.manuals.size(); ++s)
        batch.manual.diagram.middleRows(offsets[s], static_cast<Index>(mb.diagram_ids[s].size())) =
            features.manual_inputs(ds.manuals[mb.manuals[s]], g);
      for (std::size_t k = 0; k < mb.size(); ++k) {
        const std::size_t slot = mb.clip_slot[k];
        batch.manual.spans.push_back({offsets[slot], static_cast<Index>(mb.diagram_ids[slot].size()),
                                      static_cast<Index>(mb.gt_index[k] - 1)});
      }
    }
    out.push_back(std::move(batch));
  }
  return out;
}

namespace {

double validation_top1(const Model<double>& model, const FeatureBuilder& features, Granularity g) {
  AlignConfig raw;
  return alignment_top1(align_split(model, features, Split::val, g, SampleMode::val, raw));
}

}  // namespace

TrainResult train(const FeatureBuilder& features, const TrainConfig& cfg, std::ostream* progress) {
  cfg.validate();
  const Dataset& ds = features.dataset();
  std::map<Granularity, std::vector<SegmentHandle>> pools;
  std::size_t n_train = 0;
  for (const LossTerm& t : cfg.losses)
    if (!pools.count(t.granularity)) {
      pools[t.granularity] = labeled_segments(ds, Split::train, t.granularity);
      n_train = std::max(n_train, pools[t.granularity].size());
    }
  if (n_train == 0) fail("training: the train split has no labeled segments");
  const std::size_t steps = (n_train + cfg.batch_size - 1) / cfg.batch_size;

  Model<double> model = init_model(features.video_input_dim(), features.diagram_input_dim(), cfg);
  Vector<double> flat = flatten(model);
  const Vector<double> decay = decay_mask(model);
  AdamWState<double> state(flat.size());
  std::seed_seq seq{cfg.seed, std::uint64_t{0x7261696e}};
  std::mt19937_64 rng(seq);

  TrainResult result;
  result.best = model;
  result.best_val_top1 = validation_top1(model, features, cfg.selection);
  result.log.push_back({0, {}, 0.0, result.best_val_top1});
  if (progress) *progress << "epoch 0 val_top1=" << result.best_val_top1 << "\n";

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    for (std::size_t step = 0; step < steps; ++step) {
      const auto batches = sample_objective_batches(features, pools, cfg, rng());
      const auto value = evaluate_objective(model, batches, true);
      if (!std::isfinite(value.total)) fail_numeric("training: loss became non-finite at epoch " + std::to_string(epoch));
      for (const auto& [term, v] : value.terms) entry.losses[term] += v / static_cast<double>(steps);
      entry.total += value.total / static_cast<double>(steps);
      adamw_step(flat, flatten(value.grad), state, cfg.optim, decay);
      if (!flat.allFinite()) fail_numeric("training: parameters became non-finite at epoch " + std::to_string(epoch));
      unflatten(flat, model);
    }
    entry.val_top1 = validation_top1(model, features, cfg.selection);
    if (entry.val_top1 > result.best_val_top1) {
      result.best_val_top1 = entry.val_top1;
      result.best_epoch = epoch;
      result.best = model;
    }
    if (progress) *progress << "epoch " << epoch << " loss=" << entry.total << " val_top1=" << entry.val_top1 << "\n";
    result.log.push_back(std::move(entry));
  }
  return result;
}

std::string training_log_csv(const TrainResult& r, const TrainConfig& cfg) {
  std::ostringstream out;
  out.precision(10);
  std::set<LossTerm> terms(cfg.losses.begin(), cfg.losses.end());
  out << "epoch";
  for (const LossTerm& t : terms) out << "," << to_string(t);
  out << ",total,val_top1\n";
  for (const EpochLog& e : r.log) {
    out << e.epoch;
    for (const LossTerm& t : terms) {
      auto it = e.losses.find(t);
      out << ",";
      if (it != e.losses.end()) out << it->second;
    }
    out << ",";
    if (e.epoch > 0) out << e.total;
    out << "," << e.val_top1 << "\n";
  }
  return out.str();
}

}  // namespace stepalign
