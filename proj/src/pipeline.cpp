#include "stepalign/pipeline.hpp"

#include "stepalign/features.hpp"
#include "stepalign/parallel.hpp"
#include "stepalign/set_matching.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

namespace stepalign {

FeatureBuilder::FeatureBuilder(const Dataset& ds, const EmbeddingTable& diagrams, const EmbeddingTable& clips,
                               bool use_sprf)
    : ds_(&ds), diagrams_(&diagrams), clips_(&clips), use_sprf_(use_sprf) {
  for (std::size_t r = 0; r < clips.size(); ++r) {
    const std::string& id = clips.id(r);
    const auto at = id.rfind('@');
    if (at == std::string::npos) {
      windows_[id].emplace_back(-1, r);
      continue;
    }
    int frame = 0;
    try {
      frame = std::stoi(id.substr(at + 1));
    } catch (const std::exception&) {
      fail("clip row '" + id + "': frame offset after '@' is not an integer");
    }
    windows_[id.substr(0, at)].emplace_back(frame, r);
  }
  for (auto& [id, rows] : windows_) std::sort(rows.begin(), rows.end());
}

VectorXd FeatureBuilder::raw_clip_feature(const std::string& segment_id, SampleMode mode, std::uint64_t seed) const {
  auto it = windows_.find(segment_id);
  if (it == windows_.end()) fail("no clip embedding for segment '" + segment_id + "'");
  const auto& rows = it->second;
  switch (mode) {
    case SampleMode::val: return clips_->row(rows.front().second).cast<double>();
    case SampleMode::train: {
      if (rows.size() == 1) return clips_->row(rows.front().second).cast<double>();
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
      return clips_->row(rows[pick(rng)].second).cast<double>();
    }
    case SampleMode::test: break;
  }
  VectorXd sum = VectorXd::Zero(clips_->dim());
  for (const auto& [frame, row] : rows) sum += clips_->row(row).cast<double>();
  return sum / static_cast<double>(rows.size());
}

VectorXd FeatureBuilder::video_input(SegmentHandle h, SampleMode mode, std::uint64_t seed) const {
  const VideoRecord& v = ds_->videos[h.video];
  const Segment& s = v.segments[h.segment];
  const VectorXd raw = raw_clip_feature(s.segment_id, mode, seed);
  if (!use_sprf_) return augment_without_progress(raw);
  return augment(raw, progress_rate_video(s.t_start, s.t_end, v.duration));
}

VectorXd FeatureBuilder::diagram_input(const DiagramRef& d, int manual_length) const {
  const VectorXd raw = diagrams_->at(d.diagram_id).cast<double>();
  if (!use_sprf_) return augment_without_progress(raw);
  return augment(raw, progress_rate_diagram(d.index, manual_length));
}

MatrixXd FeatureBuilder::manual_inputs(const Manual& m, Granularity g) const {
  const auto& list = m.diagrams(g);
  MatrixXd X(static_cast<Index>(list.size()), diagram_input_dim());
  for (std::size_t j = 0; j < list.size(); ++j)
    X.row(static_cast<Index>(j)) = diagram_input(list[j], static_cast<int>(list.size())).transpose();
  return X;
}

VideoAlignment align_video(const Model<double>& model, const FeatureBuilder& features, const VideoRecord& video,
                           Granularity g, SampleMode mode, const AlignConfig& cfg) {
  const Dataset& ds = features.dataset();
  VideoAlignment a;
  a.video_id = video.video_id;
  a.manual = ds.manual_index(video.manual_id);
  a.granularity = g;
  const Manual& man = ds.manuals[a.manual];
  for (const DiagramRef& d : man.diagrams(g)) a.diagram_ids.push_back(d.diagram_id);
  if (a.diagram_ids.empty()) fail("manual '" + man.manual_id + "' has no " + to_string(g) + " diagrams");
  if (video.segments.empty()) fail("video '" + video.video_id + "' has no segments");

  const std::size_t vi = static_cast<std::size_t>(&video - ds.videos.data());
  MatrixXd X(static_cast<Index>(video.segments.size()), features.video_input_dim());
  for (std::size_t i = 0; i < video.segments.size(); ++i) {
    a.segment_ids.push_back(video.segments[i].segment_id);
    a.gt.push_back(video.segments[i].gt_index(g));
    X.row(static_cast<Index>(i)) = features.video_input({vi, i}, mode).transpose();
  }
  const MatrixXd YV = project_rows(model.video, X).output;
  const MatrixXd YI = project_rows(model.diagram, features.manual_inputs(man, g)).output;
  a.S = similarity_matrix(YV, YI);

  if (cfg.method == "raw") {
    a.scores = a.S;
    a.assignment = plan_to_assignment(a.S);
  } else if (cfg.method == "ot") {
    const auto cost = cost_matrix(a.S, cfg.alpha);
    a.degenerate = cost.degenerate;
    SinkhornOptions opt;
    opt.epsilon = cfg.epsilon;
    opt.tol = cfg.tol;
    opt.max_iter = cfg.max_iter;
    opt.sense = cfg.literal_cost ? TransportSense::literal_cost : TransportSense::similarity;
    const auto plan = sinkhorn(cost.C, opt);
    a.T = plan.T;
    a.converged = plan.converged;
    if (!a.T.allFinite()) fail_numeric("transport plan for video '" + video.video_id + "' is not finite");
    // Row-conditional matching probabilities: each row of N*T sums to one.
    a.scores = static_cast<double>(a.T.rows()) * a.T;
    a.assignment = plan_to_assignment(a.T);
  } else if (cfg.method == "dtw") {
    const AlignmentPath path = dtw_align(a.S);
    // Cells on the path keep their similarity; cells off it rank below every on-path cell.
    a.scores = a.S.array() - 2.0;
    for (const auto& [i, j] : path.cells) a.scores(i, j) = a.S(i, j);
    a.assignment = path_to_assignment(path, a.S.rows());
  } else {
    fail("unknown method '" + cfg.method + "'");
  }
  return a;
}

std::vector<VideoAlignment> align_split(const Model<double>& model, const FeatureBuilder& features, Split split,
                                        Granularity g, SampleMode mode, const AlignConfig& cfg, int threads) {
  cfg.validate();
  const Dataset& ds = features.dataset();
  std::vector<std::size_t> videos;
  for (std::size_t v : ds.videos_in(split))
    if (!ds.videos[v].segments.empty() && !ds.manual_of(ds.videos[v]).diagrams(g).empty()) videos.push_back(v);
  std::vector<VideoAlignment> out(videos.size());
  parallel_for(videos.size(), threads,
               [&](std::size_t k) { out[k] = align_video(model, features, ds.videos[videos[k]], g, mode, cfg); });
  return out;
}

std::string alignment_csv(const VideoAlignment& a) {
  std::ostringstream out;
  out.precision(9);
  out << "segment_id,j_star,score\n";
  for (std::size_t i = 0; i < a.segment_ids.size(); ++i) {
    const int j = a.assignment[i];
    out << a.segment_ids[i] << "," << j << "," << a.scores(static_cast<Index>(i), j - 1) << "\n";
  }
  return out.str();
}

std::vector<RetrievalQuery> build_queries(const std::vector<VideoAlignment>& alignments, Direction dir) {
  std::vector<RetrievalQuery> out;
  if (dir == Direction::V2I) {
    for (const auto& a : alignments)
      for (std::size_t i = 0; i < a.segment_ids.size(); ++i) {
        if (!a.gt[i]) continue;
        RetrievalQuery q;
        q.direction = dir;
        q.query_id = a.segment_ids[i];
        q.candidates = a.diagram_ids;
        for (std::size_t j = 0; j < a.diagram_ids.size(); ++j) {
          q.scores.push_back(a.scores(static_cast<Index>(i), static_cast<Index>(j)));
          q.positive.push_back(*a.gt[i] == static_cast<int>(j) + 1);
        }
        out.push_back(std::move(q));
      }
    return out;
  }
  std::map<std::size_t, std::vector<const VideoAlignment*>> by_manual;
  for (const auto& a : alignments) by_manual[a.manual].push_back(&a);
  for (const auto& [manual, group] : by_manual) {
    const auto& diagram_ids = group.front()->diagram_ids;
    for (std::size_t j = 0; j < diagram_ids.size(); ++j) {
      RetrievalQuery q;
      q.direction = dir;
      q.query_id = diagram_ids[j];
      for (const VideoAlignment* a : group)
        for (std::size_t i = 0; i < a->segment_ids.size(); ++i) {
          q.candidates.push_back(a->segment_ids[i]);
          q.scores.push_back(a->scores(static_cast<Index>(i), static_cast<Index>(j)));
          q.positive.push_back(a->gt[i] && *a->gt[i] == static_cast<int>(j) + 1);
        }
      out.push_back(std::move(q));
    }
  }
  return out;
}

namespace {

void labeled_predictions(const std::vector<VideoAlignment>& alignments, std::vector<int>& preds, std::vector<int>& gts) {
  for (const auto& a : alignments)
    for (std::size_t i = 0; i < a.segment_ids.size(); ++i)
      if (a.gt[i]) {
        preds.push_back(a.assignment[i]);
        gts.push_back(*a.gt[i]);
      }
}

}  // namespace

GranularityMetrics evaluate_alignments(const std::vector<VideoAlignment>& alignments) {
  GranularityMetrics m;
  std::vector<int> preds, gts;
  labeled_predictions(alignments, preds, gts);
  if (preds.empty()) fail("evaluation: no labeled segments");
  m.top1 = top1_accuracy(preds, gts);
  m.aie = average_index_error(preds, gts);
  m.v2i_queries = preds.size();
  const auto i2v = build_queries(alignments, Direction::I2V);
  m.i2v_queries = i2v.size();
  for (const auto& q : i2v) m.i2v_without_positive += !q.has_positive();
  m.r1 = recall_percent(i2v, 1);
  m.r3 = recall_percent(i2v, 3);
  m.auroc = mean_auroc(i2v);
  return m;
}

double alignment_top1(const std::vector<VideoAlignment>& alignments) {
  std::vector<int> preds, gts;
  labeled_predictions(alignments, preds, gts);
  if (preds.empty()) fail("evaluation: no labeled segments");
  return top1_accuracy(preds, gts);
}

std::vector<RankedCandidate> retrieve(const std::vector<VideoAlignment>& alignments, const std::string& query_id,
                                      Direction dir, std::size_t k) {
  std::vector<RetrievalQuery> queries;
  if (dir == Direction::V2I) {
    // Unlabeled segments are valid queries too; build the one needed directly.
    for (const auto& a : alignments)
      for (std::size_t i = 0; i < a.segment_ids.size(); ++i)
        if (a.segment_ids[i] == query_id) {
          RetrievalQuery q;
          q.direction = dir;
          q.query_id = query_id;
          q.candidates = a.diagram_ids;
          for (std::size_t j = 0; j < a.diagram_ids.size(); ++j) {
            q.scores.push_back(a.scores(static_cast<Index>(i), static_cast<Index>(j)));
            q.positive.push_back(false);
          }
          queries.push_back(std::move(q));
        }
  } else {
    for (auto& q : build_queries(alignments, dir))
      if (q.query_id == query_id) queries.push_back(std::move(q));
  }
  if (queries.empty()) fail("unknown query id '" + query_id + "' for " + (dir == Direction::V2I ? "V2I" : "I2V"));
  const RetrievalQuery& q = queries.front();
  std::vector<RankedCandidate> out;
  for (std::size_t idx : rank_candidates(q)) {
    if (out.size() == k) break;
    out.push_back({q.candidates[idx], q.scores[idx]});
  }
  return out;
}

Direction parse_direction(const std::string& s) {
  if (s == "v2i" || s == "V2I") return Direction::V2I;
  if (s == "i2v" || s == "I2V") return Direction::I2V;
  fail("unknown direction '" + s + "' (expected v2i or i2v)");
}

double chance_top1(const Dataset& ds, Split split, Granularity g) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t v : ds.videos_in(split)) {
    const auto M = ds.manual_of(ds.videos[v]).diagrams(g).size();
    for (const Segment& s : ds.videos[v].segments)
      if (s.gt_index(g)) {
        sum += 1.0 / static_cast<double>(M);
        ++n;
      }
  }
  if (n == 0) fail("chance_top1: no labeled segments in split");
  return 100.0 * sum / static_cast<double>(n);
}

}  // namespace stepalign
