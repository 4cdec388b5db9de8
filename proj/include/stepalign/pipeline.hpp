#pragma once

#include "stepalign/config.hpp"
#include "stepalign/dataset.hpp"
#include "stepalign/embedding_table.hpp"
#include "stepalign/metrics.hpp"
#include "stepalign/objective.hpp"
#include "stepalign/sampling.hpp"

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace stepalign {

/// Looks up raw features for segments and diagrams and turns them into head inputs.
///
/// Clip rows are keyed either by segment id (one row per segment) or by "<segment>@<frame_start>" (one row
/// per clip window). train picks a seeded random window, val the earliest window, test the mean of all
/// windows of the segment.
class FeatureBuilder {
 public:
  FeatureBuilder(const Dataset& ds, const EmbeddingTable& diagrams, const EmbeddingTable& clips, bool use_sprf);

  const Dataset& dataset() const { return *ds_; }
  bool use_sprf() const { return use_sprf_; }
  int video_input_dim() const { return clips_->dim() + (use_sprf_ ? 2 : 0); }
  int diagram_input_dim() const { return diagrams_->dim() + (use_sprf_ ? 2 : 0); }

  VectorXd raw_clip_feature(const std::string& segment_id, SampleMode mode, std::uint64_t seed = 0) const;
  VectorXd video_input(SegmentHandle h, SampleMode mode, std::uint64_t seed = 0) const;
  VectorXd diagram_input(const DiagramRef& d, int manual_length) const;
  /// Inputs for every diagram of a manual at granularity g, one row each, in manual order.
  MatrixXd manual_inputs(const Manual& m, Granularity g) const;

 private:
  const Dataset* ds_;
  const EmbeddingTable* diagrams_;
  const EmbeddingTable* clips_;
  bool use_sprf_;
  std::unordered_map<std::string, std::vector<std::pair<int, std::size_t>>> windows_;  // sorted by frame start
};

/// Whole-video alignment of one video against its manual at one granularity.
struct VideoAlignment {
  std::string video_id;
  std::size_t manual = 0;  // dataset manual index
  Granularity granularity = Granularity::step;
  std::vector<std::string> segment_ids;  // rows, temporal order
  std::vector<std::optional<int>> gt;    // 1-based, per row
  std::vector<std::string> diagram_ids;  // columns
  MatrixXd S;       // cosine similarities
  MatrixXd T;       // transport plan (ot only)
  MatrixXd scores;  // post-processed scores used for ranking
  std::vector<int> assignment;  // 1-based predicted diagram per row
  bool converged = true;
  bool degenerate = false;
};

VideoAlignment align_video(const Model<double>& model, const FeatureBuilder& features, const VideoRecord& video,
                           Granularity g, SampleMode mode, const AlignConfig& cfg);

std::vector<VideoAlignment> align_split(const Model<double>& model, const FeatureBuilder& features, Split split,
                                        Granularity g, SampleMode mode, const AlignConfig& cfg, int threads = 1);

/// CSV rows "segment_id,j_star,score".
std::string alignment_csv(const VideoAlignment& a);

/// V2I queries: one per labeled segment, pool = its manual's diagrams. I2V queries: one per diagram of every
/// manual with aligned videos, pool = all aligned segments of that manual's videos.
std::vector<RetrievalQuery> build_queries(const std::vector<VideoAlignment>& alignments, Direction dir);

GranularityMetrics evaluate_alignments(const std::vector<VideoAlignment>& alignments);

/// Top-1 accuracy (percent) over the labeled rows of the alignments.
double alignment_top1(const std::vector<VideoAlignment>& alignments);

struct RankedCandidate {
  std::string id;
  double score = 0.0;
};

/// Top-k candidates for a segment (V2I) or diagram (I2V) query. Throws on unknown ids.
std::vector<RankedCandidate> retrieve(const std::vector<VideoAlignment>& alignments, const std::string& query_id,
                                      Direction dir, std::size_t k);

Direction parse_direction(const std::string& s);

/// Mean over labeled segments of the split of 1/M, M the length of the segment's manual at g.
double chance_top1(const Dataset& ds, Split split, Granularity g);

}  // namespace stepalign
