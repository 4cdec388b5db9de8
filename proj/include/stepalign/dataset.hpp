#pragma once

#include "stepalign/types.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace stepalign {

class EmbeddingTable;

struct DiagramRef {
  std::string diagram_id;
  std::string manual_id;
  int index = 0;  // 1-based position within the manual
  Granularity granularity = Granularity::step;
};

struct Manual {
  std::string manual_id;
  std::string furniture_id;
  std::vector<DiagramRef> steps;
  std::vector<DiagramRef> pages;

  const std::vector<DiagramRef>& diagrams(Granularity g) const { return g == Granularity::step ? steps : pages; }
};

struct Segment {
  std::string segment_id;
  double t_start = 0.0;
  double t_end = 0.0;
  std::optional<int> gt_step_index;
  std::optional<int> gt_page_index;

  std::optional<int> gt_index(Granularity g) const { return g == Granularity::step ? gt_step_index : gt_page_index; }
};

struct VideoRecord {
  std::string video_id;
  std::string manual_id;
  double duration = 0.0;
  double fps = 30.0;
  std::map<std::string, std::string> attributes;
  std::vector<Segment> segments;
};

enum class Split { train, val, test };

const char* to_string(Split s);
Split parse_split(const std::string& s);

/// Split membership as it appears on disk (possibly inconsistent until validated).
using SplitLists = std::map<Split, std::vector<std::string>>;

/// Locates a segment inside Dataset::videos.
struct SegmentHandle {
  std::size_t video = 0;
  std::size_t segment = 0;
};

/// Cross-linked dataset. Immutable once built by load_manifest / from_json / build().
class Dataset {
 public:
  std::vector<Manual> manuals;
  std::vector<VideoRecord> videos;
  SplitLists splits;

  /// Checks invariants and rebuilds the id indices. Throws Error naming the offending id.
  void build();

  const Manual& manual(const std::string& manual_id) const;
  std::size_t manual_index(const std::string& manual_id) const;
  const VideoRecord& video(const std::string& video_id) const;
  std::optional<SegmentHandle> find_segment(const std::string& segment_id) const;
  std::optional<DiagramRef> find_diagram(const std::string& diagram_id) const;
  const Manual& manual_of(const VideoRecord& v) const { return manual(v.manual_id); }

  std::optional<Split> split_of(const std::string& video_id) const;
  std::vector<std::size_t> videos_in(Split s) const;

  std::size_t segment_count() const;
  std::size_t furniture_count() const;

 private:
  std::unordered_map<std::string, std::size_t> manual_index_;
  std::unordered_map<std::string, std::size_t> video_index_;
  std::unordered_map<std::string, SegmentHandle> segment_index_;
  std::unordered_map<std::string, DiagramRef> diagram_index_;
  std::unordered_map<std::string, Split> split_index_;
};

struct DatasetSummary {
  std::size_t furniture = 0;
  std::size_t manuals = 0;
  std::size_t videos = 0;
  std::size_t segments = 0;
  std::size_t steps = 0;
  std::size_t pages = 0;
  std::size_t labeled_segments = 0;
};

DatasetSummary summarize(const Dataset& ds);
std::string format_summary(const DatasetSummary& s);

Dataset load_manifest(const std::string& path);
Dataset parse_manifest(const std::string& json_text);
void save_manifest(const Dataset& ds, const std::string& path);
std::string dump_manifest(const Dataset& ds);

struct ValidationReport {
  std::vector<std::string> missing_segment_embeddings;
  std::vector<std::string> missing_diagram_embeddings;
  std::vector<std::string> dimension_mismatches;
  std::vector<std::string> leakage;  // video ids seen in more than one split, or unknown

  bool empty() const {
    return missing_segment_embeddings.empty() && missing_diagram_embeddings.empty() && dimension_mismatches.empty() &&
           leakage.empty();
  }
  std::size_t size() const {
    return missing_segment_embeddings.size() + missing_diagram_embeddings.size() + dimension_mismatches.size() +
           leakage.size();
  }
  std::string to_string() const;
};

/// Report-only check of a dataset against its embedding tables: missing rows, dimension mismatches
/// and split leakage (a video listed in more than one split, or a split entry naming no video).
ValidationReport validate_dataset(const Dataset& ds, const EmbeddingTable& diagrams, const EmbeddingTable& clips,
                                  std::optional<int> expected_diagram_dim = {}, std::optional<int> expected_clip_dim = {});

}  // namespace stepalign
