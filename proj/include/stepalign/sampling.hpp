#pragma once

#include "stepalign/dataset.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace stepalign {

inline constexpr double kSegmentSeconds = 10.0;
inline constexpr int kClipFrames = 64;
inline constexpr double kCanonicalFps = 30.0;
inline constexpr int kTestClipsPerSegment = 5;
inline constexpr int kSlowPathFrames = 8;
inline constexpr int kFastPathFrames = 32;

struct ActionSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  bool padded = false;  // shorter than 10 s; clips are back-padded by repeating the last frame
};

/// Cuts an action interval [t0, t1) into consecutive 10 s windows. A residue shorter than 10 s becomes a
/// final window anchored at t1 (start max(t0, t1 - 10)) and marked padded.
std::vector<ActionSegment> segment_action(double t0, double t1, double fps = kCanonicalFps);

enum class SampleMode { train, val, test };

SampleMode parse_sample_mode(const std::string& s);

struct ClipWindow {
  std::string segment_id;
  int frame_start = 0;  // relative to the segment's first frame
  int frame_len = kClipFrames;
  double fps = kCanonicalFps;
  int available_frames = 0;  // real frames in the segment; later indices repeat the last one

  /// Frame offsets (relative to segment start) of all frame_len frames after back padding.
  std::vector<int> frame_indices() const;
};

int segment_frame_count(const Segment& s, double fps);

/// train: one seeded uniform window; val: one window at frame 0; test: five windows evenly spaced over the
/// nominal 10 s span, starts round(k * (300 - 64) / 4).
std::vector<ClipWindow> sample_clips(const Segment& segment, SampleMode mode, std::uint64_t seed,
                                     double fps = kCanonicalFps);

/// `count` offsets uniformly spaced over [0, frame_len), strictly increasing (8 for the slow path,
/// 32 for the fast path of a 64-frame clip).
std::vector<int> subsample_indices(int frame_len, int count);

/// Row id under which a clip window's embedding is stored: "<segment_id>@<frame_start>".
std::string clip_row_id(const ClipWindow& w);

/// Labeled segments of the given split (those with a ground-truth index at granularity g).
std::vector<SegmentHandle> labeled_segments(const Dataset& ds, Split split, Granularity g);

struct PairBatch {
  Granularity granularity = Granularity::step;
  bool many_to_one = true;
  std::vector<SegmentHandle> clips;
  std::vector<std::string> clip_ids;
  std::vector<std::string> diagram_ids;  // ground-truth diagram of each clip; may repeat
  std::vector<std::size_t> manuals;      // dataset manual index per pair
  std::vector<int> gt_index;             // 1-based

  std::size_t size() const { return clips.size(); }
};

struct ManualBatch {
  Granularity granularity = Granularity::step;
  std::vector<SegmentHandle> clips;
  std::vector<std::string> clip_ids;
  std::vector<std::size_t> clip_slot;  // per clip, index into `manuals`
  std::vector<int> gt_index;           // per clip, 1-based position in its manual
  std::vector<std::size_t> manuals;    // distinct dataset manual indices, first-seen order
  std::vector<std::vector<std::string>> diagram_ids;  // per slot, the manual's ordered diagram ids

  std::size_t size() const { return clips.size(); }
  int manual_length(std::size_t clip) const { return static_cast<int>(diagram_ids[clip_slot[clip]].size()); }
};

/// B labeled training clips drawn uniformly with replacement, each paired with its ground-truth diagram.
PairBatch build_pair_batch(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                           Granularity g = Granularity::step, Split split = Split::train);
PairBatch build_pair_batch(const Dataset& ds, const std::vector<SegmentHandle>& pool, std::size_t batch_size,
                           std::uint64_t seed, Granularity g);

/// B labeled training clips, each with the full ordered diagram list of its manual (stored once per manual).
ManualBatch build_manual_batch(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                               Granularity g = Granularity::step, Split split = Split::train);
ManualBatch build_manual_batch(const Dataset& ds, const std::vector<SegmentHandle>& pool, std::size_t batch_size,
                               std::uint64_t seed, Granularity g);

}  // namespace stepalign
