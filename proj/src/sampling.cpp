#include "stepalign/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace stepalign {

namespace {

// Slack for interval arithmetic on decimal seconds.
constexpr double kTimeEps = 1e-9;

}  // namespace

std::vector<ActionSegment> segment_action(double t0, double t1, double fps) {
  if (!(t1 > t0)) fail("segment_action: interval must have t1 > t0");
  if (!(fps > 0.0)) fail("segment_action: fps must be positive");
  std::vector<ActionSegment> out;
  double start = t0;
  while (start + kSegmentSeconds <= t1 + kTimeEps) {
    out.push_back({start, start + kSegmentSeconds, false});
    start += kSegmentSeconds;
  }
  if (t1 - start > kTimeEps) out.push_back({std::max(t0, t1 - kSegmentSeconds), t1, true});
  return out;
}

SampleMode parse_sample_mode(const std::string& s) {
  if (s == "train") return SampleMode::train;
  if (s == "val") return SampleMode::val;
  if (s == "test") return SampleMode::test;
  fail("unknown sample mode '" + s + "'");
}

int segment_frame_count(const Segment& s, double fps) {
  return std::max(1, static_cast<int>(std::lround((s.t_end - s.t_start) * fps)));
}

std::vector<int> ClipWindow::frame_indices() const {
  std::vector<int> idx(static_cast<std::size_t>(frame_len));
  const int last = std::max(0, available_frames - 1);
  for (int k = 0; k < frame_len; ++k) idx[static_cast<std::size_t>(k)] = std::min(frame_start + k, last);
  return idx;
}

std::vector<ClipWindow> sample_clips(const Segment& segment, SampleMode mode, std::uint64_t seed, double fps) {
  const int nominal = static_cast<int>(std::lround(kSegmentSeconds * fps));
  const int span = std::max(0, nominal - kClipFrames);
  const int available = segment_frame_count(segment, fps);
  auto window = [&](int start) { return ClipWindow{segment.segment_id, start, kClipFrames, fps, available}; };

  std::vector<ClipWindow> out;
  switch (mode) {
    case SampleMode::train: {
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> pick(0, span);
      out.push_back(window(pick(rng)));
      break;
    }
    case SampleMode::val:
      out.push_back(window(0));
      break;
    case SampleMode::test:
      for (int k = 0; k < kTestClipsPerSegment; ++k)
        out.push_back(window(static_cast<int>(std::lround(static_cast<double>(k) * span / (kTestClipsPerSegment - 1)))));
      break;
  }
  return out;
}

std::vector<int> subsample_indices(int frame_len, int count) {
  if (count <= 0 || frame_len <= 0 || count > frame_len) fail("subsample_indices: need 0 < count <= frame_len");
  std::vector<int> idx(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) idx[static_cast<std::size_t>(k)] = (k * frame_len) / count;
  return idx;
}

std::string clip_row_id(const ClipWindow& w) { return w.segment_id + "@" + std::to_string(w.frame_start); }

std::vector<SegmentHandle> labeled_segments(const Dataset& ds, Split split, Granularity g) {
  std::vector<SegmentHandle> out;
  for (std::size_t v : ds.videos_in(split)) {
    const auto& segs = ds.videos[v].segments;
    for (std::size_t s = 0; s < segs.size(); ++s)
      if (segs[s].gt_index(g)) out.push_back({v, s});
  }
  return out;
}

PairBatch build_pair_batch(const Dataset& ds, const std::vector<SegmentHandle>& pool, std::size_t batch_size,
                           std::uint64_t seed, Granularity g) {
  if (pool.empty()) fail("build_pair_batch: no labeled clips to sample from");
  if (batch_size == 0) fail("build_pair_batch: batch size must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  PairBatch batch;
  batch.granularity = g;
  for (std::size_t b = 0; b < batch_size; ++b) {
    const SegmentHandle h = pool[pick(rng)];
    const VideoRecord& v = ds.videos[h.video];
    const Segment& seg = v.segments[h.segment];
    const int j = *seg.gt_index(g);
    const Manual& m = ds.manual_of(v);
    batch.clips.push_back(h);
    batch.clip_ids.push_back(seg.segment_id);
    batch.diagram_ids.push_back(m.diagrams(g)[static_cast<std::size_t>(j - 1)].diagram_id);
    batch.manuals.push_back(ds.manual_index(v.manual_id));
    batch.gt_index.push_back(j);
  }
  return batch;
}

PairBatch build_pair_batch(const Dataset& ds, std::size_t batch_size, std::uint64_t seed, Granularity g, Split split) {
  return build_pair_batch(ds, labeled_segments(ds, split, g), batch_size, seed, g);
}

ManualBatch build_manual_batch(const Dataset& ds, const std::vector<SegmentHandle>& pool, std::size_t batch_size,
                               std::uint64_t seed, Granularity g) {
  if (pool.empty()) fail("build_manual_batch: no labeled clips to sample from");
  if (batch_size == 0) fail("build_manual_batch: batch size must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  ManualBatch batch;
  batch.granularity = g;
  for (std::size_t b = 0; b < batch_size; ++b) {
    const SegmentHandle h = pool[pick(rng)];
    const VideoRecord& v = ds.videos[h.video];
    const Segment& seg = v.segments[h.segment];
    const std::size_t mi = ds.manual_index(v.manual_id);
    auto it = std::find(batch.manuals.begin(), batch.manuals.end(), mi);
    std::size_t slot = static_cast<std::size_t>(it - batch.manuals.begin());
    if (it == batch.manuals.end()) {
      batch.manuals.push_back(mi);
      std::vector<std::string> ids;
      for (const DiagramRef& d : ds.manuals[mi].diagrams(g)) ids.push_back(d.diagram_id);
      batch.diagram_ids.push_back(std::move(ids));
    }
    batch.clips.push_back(h);
    batch.clip_ids.push_back(seg.segment_id);
    batch.clip_slot.push_back(slot);
    batch.gt_index.push_back(*seg.gt_index(g));
  }
  return batch;
}

ManualBatch build_manual_batch(const Dataset& ds, std::size_t batch_size, std::uint64_t seed, Granularity g,
                               Split split) {
  return build_manual_batch(ds, labeled_segments(ds, split, g), batch_size, seed, g);
}

}  // namespace stepalign
