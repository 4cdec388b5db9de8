#include "doctest.h"
#include "helpers.hpp"

#include "stepalign/sampling.hpp"
#include "stepalign/synth.hpp"

#include <set>

using namespace stepalign;

TEST_CASE("segment_action windows") {
  SUBCASE("exact multiple") {
    const auto s = segment_action(0, 20);
    REQUIRE(s.size() == 2);
    CHECK(s[0].t_start == 0);
    CHECK(s[0].t_end == 10);
    CHECK(s[1].t_start == 10);
    CHECK(!s[1].padded);
  }
  SUBCASE("residue is end aligned") {
    const auto s = segment_action(0, 23);
    REQUIRE(s.size() == 3);
    CHECK(s[2].t_start == doctest::Approx(13));
    CHECK(s[2].t_end == doctest::Approx(23));
    CHECK(s[2].padded);
    CHECK(!s[1].padded);
  }
  SUBCASE("short action") {
    const auto s = segment_action(0, 7);
    REQUIRE(s.size() == 1);
    CHECK(s[0].t_start == 0);
    CHECK(s[0].t_end == 7);
    CHECK(s[0].padded);
  }
  SUBCASE("offset start") {
    const auto s = segment_action(4.5, 31.0);
    REQUIRE(s.size() == 3);
    CHECK(s[2].t_start == doctest::Approx(21.0));
  }
  CHECK_THROWS_AS(segment_action(5, 5), Error);
}

TEST_CASE("segment_action covers the action with 10 s windows") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double t0 = u(rng), len = 0.1 + u(rng) / 2;
    const auto segs = segment_action(t0, t0 + len);
    CHECK(segs.size() == static_cast<std::size_t>(std::ceil(len / 10.0 - 1e-9)));
    CHECK(segs.front().t_start == doctest::Approx(t0));
    CHECK(segs.back().t_end == doctest::Approx(t0 + len));
    for (const auto& s : segs) {
      CHECK(s.t_end - s.t_start <= 10.0 + 1e-9);
      CHECK(s.t_start >= t0 - 1e-9);
    }
  }
}

TEST_CASE("clip windows per mode") {
  const Segment full{"seg", 0.0, 10.0, 1, 1};
  SUBCASE("test mode starts") {
    const auto w = sample_clips(full, SampleMode::test, 0);
    REQUIRE(w.size() == 5);
    const int expected[] = {0, 59, 118, 177, 236};
    for (int k = 0; k < 5; ++k) {
      CHECK(w[static_cast<std::size_t>(k)].frame_start == expected[k]);
      CHECK(w[static_cast<std::size_t>(k)].frame_start == static_cast<int>(std::lround(k * (300.0 - 64.0) / 4.0)));
    }
    CHECK(clip_row_id(w[1]) == "seg@59");
  }
  SUBCASE("val always starts at 0") {
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) CHECK(sample_clips(full, SampleMode::val, seed)[0].frame_start == 0);
  }
  SUBCASE("train is seeded") {
    std::set<int> starts;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const int a = sample_clips(full, SampleMode::train, seed)[0].frame_start;
      CHECK(a == sample_clips(full, SampleMode::train, seed)[0].frame_start);
      CHECK(a >= 0);
      CHECK(a <= 236);
      starts.insert(a);
    }
    CHECK(starts.size() > 10);
  }
}

TEST_CASE("windows are padded to 64 frames") {
  const Segment short_seg{"s", 0.0, 1.0, 1, 1};  // 30 frames
  for (SampleMode mode : {SampleMode::train, SampleMode::val, SampleMode::test})
    for (const ClipWindow& w : sample_clips(short_seg, mode, 5)) {
      const auto idx = w.frame_indices();
      CHECK(idx.size() == 64);
      for (int f : idx) CHECK(f <= 29);
      for (std::size_t k = 1; k < idx.size(); ++k) CHECK(idx[k] >= idx[k - 1]);
    }
  const auto idx = sample_clips(short_seg, SampleMode::val, 0)[0].frame_indices();
  CHECK(idx[29] == 29);
  CHECK(idx[63] == 29);
}

TEST_CASE("slow and fast path sub-sampling") {
  const auto slow = subsample_indices(64, 8);
  const auto fast = subsample_indices(64, 32);
  CHECK(slow == std::vector<int>{0, 8, 16, 24, 32, 40, 48, 56});
  REQUIRE(fast.size() == 32);
  for (std::size_t k = 1; k < fast.size(); ++k) CHECK(fast[k] == fast[k - 1] + 2);
  for (int count = 1; count <= 64; ++count) {
    const auto idx = subsample_indices(64, count);
    for (std::size_t k = 1; k < idx.size(); ++k) CHECK(idx[k] > idx[k - 1]);
    CHECK(idx.back() < 64);
  }
  CHECK_THROWS_AS(subsample_indices(8, 9), Error);
}

namespace {

SynthData small_synth(std::uint64_t seed = 2) {
  SynthConfig cfg;
  cfg.manuals = 6;
  cfg.videos_per_manual = 3;
  cfg.dim = 8;
  cfg.seed = seed;
  return generate_synthetic(cfg);
}

}  // namespace

TEST_CASE("pair batches") {
  const SynthData data = small_synth();
  const Dataset& ds = data.dataset;
  const PairBatch a = build_pair_batch(ds, 128, 11);
  CHECK(a.size() == 128);
  const PairBatch b = build_pair_batch(ds, 128, 11);
  CHECK(a.clip_ids == b.clip_ids);
  CHECK(build_pair_batch(ds, 128, 12).clip_ids != a.clip_ids);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto h = ds.find_segment(a.clip_ids[i]);
    REQUIRE(h);
    CHECK(ds.split_of(ds.videos[h->video].video_id) == Split::train);
    const auto d = ds.find_diagram(a.diagram_ids[i]);
    CHECK(d->index == a.gt_index[i]);
    CHECK(d->manual_id == ds.videos[h->video].manual_id);
  }
  CHECK(build_pair_batch(ds, 256, 1).size() == 256);
  CHECK(build_pair_batch(ds, 1, 1).size() == 1);
  CHECK(build_pair_batch(ds, 64, 1, Granularity::page).diagram_ids[0].find("_p") != std::string::npos);
}

TEST_CASE("manual batches store each manual once") {
  const SynthData data = small_synth();
  const Dataset& ds = data.dataset;
  const ManualBatch batch = build_manual_batch(ds, 128, 3);
  CHECK(batch.size() == 128);
  std::size_t attached = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto h = ds.find_segment(batch.clip_ids[i]);
    const Manual& m = ds.manual_of(ds.videos[h->video]);
    CHECK(batch.manuals[batch.clip_slot[i]] == ds.manual_index(m.manual_id));
    CHECK(batch.manual_length(i) == static_cast<int>(m.steps.size()));
    CHECK(batch.gt_index[i] >= 1);
    CHECK(batch.gt_index[i] <= batch.manual_length(i));
    attached += static_cast<std::size_t>(batch.manual_length(i));
  }
  std::size_t sum_m = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) sum_m += batch.diagram_ids[batch.clip_slot[i]].size();
  CHECK(sum_m == attached);
  std::set<std::size_t> distinct(batch.manuals.begin(), batch.manuals.end());
  CHECK(distinct.size() == batch.manuals.size());
}

TEST_CASE("two clips of one manual share its diagram list") {
  Dataset ds;
  Manual m;
  m.manual_id = "m";
  for (int j = 1; j <= 5; ++j) m.steps.push_back({"d" + std::to_string(j), "m", j, Granularity::step});
  ds.manuals.push_back(m);
  VideoRecord v;
  v.video_id = "v";
  v.manual_id = "m";
  v.duration = 20;
  v.segments = {{"a", 0, 10, 2, std::nullopt}, {"b", 10, 20, 4, std::nullopt}};
  ds.videos.push_back(v);
  ds.splits[Split::train] = {"v"};
  ds.build();
  const std::vector<SegmentHandle> pool = {{0, 0}, {0, 1}};
  const ManualBatch batch = build_manual_batch(ds, pool, 2, 5, Granularity::step);
  CHECK(batch.manuals.size() == 1);
  CHECK(batch.diagram_ids[0].size() == 5);
  CHECK(batch.clip_slot == std::vector<std::size_t>{0, 0});
}

TEST_CASE("unlabeled segments stay out of batches") {
  Dataset ds = testutil::tiny_dataset();
  ds.videos[0].segments[1].gt_step_index.reset();
  ds.build();
  CHECK(labeled_segments(ds, Split::train, Granularity::step).size() == 1);
  CHECK(labeled_segments(ds, Split::train, Granularity::page).size() == 2);
  const PairBatch b = build_pair_batch(ds, 20, 1);
  for (const auto& id : b.clip_ids) CHECK(id == "v_0");
  CHECK_THROWS_AS(build_pair_batch(ds, 4, 1, Granularity::step, Split::test), Error);
}
