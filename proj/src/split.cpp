#include "stepalign/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace stepalign {

SplitLists SplitAssignment::lists() const {
  SplitLists out;
  for (const auto& [video, split] : by_video) out[split].push_back(video);
  return out;
}

namespace {

// Segment-weighted histogram bookkeeping over (attribute, value) pairs, indexed densely.
class SplitState {
 public:
  SplitState(const std::vector<SplitItem>& items, const SplitRatios& ratios) : items_(items), ratios_(ratios) {
    for (const SplitItem& it : items) {
      total_segments_ += static_cast<double>(it.segments);
      std::vector<std::size_t> keys;
      for (const auto& [attr, value] : it.attributes) {
        auto [pos, inserted] = key_index_.emplace(attr + "\x1f" + value, key_total_.size());
        if (inserted) key_total_.push_back(0.0);
        key_total_[pos->second] += static_cast<double>(it.segments);
        keys.push_back(pos->second);
      }
      item_keys_.push_back(std::move(keys));
    }
    for (auto& row : key_count_) row.assign(key_total_.size(), 0.0);
  }

  void add(std::size_t item, int split, double sign) {
    seg_count_[static_cast<std::size_t>(split)] += sign * static_cast<double>(items_[item].segments);
    for (std::size_t key : item_keys_[item])
      key_count_[static_cast<std::size_t>(split)][key] += sign * static_cast<double>(items_[item].segments);
  }

  double objective() const {
    double seg_dev = 0.0;
    for (std::size_t s = 0; s < 3; ++s) seg_dev += std::abs(seg_count_[s] - ratios_[s] * total_segments_);
    double attr_dev = 0.0;
    for (std::size_t k = 0; k < key_total_.size(); ++k)
      for (std::size_t s = 0; s < 3; ++s) attr_dev += std::abs(key_count_[s][k] - ratios_[s] * key_total_[k]);
    if (total_segments_ == 0.0) return 0.0;
    return (seg_dev + attr_dev) / total_segments_;
  }

 private:
  const std::vector<SplitItem>& items_;
  SplitRatios ratios_;
  double total_segments_ = 0.0;
  std::map<std::string, std::size_t> key_index_;
  std::vector<double> key_total_;
  std::vector<std::vector<std::size_t>> item_keys_;
  std::array<double, 3> seg_count_{};
  std::array<std::vector<double>, 3> key_count_;
};

void check_ratios(const SplitRatios& ratios) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) fail("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-6) fail("split ratios must sum to 1");
}

}  // namespace

double split_objective(const std::vector<SplitItem>& items, const std::vector<int>& assignment,
                       const SplitRatios& ratios) {
  SplitState state(items, ratios);
  for (std::size_t i = 0; i < items.size(); ++i)
    if (assignment[i] >= 0) state.add(i, assignment[i], 1.0);
  return state.objective();
}

SplitAssignment split_dataset(const std::vector<SplitItem>& items, const SplitRatios& ratios, std::uint64_t seed) {
  check_ratios(ratios);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return items[a].segments > items[b].segments; });

  SplitState state(items, ratios);
  SplitAssignment out;
  for (std::size_t i : order) {
    int best = 0;
    double best_obj = 0.0;
    for (int s = 0; s < 3; ++s) {
      state.add(i, s, 1.0);
      const double obj = state.objective();
      state.add(i, s, -1.0);
      // Strict improvement required, so ties fall to the earlier split (train first).
      if (s == 0 || obj < best_obj - 1e-12) {
        best = s;
        best_obj = obj;
      }
    }
    state.add(i, best, 1.0);
    out.by_video[items[i].video_id] = static_cast<Split>(best);
    out.segments[static_cast<std::size_t>(best)] += items[i].segments;
    out.videos[static_cast<std::size_t>(best)] += 1;
  }
  return out;
}

std::vector<SplitItem> split_items(const Dataset& ds) {
  std::vector<SplitItem> items;
  for (const VideoRecord& v : ds.videos) items.push_back({v.video_id, v.segments.size(), v.attributes});
  return items;
}

SplitRatios parse_ratios(const std::string& text) {
  SplitRatios r{};
  std::stringstream in(text);
  std::string tok;
  std::size_t k = 0;
  while (std::getline(in, tok, ',')) {
    if (k >= 3) fail("expected three split ratios, got more: '" + text + "'");
    try {
      r[k++] = std::stod(tok);
    } catch (const std::exception&) {
      fail("bad split ratio '" + tok + "'");
    }
  }
  if (k != 3) fail("expected three split ratios: '" + text + "'");
  check_ratios(r);
  return r;
}

}  // namespace stepalign
