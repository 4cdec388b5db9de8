#pragma once

#include "stepalign/dataset.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace stepalign {

/// What the splitter needs to know about one video.
struct SplitItem {
  std::string video_id;
  std::size_t segments = 0;
  std::map<std::string, std::string> attributes;  // e.g. viewpoint, indoor, camera_motion, assemblers
};

using SplitRatios = std::array<double, 3>;  // train, val, test

struct SplitAssignment {
  std::map<std::string, Split> by_video;
  std::array<std::size_t, 3> segments{};
  std::array<std::size_t, 3> videos{};

  SplitLists lists() const;
};

/// Objective minimized greedily: L1 deviation of per-split segment counts from the target ratios plus, for
/// every (attribute, value), the L1 deviation of the segments carrying that value from the same ratios.
/// Both terms count segments and weigh equally, so a video's size never trades against its attributes.
double split_objective(const std::vector<SplitItem>& items, const std::vector<int>& assignment,
                       const SplitRatios& ratios);

/// Greedy attribute-balanced split: videos in descending segment count (equal counts in seeded random
/// order) each go to the split with the lowest resulting objective; ties prefer train, then val.
SplitAssignment split_dataset(const std::vector<SplitItem>& items, const SplitRatios& ratios, std::uint64_t seed);

std::vector<SplitItem> split_items(const Dataset& ds);

SplitRatios parse_ratios(const std::string& text);

}  // namespace stepalign
