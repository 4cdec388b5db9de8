#pragma once

#include "stepalign/dataset.hpp"
#include "stepalign/embedding_table.hpp"
#include "stepalign/split.hpp"

#include <cstdint>
#include <string>

namespace stepalign {

/// Knobs of the synthetic dataset. Diagram prototypes of a manual follow a random walk on the unit sphere
/// in which consecutive steps have cosine similarity exactly `drift`; clip embeddings are the ground-truth
/// prototype plus isotropic Gaussian noise of expected norm `sigma`, renormalized.
struct SynthConfig {
  int manuals = 20;
  int min_steps = 4;
  int max_steps = 12;
  int min_segments_per_step = 1;
  int max_segments_per_step = 3;
  int videos_per_manual = 4;
  int dim = 32;
  double sigma = 0.8;
  double drift = 0.7;
  int clips_per_segment = 0;  // 0: one row per segment; otherwise rows "<segment>@<frame>" for test windows
  SplitRatios ratios{0.6, 0.2, 0.2};
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthData {
  Dataset dataset;
  EmbeddingTable diagrams;  // steps and pages
  EmbeddingTable clips;
};

SynthData generate_synthetic(const SynthConfig& cfg);

/// Writes manifest.json, diagrams.emb and clips.emb into `dir`.
void write_synthetic(const SynthData& data, const std::string& dir);

/// Parses "4..12" or "7" into an inclusive range.
std::pair<int, int> parse_int_range(const std::string& text);

}  // namespace stepalign
