#pragma once

#include "stepalign/objective.hpp"
#include "stepalign/optim.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace stepalign {

struct TrainConfig {
  std::vector<LossTerm> losses = {{LossKind::video_manual, Granularity::step}, {LossKind::intra_manual, Granularity::step}};
  std::size_t batch_size = 128;
  int epochs = 20;
  AdamWConfig optim;
  std::uint64_t seed = 1;
  int hidden = 0;     // 0: same as the augmented input width
  int out_dim = 1024;
  bool use_sprf = true;
  Granularity selection = Granularity::step;  // model selection by val top-1 at this granularity
  double init_tau = 0.07;
  double init_theta = 1.0;

  void validate() const;
};

/// Settings for whole-video alignment.
struct AlignConfig {
  std::string method = "raw";  // raw | ot | dtw
  double epsilon = 4.0;
  double alpha = 7.0;
  bool literal_cost = false;
  double tol = 1e-9;
  int max_iter = 10000;

  void validate() const;
};

std::string describe(const TrainConfig& cfg);  // one "key=value" per line
std::string describe(const AlignConfig& cfg);

}  // namespace stepalign
