#pragma once

#include "stepalign/config.hpp"
#include "stepalign/objective.hpp"
#include "stepalign/pipeline.hpp"

#include <iosfwd>
#include <map>
#include <vector>

namespace stepalign {

/// Freshly initialized heads (hidden width defaulting to each head's input width) and loss scalars.
Model<double> init_model(Index video_in, Index diagram_in, const TrainConfig& cfg);

/// One optimizer step's worth of inputs: per granularity in use, a pair batch and/or a manual batch drawn
/// from the given pools of labeled training segments.
std::vector<ObjectiveBatch<double>> sample_objective_batches(const FeatureBuilder& features,
                                                             const std::map<Granularity, std::vector<SegmentHandle>>& pools,
                                                             const TrainConfig& cfg, std::uint64_t seed);

struct EpochLog {
  int epoch = 0;  // 0 is the untrained model
  std::map<LossTerm, double> losses;  // mean over the epoch's steps
  double total = 0.0;
  double val_top1 = 0.0;
};

struct TrainResult {
  Model<double> best;
  int best_epoch = 0;
  double best_val_top1 = 0.0;
  std::vector<EpochLog> log;
};

/// AdamW training. Every epoch draws ceil(n / batch_size) batches, n the number of labeled training
/// segments, then scores the validation split (raw similarity, earliest clip window); the model with the
/// highest validation top-1 is kept, earliest epoch on ties.
TrainResult train(const FeatureBuilder& features, const TrainConfig& cfg, std::ostream* progress = nullptr);

/// CSV with columns epoch, one per loss term, total, val_top1.
std::string training_log_csv(const TrainResult& r, const TrainConfig& cfg);

}  // namespace stepalign
