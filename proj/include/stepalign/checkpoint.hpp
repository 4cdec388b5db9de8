#pragma once

#include "stepalign/objective.hpp"

#include <string>

namespace stepalign {

/// Trained state as stored on disk.
struct Checkpoint {
  Model<double> model;
  bool use_sprf = true;
};

/// Serializes a checkpoint as consecutive `.emb` tables: for each modality W1, b1, W2, b2 (one row per
/// matrix row, ids "<modality>.<param>:<row>"), then one dim-1 table of scalars (log_tau_A, log_tau_B,
/// log_tau_C, log_theta, use_sprf). Values are stored as float32.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// The model as it reads back from disk (parameters rounded to float32).
Model<double> rounded_to_storage(const Model<double>& m);

}  // namespace stepalign
