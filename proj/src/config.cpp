#include "stepalign/config.hpp"

#include <sstream>

namespace stepalign {

void TrainConfig::validate() const {
  if (losses.empty()) fail("config: no loss terms");
  if (batch_size < 1) fail("config: batch_size must be positive");
  if (epochs < 0) fail("config: epochs must be non-negative");
  if (!(optim.lr > 0.0)) fail("config: lr must be positive");
  if (!(optim.weight_decay >= 0.0)) fail("config: weight_decay must be non-negative");
  if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0 && optim.beta2 >= 0.0 && optim.beta2 < 1.0))
    fail("config: betas must lie in [0, 1)");
  if (hidden < 0) fail("config: hidden must be non-negative");
  if (out_dim < 1) fail("config: out_dim must be positive");
  if (!(init_tau > 0.0) || !(init_theta > 0.0)) fail("config: initial tau and theta must be positive");
}

void AlignConfig::validate() const {
  if (method != "raw" && method != "ot" && method != "dtw") fail("unknown method '" + method + "' (raw, ot, dtw)");
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
  if (!(alpha >= 1.0)) fail("alpha must be >= 1");
  if (!(tol > 0.0) || max_iter < 1) fail("invalid Sinkhorn stopping rule");
}

std::string describe(const TrainConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "losses=" << format_loss_terms(c.losses) << "\n"
      << "batch_size=" << c.batch_size << "\n"
      << "epochs=" << c.epochs << "\n"
      << "lr=" << c.optim.lr << "\n"
      << "weight_decay=" << c.optim.weight_decay << "\n"
      << "beta1=" << c.optim.beta1 << "\n"
      << "beta2=" << c.optim.beta2 << "\n"
      << "eps=" << c.optim.eps << "\n"
      << "seed=" << c.seed << "\n"
      << "hidden=" << c.hidden << "\n"
      << "out_dim=" << c.out_dim << "\n"
      << "use_sprf=" << (c.use_sprf ? "true" : "false") << "\n"
      << "selection=" << to_string(c.selection) << "\n"
      << "init_tau=" << c.init_tau << "\n"
      << "init_theta=" << c.init_theta << "\n";
  return out.str();
}

std::string describe(const AlignConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "method=" << c.method << "\n"
      << "epsilon=" << c.epsilon << "\n"
      << "alpha=" << c.alpha << "\n"
      << "literal_cost=" << (c.literal_cost ? "true" : "false") << "\n"
      << "tol=" << c.tol << "\n"
      << "max_iter=" << c.max_iter << "\n";
  return out.str();
}

}  // namespace stepalign
