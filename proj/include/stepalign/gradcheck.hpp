#pragma once

#include "stepalign/objective.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace stepalign {

struct GradcheckOptions {
  double h = 1e-4;
  double tol = 1e-4;
  double floor = 1e-6;  // denominator floor so gradients that are zero on both sides compare equal
};

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Errors are normwise per parameter tensor, |a - n| / max(|a|, |n|, floor) over the tensor's entries, with
/// every loss scalar as its own tensor. The largest single-coordinate error is reported alongside; it is
/// dominated by finite-difference truncation wherever a gradient entry is tiny next to the local curvature.
struct GradcheckResult {
  std::string label;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst;  // tensor with the largest error
  double coordinate_max_rel_error = 0.0;
  std::string worst_coordinate;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

/// Compares `analytic` against central differences of f around x. An empty parameter vector passes
/// vacuously.
GradcheckResult check_gradient(const std::string& label, const std::function<double(const VectorXd&)>& f,
                               const VectorXd& x, const VectorXd& analytic, const std::vector<std::string>& names,
                               const GradcheckOptions& opt = {});

struct GradcheckInstance {
  Model<double> model;
  ObjectiveBatch<double> batch;  // inputs for every loss kind
};

/// Small random problem: B <= 8 clips, raw width <= 16, output width <= 8, 1 to 3 manuals of 1 to 5 diagrams.
/// Heads are redrawn until no ReLU pre-activation lies within 1e-3 of its kink.
GradcheckInstance random_gradcheck_instance(std::mt19937_64& rng);

/// Checks each loss kind alone and their sum. With `corrupt`, one analytic component of every check is
/// perturbed first (negative control; the checks must then fail).
std::vector<GradcheckResult> check_instance(const GradcheckInstance& inst, const GradcheckOptions& opt = {},
                                            bool corrupt = false);

struct GradcheckSummary {
  std::vector<GradcheckResult> results;
  double max_rel_error = 0.0;
  bool passed = true;
};

GradcheckSummary run_gradcheck(std::uint64_t seed, int instances, const GradcheckOptions& opt = {}, bool corrupt = false);

}  // namespace stepalign
