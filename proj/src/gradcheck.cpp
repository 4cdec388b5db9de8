#include "stepalign/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace stepalign {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradcheckResult check_gradient(const std::string& label, const std::function<double(const VectorXd&)>& f,
                               const VectorXd& x, const VectorXd& analytic, const std::vector<std::string>& names,
                               const GradcheckOptions& opt) {
  if (analytic.size() != x.size()) fail("gradcheck: gradient and parameter sizes differ");
  GradcheckResult r;
  r.label = label;
  VectorXd numeric(x.size());
  VectorXd probe = x;
  for (Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + opt.h;
    const double up = f(probe);
    probe[k] = x[k] - opt.h;
    const double down = f(probe);
    probe[k] = x[k];
    numeric[k] = (up - down) / (2.0 * opt.h);
  }
  r.checked = static_cast<std::size_t>(x.size());

  // Group coordinates into tensors by name ("video.W1[2,3]" -> "video.W1"); scalars stand alone.
  std::map<std::string, std::vector<Index>> tensors;
  std::vector<std::string> order;
  for (Index k = 0; k < x.size(); ++k) {
    std::string name = static_cast<std::size_t>(k) < names.size() ? names[static_cast<std::size_t>(k)] : "param";
    name = name.substr(0, name.find('['));
    if (!tensors.count(name)) order.push_back(name);
    tensors[name].push_back(k);
  }
  for (const std::string& name : order) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (Index k : tensors[name]) {
      diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
      na += analytic[k] * analytic[k];
      nn += numeric[k] * numeric[k];
    }
    double err = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), opt.floor});
    if (std::isnan(err)) err = INFINITY;
    if (r.worst.empty() || err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst = name;
    }
  }
  for (Index k = 0; k < x.size(); ++k) {
    const double e = relative_error(analytic[k], numeric[k], opt.floor);
    if (!(e <= r.coordinate_max_rel_error)) {
      r.coordinate_max_rel_error = std::isnan(e) ? INFINITY : e;
      r.worst_coordinate = static_cast<std::size_t>(k) < names.size() ? names[static_cast<std::size_t>(k)] : std::to_string(k);
      r.worst_analytic = analytic[k];
      r.worst_numeric = numeric[k];
    }
  }
  r.passed = r.max_rel_error <= opt.tol;
  return r;
}

namespace {

bool clear_of_kinks(const ProjectionHead<double>& head, const MatrixXd& X) {
  const MatrixXd pre = (X * head.W1.transpose()).rowwise() + head.b1.transpose();
  return pre.cwiseAbs().minCoeff() > 1e-3;
}

MatrixXd random_inputs(std::mt19937_64& rng, Index rows, Index raw_dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd X(rows, raw_dim + 2);
  for (Index i = 0; i < rows; ++i) {
    VectorXd raw(raw_dim);
    for (Index k = 0; k < raw_dim; ++k) raw[k] = n(rng);
    X.row(i) = augment(raw, u(rng)).transpose();
  }
  return X;
}

}  // namespace

GradcheckInstance random_gradcheck_instance(std::mt19937_64& rng) {
  auto uniform_int = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::uniform_real_distribution<double> u(0.0, 1.0);

  const Index B = uniform_int(2, 8);
  const Index raw_v = uniform_int(2, 16), raw_i = uniform_int(2, 16);
  const Index out = uniform_int(2, 8);
  const int n_manuals = uniform_int(1, 3);

  GradcheckInstance inst;
  ObjectiveBatch<double>& batch = inst.batch;
  batch.pair_losses = {LossKind::info_nce, LossKind::cosine, LossKind::video_diagram};
  batch.manual_losses = {LossKind::video_manual, LossKind::intra_manual};

  std::vector<Index> offsets, lengths;
  Index K = 0;
  for (int m = 0; m < n_manuals; ++m) {
    offsets.push_back(K);
    lengths.push_back(uniform_int(1, 5));
    K += lengths.back();
  }
  batch.manual.video = random_inputs(rng, B, raw_v);
  batch.manual.diagram = random_inputs(rng, K, raw_i);
  for (Index b = 0; b < B; ++b) {
    const auto m = static_cast<std::size_t>(uniform_int(0, n_manuals - 1));
    batch.manual.spans.push_back({offsets[m], lengths[m], uniform_int(0, static_cast<int>(lengths[m]) - 1)});
  }

  // Pair batch: clips drawn over a few distinct diagrams so that some share a positive.
  const int distinct = uniform_int(1, static_cast<int>(B));
  const MatrixXd pool = random_inputs(rng, distinct, raw_i);
  std::vector<int> which(static_cast<std::size_t>(B));
  for (auto& w : which) w = uniform_int(0, distinct - 1);
  batch.pair.video = random_inputs(rng, B, raw_v);
  batch.pair.diagram.resize(B, pool.cols());
  batch.pair.positive.resize(B, B);
  for (Index a = 0; a < B; ++a) {
    batch.pair.diagram.row(a) = pool.row(which[static_cast<std::size_t>(a)]);
    for (Index b = 0; b < B; ++b)
      batch.pair.positive(a, b) = which[static_cast<std::size_t>(a)] == which[static_cast<std::size_t>(b)];
  }

  Model<double>& m = inst.model;
  m.video = ProjectionHead<double>(raw_v + 2, raw_v + 2, out);
  m.diagram = ProjectionHead<double>(raw_i + 2, raw_i + 2, out);
  do m.video.init_uniform(rng);
  while (!clear_of_kinks(m.video, batch.manual.video) || !clear_of_kinks(m.video, batch.pair.video));
  do m.diagram.init_uniform(rng);
  while (!clear_of_kinks(m.diagram, batch.manual.diagram) || !clear_of_kinks(m.diagram, batch.pair.diagram));
  m.params.log_tau_A = std::log(0.05 + 0.45 * u(rng));
  m.params.log_tau_B = std::log(0.05 + 0.45 * u(rng));
  m.params.log_tau_C = std::log(0.05 + 0.45 * u(rng));
  m.params.log_theta = -1.0 + 2.0 * u(rng);
  return inst;
}

std::vector<GradcheckResult> check_instance(const GradcheckInstance& inst, const GradcheckOptions& opt, bool corrupt) {
  const std::vector<std::string> names = parameter_names(inst.model);
  const VectorXd x = flatten(inst.model);
  std::vector<GradcheckResult> out;

  auto run = [&](const std::string& label, const ObjectiveBatch<double>& batch) {
    const std::vector<ObjectiveBatch<double>> batches{batch};
    VectorXd analytic = flatten(evaluate_objective(inst.model, batches, true).grad);
    if (corrupt && analytic.size() > 0) {
      Index k = 0;
      analytic.cwiseAbs().maxCoeff(&k);
      analytic[k] += 1e-2 * (1.0 + std::abs(analytic[k]));
    }
    auto f = [&](const VectorXd& p) {
      Model<double> m = inst.model;
      unflatten(p, m);
      return evaluate_objective(m, batches, false).total;
    };
    out.push_back(check_gradient(label, f, x, analytic, names, opt));
  };

  for (LossKind k : inst.batch.pair_losses) {
    ObjectiveBatch<double> b = inst.batch;
    b.pair_losses = {k};
    b.manual_losses.clear();
    run(to_string(k), b);
  }
  for (LossKind k : inst.batch.manual_losses) {
    ObjectiveBatch<double> b = inst.batch;
    b.manual_losses = {k};
    b.pair_losses.clear();
    run(to_string(k), b);
  }
  run("total", inst.batch);
  return out;
}

GradcheckSummary run_gradcheck(std::uint64_t seed, int instances, const GradcheckOptions& opt, bool corrupt) {
  std::mt19937_64 rng(seed);
  GradcheckSummary s;
  for (int i = 0; i < instances; ++i) {
    const auto inst = random_gradcheck_instance(rng);
    for (auto& r : check_instance(inst, opt, corrupt)) {
      r.label = "instance " + std::to_string(i) + " " + r.label;
      s.max_rel_error = std::max(s.max_rel_error, r.max_rel_error);
      s.passed = s.passed && r.passed;
      s.results.push_back(std::move(r));
    }
  }
  return s;
}

}  // namespace stepalign
