#pragma once

#include "stepalign/losses.hpp"
#include "stepalign/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace stepalign {

/// Cosine similarities between N video features and M diagram features (rows of the inputs).
template <typename DA, typename DB>
Matrix<typename DA::Scalar> similarity_matrix(const Eigen::MatrixBase<DA>& video, const Eigen::MatrixBase<DB>& diagrams) {
  using Scalar = typename DA::Scalar;
  if (video.cols() != diagrams.cols()) fail("similarity_matrix: feature dimensions differ");
  const Vector<Scalar> nv = video.rowwise().norm(), nd = diagrams.rowwise().norm();
  if (video.rows() == 0 || diagrams.rows() == 0) fail("similarity_matrix: empty feature set");
  if (!(nv.minCoeff() > 0) || !(nd.minCoeff() > 0)) fail("similarity_matrix: zero feature vector");
  Matrix<Scalar> S = nv.cwiseInverse().asDiagonal() * (video * diagrams.transpose()) * nd.cwiseInverse().asDiagonal();
  return S.cwiseMax(Scalar(-1)).cwiseMin(Scalar(1));
}

template <typename Scalar>
struct CostMatrix {
  Matrix<Scalar> C;
  bool degenerate = false;  // constant similarity matrix; C is all 0.5
};

/// Signed power sign(s)|s|^alpha: equals s^alpha for odd integer alpha and is monotone for every alpha >= 1.
template <typename Scalar>
Scalar signed_pow(Scalar s, double alpha) {
  const Scalar mag = std::pow(std::abs(s), static_cast<Scalar>(alpha));
  return s < Scalar(0) ? -mag : mag;
}

/// C_ij = (s_ij^a - min^a) / (max^a - min^a), in [0, 1]. Larger similarity gives larger C.
template <typename Scalar>
CostMatrix<Scalar> cost_matrix(const Matrix<Scalar>& S, double alpha) {
  if (!(alpha >= 1.0)) fail("cost_matrix: alpha must be >= 1");
  if (S.size() == 0 || !S.allFinite()) fail("cost_matrix: similarity matrix must be non-empty and finite");
  CostMatrix<Scalar> out;
  const Matrix<Scalar> P = S.unaryExpr([alpha](Scalar s) { return signed_pow(s, alpha); });
  const Scalar lo = P.minCoeff(), hi = P.maxCoeff();
  if (!(hi > lo)) {
    out.C = Matrix<Scalar>::Constant(S.rows(), S.cols(), Scalar(0.5));
    out.degenerate = true;
    return out;
  }
  out.C = (P.array() - lo) / (hi - lo);
  return out;
}

/// Which way the transport objective treats C. `similarity` maximizes sum T*C + eps*H(T) (kernel exp(C/eps)),
/// putting mass on high-similarity pairs. `literal_cost` minimizes sum T*C - eps*H(T) (kernel exp(-C/eps)).
enum class TransportSense { similarity, literal_cost };

struct SinkhornOptions {
  double epsilon = 4.0;
  double tol = 1e-9;
  int max_iter = 10000;
  TransportSense sense = TransportSense::similarity;
};

template <typename Scalar>
struct TransportPlan {
  Matrix<Scalar> T;
  int iterations = 0;
  bool converged = false;
  double marginal_error = 0.0;  // L-inf violation of row and column marginals
};

/// Marginal violation of a plan against uniform marginals 1/N (rows) and 1/M (columns).
template <typename Scalar>
double marginal_violation(const Matrix<Scalar>& T) {
  const double a = 1.0 / static_cast<double>(T.rows()), b = 1.0 / static_cast<double>(T.cols());
  const double row = (T.rowwise().sum().array().template cast<double>() - a).abs().maxCoeff();
  const double col = (T.colwise().sum().array().template cast<double>() - b).abs().maxCoeff();
  return std::max(row, col);
}

/// Shannon entropy -sum T log T (0 log 0 = 0).
template <typename Scalar>
double plan_entropy(const Matrix<Scalar>& T) {
  double h = 0.0;
  for (Index k = 0; k < T.size(); ++k) {
    const double t = static_cast<double>(T.data()[k]);
    if (t > 0.0) h -= t * std::log(t);
  }
  return h;
}

/// Entropy-regularized optimal transport with uniform marginals, solved by log-domain Sinkhorn-Knopp
/// iterations. Stops once both marginals are within `tol`; otherwise returns the last iterate with
/// converged = false.
template <typename Scalar>
TransportPlan<Scalar> sinkhorn(const Matrix<Scalar>& C, const SinkhornOptions& opt = {}) {
  if (!(opt.epsilon > 0.0)) fail("sinkhorn: epsilon must be positive");
  if (C.size() == 0 || !C.allFinite()) fail("sinkhorn: cost matrix must be non-empty and finite");
  const Index N = C.rows(), M = C.cols();
  const double sign = opt.sense == TransportSense::similarity ? 1.0 : -1.0;
  const MatrixXd logK = C.template cast<double>() * (sign / opt.epsilon);
  const double log_a = -std::log(static_cast<double>(N)), log_b = -std::log(static_cast<double>(M));
  VectorXd f = VectorXd::Zero(N), g = VectorXd::Zero(M);

  auto plan = [&]() {
    MatrixXd T(N, M);
    for (Index j = 0; j < M; ++j)
      for (Index i = 0; i < N; ++i) T(i, j) = std::exp(logK(i, j) + f[i] + g[j]);
    return T;
  };

  TransportPlan<Scalar> out;
  VectorXd buf;
  for (int it = 1; it <= opt.max_iter; ++it) {
    for (Index i = 0; i < N; ++i) {
      buf = logK.row(i).transpose() + g;
      f[i] = log_a - log_sum_exp<double>(buf);
    }
    for (Index j = 0; j < M; ++j) {
      buf = logK.col(j) + f;
      g[j] = log_b - log_sum_exp<double>(buf);
    }
    out.iterations = it;
    const MatrixXd T = plan();
    out.marginal_error = marginal_violation<double>(T);
    if (out.marginal_error <= opt.tol) {
      out.converged = true;
      out.T = T.template cast<Scalar>();
      return out;
    }
  }
  out.T = plan().template cast<Scalar>();
  return out;
}

struct AlignmentPath {
  std::vector<std::pair<Index, Index>> cells;  // 0-based (i, j), from (0, 0) to (N-1, M-1)
  double score = 0.0;                          // sum of S along the path, accumulated in path order
};

/// Monotone path maximizing the summed similarity, moves (+1,0), (0,+1), (+1,+1). Backtracking prefers a
/// diagonal predecessor, then (i-1, j), then (i, j-1) among equally good ones.
template <typename Scalar>
AlignmentPath dtw_align(const Matrix<Scalar>& S) {
  const Index N = S.rows(), M = S.cols();
  if (N < 1 || M < 1) fail("dtw_align: empty similarity matrix");
  const double neg = -std::numeric_limits<double>::infinity();
  MatrixXd D = MatrixXd::Constant(N, M, neg);
  for (Index i = 0; i < N; ++i)
    for (Index j = 0; j < M; ++j) {
      double best = (i == 0 && j == 0) ? 0.0 : neg;
      if (i > 0 && j > 0) best = std::max(best, D(i - 1, j - 1));
      if (i > 0) best = std::max(best, D(i - 1, j));
      if (j > 0) best = std::max(best, D(i, j - 1));
      D(i, j) = best + static_cast<double>(S(i, j));
    }
  AlignmentPath path;
  path.score = D(N - 1, M - 1);
  Index i = N - 1, j = M - 1;
  path.cells.emplace_back(i, j);
  while (i > 0 || j > 0) {
    // Recompute the maximum the forward pass used; comparisons against it are exact.
    const double diag = (i > 0 && j > 0) ? D(i - 1, j - 1) : neg;
    const double up = i > 0 ? D(i - 1, j) : neg;
    const double left = j > 0 ? D(i, j - 1) : neg;
    const double best = std::max({diag, up, left});
    if (i > 0 && j > 0 && diag == best) {
      --i;
      --j;
    } else if (i > 0 && up == best) {
      --i;
    } else {
      --j;
    }
    path.cells.emplace_back(i, j);
  }
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

/// Per-row argmax of a transport plan (or any score matrix), 1-based, ties to the smaller column.
template <typename Scalar>
std::vector<int> plan_to_assignment(const Matrix<Scalar>& T) {
  std::vector<int> out(static_cast<std::size_t>(T.rows()));
  for (Index i = 0; i < T.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < T.cols(); ++j)
      if (T(i, j) > T(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best) + 1;
  }
  return out;
}

/// For each row, the last column the path pairs it with, 1-based.
inline std::vector<int> path_to_assignment(const AlignmentPath& path, Index rows) {
  std::vector<int> out(static_cast<std::size_t>(rows), 0);
  for (const auto& [i, j] : path.cells) out[static_cast<std::size_t>(i)] = static_cast<int>(j) + 1;
  return out;
}

}  // namespace stepalign
