#pragma once

// Independent reference implementations used by the unit tests and the acceptance gate.

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace oracle {

using Cells = std::vector<std::pair<Eigen::Index, Eigen::Index>>;

struct BrutePath {
  double score = 0.0;
  Cells cells;
};

/// Enumerates every monotone path from (0,0) to (N-1,M-1) with moves (+1,0), (0,+1), (+1,+1). Among the
/// best-scoring paths it keeps the one whose moves, read backwards from the end, are lexicographically
/// smallest under diagonal < vertical < horizontal.
inline BrutePath dtw(const Eigen::MatrixXd& S) {
  const Eigen::Index N = S.rows(), M = S.cols();
  BrutePath best;
  bool have = false;
  std::vector<int> best_moves;
  Cells cells{{0, 0}};
  std::vector<int> moves;  // 0 diagonal, 1 vertical, 2 horizontal, forward order

  std::function<void(Eigen::Index, Eigen::Index, double)> walk = [&](Eigen::Index i, Eigen::Index j, double score) {
    if (i == N - 1 && j == M - 1) {
      std::vector<int> rev(moves.rbegin(), moves.rend());
      if (!have || score > best.score || (score == best.score && rev < best_moves)) {
        have = true;
        best.score = score;
        best.cells = cells;
        best_moves = rev;
      }
      return;
    }
    const int di[] = {1, 1, 0}, dj[] = {1, 0, 1};
    for (int m = 0; m < 3; ++m) {
      const Eigen::Index ni = i + di[m], nj = j + dj[m];
      if (ni >= N || nj >= M) continue;
      cells.emplace_back(ni, nj);
      moves.push_back(m);
      walk(ni, nj, score + S(ni, nj));
      moves.pop_back();
      cells.pop_back();
    }
  };
  walk(0, 0, S(0, 0));
  return best;
}

/// Plain multiplicative Sinkhorn scaling u = a / (K v), v = b / (K^T u) with K = exp(sign * C / eps),
/// iterated until the scalings stop changing.
inline Eigen::MatrixXd sinkhorn_scaling(const Eigen::MatrixXd& C, double eps, double sign = 1.0, double tol = 1e-14,
                                        int max_iter = 1000000) {
  const Eigen::Index N = C.rows(), M = C.cols();
  Eigen::MatrixXd K(N, M);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < M; ++j) K(i, j) = std::exp(sign * C(i, j) / eps);
  std::vector<double> u(static_cast<std::size_t>(N), 1.0), v(static_cast<std::size_t>(M), 1.0);
  for (int it = 0; it < max_iter; ++it) {
    double change = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < M; ++j) s += K(i, j) * v[static_cast<std::size_t>(j)];
      const double nu = (1.0 / static_cast<double>(N)) / s;
      change = std::max(change, std::abs(nu - u[static_cast<std::size_t>(i)]) / nu);
      u[static_cast<std::size_t>(i)] = nu;
    }
    for (Eigen::Index j = 0; j < M; ++j) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < N; ++i) s += K(i, j) * u[static_cast<std::size_t>(i)];
      const double nv = (1.0 / static_cast<double>(M)) / s;
      change = std::max(change, std::abs(nv - v[static_cast<std::size_t>(j)]) / nv);
      v[static_cast<std::size_t>(j)] = nv;
    }
    if (change < tol) break;
  }
  Eigen::MatrixXd T(N, M);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < M; ++j) T(i, j) = u[static_cast<std::size_t>(i)] * K(i, j) * v[static_cast<std::size_t>(j)];
  return T;
}

}  // namespace oracle
