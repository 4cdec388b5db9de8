#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

#include "stepalign/set_matching.hpp"

#include <cmath>

using namespace stepalign;

TEST_CASE("similarity matrix") {
  std::mt19937_64 rng(1);
  SUBCASE("identical sets have a unit diagonal") {
    const MatrixXd F = testutil::random_matrix(rng, 4, 6);
    const MatrixXd S = similarity_matrix(F, F);
    CHECK((S.diagonal().array() - 1.0).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("orthonormal rows") {
    const MatrixXd S = similarity_matrix(MatrixXd::Identity(3, 5), MatrixXd::Identity(3, 5));
    CHECK(S.isIdentity(0.0));
  }
  SUBCASE("random 3 x 4 against pairwise dots") {
    const MatrixXd V = testutil::random_matrix(rng, 3, 5), D = testutil::random_matrix(rng, 4, 5);
    const MatrixXd S = similarity_matrix(V, D);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 4; ++j) {
        double dot = 0, nv = 0, nd = 0;
        for (Index k = 0; k < 5; ++k) {
          dot += V(i, k) * D(j, k);
          nv += V(i, k) * V(i, k);
          nd += D(j, k) * D(j, k);
        }
        CHECK(std::abs(S(i, j) - dot / std::sqrt(nv * nd)) < 1e-14);
      }
  }
  CHECK_THROWS_AS(similarity_matrix(MatrixXd::Zero(1, 2), MatrixXd::Ones(1, 2)), Error);
}

TEST_CASE("cost matrix") {
  MatrixXd S(2, 2);
  S << 0.9, 0.1, 0.2, 0.8;
  SUBCASE("alpha 7 against the formula") {
    const auto c = cost_matrix<double>(S, 7.0);
    const double lo = std::pow(0.1, 7), hi = std::pow(0.9, 7);
    CHECK(std::abs(c.C(0, 0) - 1.0) < 1e-12);
    CHECK(std::abs(c.C(0, 1) - 0.0) < 1e-12);
    CHECK(std::abs(c.C(1, 0) - (std::pow(0.2, 7) - lo) / (hi - lo)) < 1e-12);
    CHECK(std::abs(c.C(1, 1) - (std::pow(0.8, 7) - lo) / (hi - lo)) < 1e-12);
    CHECK(!c.degenerate);
  }
  SUBCASE("alpha 1 is an affine rescaling") {
    const auto c = cost_matrix<double>(S, 1.0);
    CHECK(c.C.isApprox(((S.array() - 0.1) / 0.8).matrix(), 1e-14));
  }
  SUBCASE("negative similarities keep their sign") {
    MatrixXd N(1, 3);
    N << -0.5, 0.0, 0.5;
    const auto c = cost_matrix<double>(N, 7.0);
    CHECK(c.C(0, 1) == doctest::Approx(0.5));
  }
  SUBCASE("constant matrix is degenerate") {
    const auto c = cost_matrix<double>(MatrixXd::Constant(2, 3, 0.4), 7.0);
    CHECK(c.degenerate);
    CHECK((c.C.array() == 0.5).all());
  }
  SUBCASE("monotone with endpoints 0 and 1") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 30; ++t) {
      const MatrixXd R = testutil::random_matrix(rng, 4, 5);
      for (double alpha : {1.0, 3.0, 7.0, 2.5}) {
        const auto c = cost_matrix<double>(R, alpha);
        CHECK(c.C.minCoeff() == 0.0);
        CHECK(c.C.maxCoeff() == 1.0);
        for (Index a = 0; a < R.size(); ++a)
          for (Index b = 0; b < R.size(); ++b)
            if (R.data()[a] <= R.data()[b]) CHECK(c.C.data()[a] <= c.C.data()[b]);
      }
    }
  }
  CHECK_THROWS_AS(cost_matrix<double>(S, 0.5), Error);
}

TEST_CASE("sinkhorn") {
  SUBCASE("1 x 1") {
    const auto p = sinkhorn<double>(MatrixXd::Constant(1, 1, 0.3));
    CHECK(p.converged);
    CHECK(p.T(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("constant 2 x 2") {
    const auto p = sinkhorn<double>(MatrixXd::Constant(2, 2, 0.7));
    CHECK((p.T.array() - 0.25).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("2 x 2 identity cost at eps 0.1 against the scaling oracle") {
    SinkhornOptions opt;
    opt.epsilon = 0.1;
    opt.tol = 1e-14;
    const auto p = sinkhorn<double>(MatrixXd::Identity(2, 2), opt);
    const MatrixXd ref = oracle::sinkhorn_scaling(MatrixXd::Identity(2, 2), 0.1);
    CHECK((p.T - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(p.T(0, 0) > 0.49);
    opt.sense = TransportSense::literal_cost;
    const auto q = sinkhorn<double>(MatrixXd::Identity(2, 2), opt);
    CHECK((q.T - oracle::sinkhorn_scaling(MatrixXd::Identity(2, 2), 0.1, -1.0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(q.T(0, 1) > 0.49);
  }
  SUBCASE("marginals and entry bounds") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 20; ++t) {
      const Index N = 1 + static_cast<Index>(rng() % 12), M = 1 + static_cast<Index>(rng() % 12);
      const MatrixXd C = testutil::random_matrix(rng, N, M, 0.0, 1.0);
      const auto p = sinkhorn<double>(C, {0.2, 1e-10, 10000});
      CHECK(p.converged);
      CHECK(marginal_violation<double>(p.T) <= 1e-10);
      CHECK(p.T.minCoeff() >= 0.0);
      CHECK(p.T.maxCoeff() <= std::min(1.0 / N, 1.0 / M) + 1e-12);
    }
  }
  SUBCASE("large epsilon tends to uniform") {
    std::mt19937_64 rng(7);
    const MatrixXd C = testutil::random_matrix(rng, 5, 4, 0.0, 1.0);
    const auto p = sinkhorn<double>(C, {1e4});
    CHECK((p.T.array() - 1.0 / 20).abs().maxCoeff() < 1e-5);
    CHECK(plan_entropy<double>(p.T) == doctest::Approx(std::log(20.0)).epsilon(1e-6));
  }
  SUBCASE("small epsilon recovers a dominant permutation") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 10; ++t) {
      std::vector<int> perm = {0, 1, 2, 3};
      std::shuffle(perm.begin(), perm.end(), rng);
      MatrixXd C = testutil::random_matrix(rng, 4, 4, 0.0, 0.3);
      for (int i = 0; i < 4; ++i) C(i, perm[static_cast<std::size_t>(i)]) = 1.0;
      const auto p = sinkhorn<double>(C, {0.02, 1e-9, 100000});
      const auto a = plan_to_assignment<double>(p.T);
      for (int i = 0; i < 4; ++i) CHECK(a[static_cast<std::size_t>(i)] == perm[static_cast<std::size_t>(i)] + 1);
    }
  }
  SUBCASE("iteration cap flags non-convergence") {
    std::mt19937_64 rng(9);
    const auto p = sinkhorn<double>(testutil::random_matrix(rng, 6, 5, 0.0, 1.0), {0.01, 1e-12, 2});
    CHECK(!p.converged);
    CHECK(p.iterations == 2);
  }
  CHECK_THROWS_AS(sinkhorn<double>(MatrixXd::Ones(2, 2), {0.0}), Error);
}

TEST_CASE("dtw") {
  SUBCASE("identity-like matrix gives the diagonal") {
    const auto p = dtw_align<double>(MatrixXd::Identity(4, 4));
    for (Index k = 0; k < 4; ++k) CHECK(p.cells[static_cast<std::size_t>(k)] == std::pair<Index, Index>(k, k));
    CHECK(p.score == 4.0);
  }
  SUBCASE("one row visits every column") {
    const auto p = dtw_align<double>(MatrixXd::Constant(1, 5, -0.3));
    CHECK(p.cells.size() == 5);
    CHECK(path_to_assignment(p, 1) == std::vector<int>{5});
  }
  SUBCASE("tie rule prefers the diagonal, then the vertical move") {
    const auto p = dtw_align<double>(MatrixXd::Zero(3, 2));
    const oracle::Cells expected = {{0, 0}, {1, 0}, {2, 1}};
    CHECK(p.cells == expected);
    CHECK(oracle::dtw(MatrixXd::Zero(3, 2)).cells == expected);
  }
  SUBCASE("random 4 x 3 against brute force") {
    std::mt19937_64 rng(10);
    for (int t = 0; t < 50; ++t) {
      const MatrixXd S = testutil::random_matrix(rng, 4, 3);
      const auto p = dtw_align<double>(S);
      const auto ref = oracle::dtw(S);
      CHECK(p.score == ref.score);
      CHECK(p.cells == ref.cells);
      std::vector<int> expect(4, 0);
      for (const auto& [i, j] : ref.cells) expect[static_cast<std::size_t>(i)] = static_cast<int>(j) + 1;
      CHECK(path_to_assignment(p, 4) == expect);
    }
  }
  SUBCASE("path shape and monotone assignment") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 100; ++t) {
      const Index N = 1 + static_cast<Index>(rng() % 9), M = 1 + static_cast<Index>(rng() % 9);
      const auto p = dtw_align<double>(testutil::random_matrix(rng, N, M));
      CHECK(p.cells.size() >= static_cast<std::size_t>(std::max(N, M)));
      CHECK(p.cells.size() <= static_cast<std::size_t>(N + M - 1));
      CHECK(p.cells.front() == std::pair<Index, Index>(0, 0));
      CHECK(p.cells.back() == std::pair<Index, Index>(N - 1, M - 1));
      for (std::size_t k = 1; k < p.cells.size(); ++k) {
        const Index di = p.cells[k].first - p.cells[k - 1].first, dj = p.cells[k].second - p.cells[k - 1].second;
        CHECK((di == 0 || di == 1));
        CHECK((dj == 0 || dj == 1));
        CHECK(di + dj >= 1);
      }
      const auto a = path_to_assignment(p, N);
      for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1] <= a[i]);
    }
  }
}

TEST_CASE("plan to assignment") {
  MatrixXd T(3, 3);
  T << 0.3, 0.02, 0.01, 0.01, 0.3, 0.02, 0.02, 0.01, 0.3;
  CHECK(plan_to_assignment<double>(T) == std::vector<int>{1, 2, 3});
  CHECK(plan_to_assignment<double>(MatrixXd::Constant(4, 3, 1.0 / 12)) == std::vector<int>{1, 1, 1, 1});
}
