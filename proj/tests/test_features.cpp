#include "doctest.h"
#include "helpers.hpp"

#include "stepalign/features.hpp"

#include <cmath>
#include <numbers>

using namespace stepalign;

TEST_CASE("progress rates") {
  CHECK(progress_rate_video(2, 4, 10) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(progress_rate_video(0, 10, 10) == 0.5);
  CHECK(progress_rate_video(0, 0, 10) == 0.0);
  CHECK(progress_rate_diagram(1, 4) == 0.25);
  CHECK(progress_rate_diagram(7, 7) == 1.0);
  CHECK(progress_rate_diagram(2, 3) == doctest::Approx(0.6667).epsilon(1e-4));
  CHECK_THROWS_AS(progress_rate_video(5, 4, 10), Error);
  CHECK_THROWS_AS(progress_rate_video(0, 11, 10), Error);
  CHECK_THROWS_AS(progress_rate_diagram(0, 3), Error);
  CHECK_THROWS_AS(progress_rate_diagram(4, 3), Error);
}

TEST_CASE("sinusoidal progress feature") {
  CHECK(sprf(0.0)[0] == 0.0);
  CHECK(sprf(0.0)[1] == 1.0);
  CHECK(sprf(0.5)[0] == 1.0);
  CHECK(std::abs(sprf(0.5)[1]) < 1e-15);
  CHECK(std::abs(sprf(1.0)[0]) < 1e-15);
  CHECK(sprf(1.0)[1] == -1.0);
  CHECK_THROWS_AS(sprf(1.5), Error);
  for (int k = 0; k <= 100; ++k) CHECK(sprf(k / 100.0).norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("sprf similarity is the cosine of the progress gap") {
  double worst = 0.0;
  for (int a = 0; a <= 40; ++a)
    for (int b = 0; b <= 40; ++b) {
      const double r1 = a / 40.0, r2 = b / 40.0;
      worst = std::max(worst, std::abs(sprf(r1).dot(sprf(r2)) - std::cos(std::numbers::pi * (r1 - r2))));
    }
  CHECK(worst <= 1e-12);
}

TEST_CASE("augment") {
  SUBCASE("unit raw feature at r = 0") {
    const Eigen::Vector3d f(0.6, 0.0, 0.8);
    const VectorXd out = augment(f, 0.0);
    Eigen::Matrix<double, 5, 1> expected;
    expected << 0.6, 0.0, 0.8, 0.0, 1.0;
    expected /= std::sqrt(2.0);
    CHECK((out - expected).norm() < 1e-15);
  }
  SUBCASE("scale invariance and unit norm") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
      const VectorXd f = testutil::random_matrix(rng, 7, 1);
      const double r = std::uniform_real_distribution<double>(0, 1)(rng);
      const double lambda = std::exp(std::uniform_real_distribution<double>(-5, 5)(rng));
      const VectorXd a = augment(f, r), b = augment(VectorXd(lambda * f), r);
      CHECK((a - b).norm() < 1e-14);
      CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-15));
      // Both blocks weigh 1/sqrt(2).
      CHECK(a.tail(2).norm() == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-14));
    }
  }
  CHECK_THROWS_AS(augment(VectorXd::Zero(3), 0.5), Error);
  CHECK(augment_without_progress(Eigen::Vector2d(3, 4)).isApprox(Eigen::Vector2d(0.6, 0.8)));
}

TEST_CASE("projection head") {
  SUBCASE("identity configuration") {
    ProjectionHead<double> h(3, 3, 3);
    h.W1.setIdentity();
    h.W2.setIdentity();
    const Eigen::Vector3d x(0.0, 0.6, 0.8);
    CHECK((project(h, x) - x).norm() < 1e-15);
  }
  SUBCASE("random head against a scalar oracle") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 20; ++trial) {
      ProjectionHead<double> h(4, 4, 3);
      h.init_uniform(rng);
      const VectorXd x = testutil::random_matrix(rng, 4, 1);
      double hidden[4], out[3], norm = 0.0;
      for (int r = 0; r < 4; ++r) {
        double acc = h.b1[r];
        for (int c = 0; c < 4; ++c) acc += h.W1(r, c) * x[c];
        hidden[r] = acc > 0.0 ? acc : 0.0;
      }
      for (int r = 0; r < 3; ++r) {
        double acc = h.b2[r];
        for (int c = 0; c < 4; ++c) acc += h.W2(r, c) * hidden[c];
        out[r] = acc;
        norm += acc * acc;
      }
      norm = std::sqrt(norm);
      const VectorXd y = project(h, x);
      CHECK(y.norm() == doctest::Approx(1.0).epsilon(1e-15));
      for (int r = 0; r < 3; ++r) CHECK(std::abs(y[r] - out[r] / norm) < 1e-6);
      // Batched path agrees with the single-vector path.
      const auto c = project_rows(h, MatrixXd(x.transpose()));
      CHECK((c.output.row(0).transpose() - y).norm() < 1e-14);
    }
  }
  SUBCASE("initialization bounds") {
    std::mt19937_64 rng(1);
    ProjectionHead<double> h(16, 9, 5);
    h.init_uniform(rng);
    CHECK(h.W1.cwiseAbs().maxCoeff() <= 0.25);
    CHECK(h.b1.cwiseAbs().maxCoeff() <= 0.25);
    CHECK(h.W2.cwiseAbs().maxCoeff() <= 1 / 3.0);
    CHECK(h.W1.cwiseAbs().maxCoeff() > 0.2);
  }
  SUBCASE("width mismatch") {
    ProjectionHead<double> h(3, 3, 2);
    CHECK_THROWS_AS(project(h, Eigen::Vector2d(1, 0)), Error);
  }
}

TEST_CASE("projection Jacobian matches central differences") {
  std::mt19937_64 rng(8);
  const double h_step = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    ProjectionHead<double> head(5, 6, 4);
    head.init_uniform(rng);
    VectorXd x = testutil::random_matrix(rng, 5, 1);
    const VectorXd pre = head.W1 * x + head.b1;
    if (pre.cwiseAbs().minCoeff() < 1e-3) continue;  // too close to a kink

    // Analytic Jacobian through project_rows_backward, one output coordinate at a time.
    const auto c = project_rows(head, MatrixXd(x.transpose()));
    for (Index out = 0; out < 4; ++out) {
      MatrixXd d_out = MatrixXd::Zero(1, 4);
      d_out(0, out) = 1.0;
      ProjectionHead<double> g(5, 6, 4);
      project_rows_backward(head, c, d_out, g);
      // Input gradient = W1^T dpre; reconstruct dpre from the b1 gradient.
      const VectorXd analytic_x = head.W1.transpose() * g.b1;
      for (Index k = 0; k < 5; ++k) {
        VectorXd xp = x, xm = x;
        xp[k] += h_step;
        xm[k] -= h_step;
        const double numeric = (project(head, xp)[out] - project(head, xm)[out]) / (2 * h_step);
        const double denom = std::max({std::abs(numeric), std::abs(analytic_x[k]), 1e-6});
        CHECK(std::abs(numeric - analytic_x[k]) / denom <= 1e-4);
      }
      // And one weight entry per output.
      ProjectionHead<double> hp = head, hm = head;
      hp.W2(out, 0) += h_step;
      hm.W2(out, 0) -= h_step;
      const double numeric = (project(hp, x)[out] - project(hm, x)[out]) / (2 * h_step);
      const double denom = std::max({std::abs(numeric), std::abs(g.W2(out, 0)), 1e-6});
      CHECK(std::abs(numeric - g.W2(out, 0)) / denom <= 1e-4);
    }
  }
}
