#pragma once

#include "stepalign/types.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace stepalign {

/// Position of a clip's midpoint within its video, in [0, 1].
inline double progress_rate_video(double t_start, double t_end, double t_duration) {
  if (!(t_duration > 0.0) || !(t_start >= 0.0) || !(t_start <= t_end) || !(t_end <= t_duration))
    fail("progress_rate_video: need 0 <= t_start <= t_end <= t_duration and t_duration > 0");
  return (t_start + t_end) / (2.0 * t_duration);
}

/// Progress of step j (1-based) in a manual of M steps.
inline double progress_rate_diagram(int j, int M) {
  if (M < 1 || j < 1 || j > M) fail("progress_rate_diagram: need 1 <= j <= M");
  return static_cast<double>(j) / static_cast<double>(M);
}

/// Sinusoidal progress rate feature: progress mapped onto a half circle, so the dot product of two
/// features is cos(pi * (r1 - r2)).
template <typename Scalar = double>
Eigen::Matrix<Scalar, 2, 1> sprf(double r) {
  if (!(r >= 0.0 && r <= 1.0)) fail("sprf: progress rate must lie in [0, 1]");
  const double a = std::numbers::pi * r;
  return {static_cast<Scalar>(std::sin(a)), static_cast<Scalar>(std::cos(a))};
}

template <typename Derived>
Vector<typename Derived::Scalar> l2_normalized(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar n = v.norm();
  if (!(n > Scalar(0))) fail("cannot L2-normalize a zero vector");
  return v / n;
}

/// normalize(concat(normalize(f_raw), sprf(r))). The two blocks carry equal weight.
template <typename Derived>
Vector<typename Derived::Scalar> augment(const Eigen::MatrixBase<Derived>& f_raw, double r) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> out(f_raw.size() + 2);
  out.head(f_raw.size()) = l2_normalized(f_raw);
  out.tail(2) = sprf<Scalar>(r);
  return l2_normalized(out);
}

/// Input without the progress feature ("w/o SPRF" ablation): just the normalized raw embedding.
template <typename Derived>
Vector<typename Derived::Scalar> augment_without_progress(const Eigen::MatrixBase<Derived>& f_raw) {
  return l2_normalized(f_raw);
}

/// Two affine layers with a ReLU in between; the output is L2-normalized so cosine similarity between
/// projected features is a plain dot product. Weights are stored output-major (W1 is H x D_in).
template <typename Scalar>
struct ProjectionHead {
  Matrix<Scalar> W1;
  Vector<Scalar> b1;
  Matrix<Scalar> W2;
  Vector<Scalar> b2;

  ProjectionHead() = default;
  ProjectionHead(Index in_dim, Index hidden, Index out_dim)
      : W1(Matrix<Scalar>::Zero(hidden, in_dim)),
        b1(Vector<Scalar>::Zero(hidden)),
        W2(Matrix<Scalar>::Zero(out_dim, hidden)),
        b2(Vector<Scalar>::Zero(out_dim)) {}

  Index in_dim() const { return W1.cols(); }
  Index hidden_dim() const { return W1.rows(); }
  Index out_dim() const { return W2.rows(); }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases of both layers.
  template <typename Rng>
  void init_uniform(Rng& rng) {
    auto fill = [&rng](auto& m, Index fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<Scalar>(u(rng));
    };
    fill(W1, in_dim());
    fill(b1, in_dim());
    fill(W2, hidden_dim());
    fill(b2, hidden_dim());
  }

  template <typename Other>
  ProjectionHead<Other> cast() const {
    ProjectionHead<Other> h;
    h.W1 = W1.template cast<Other>();
    h.b1 = b1.template cast<Other>();
    h.W2 = W2.template cast<Other>();
    h.b2 = b2.template cast<Other>();
    return h;
  }

  bool all_finite() const { return W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite(); }
};

/// Intermediates of a batched forward pass, kept for the backward pass. Rows are samples.
template <typename Scalar>
struct ProjectionCache {
  Matrix<Scalar> input;   // n x D_in
  Matrix<Scalar> pre;     // n x H, before ReLU
  Matrix<Scalar> hidden;  // n x H
  Vector<Scalar> norms;   // n, |z| before normalization
  Matrix<Scalar> output;  // n x D_out, unit rows
};

template <typename Scalar>
ProjectionCache<Scalar> project_rows(const ProjectionHead<Scalar>& head, const Matrix<Scalar>& X) {
  if (X.cols() != head.in_dim())
    fail("project: input has " + std::to_string(X.cols()) + " columns, head expects " + std::to_string(head.in_dim()));
  ProjectionCache<Scalar> c;
  c.input = X;
  c.pre = (X * head.W1.transpose()).rowwise() + head.b1.transpose();
  c.hidden = c.pre.cwiseMax(Scalar(0));
  Matrix<Scalar> z = (c.hidden * head.W2.transpose()).rowwise() + head.b2.transpose();
  c.norms = z.rowwise().norm();
  if (!(c.norms.minCoeff() > Scalar(0))) fail_numeric("project: projected feature has zero norm");
  c.output = c.norms.cwiseInverse().asDiagonal() * z;
  return c;
}

template <typename Scalar, typename Derived>
Vector<Scalar> project(const ProjectionHead<Scalar>& head, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != head.in_dim())
    fail("project: input has " + std::to_string(x.size()) + " entries, head expects " + std::to_string(head.in_dim()));
  const Vector<Scalar> h = ((head.W1 * x.template cast<Scalar>()) + head.b1).cwiseMax(Scalar(0));
  return l2_normalized(Vector<Scalar>(head.W2 * h + head.b2));
}

/// Accumulates parameter gradients of a scalar loss given dL/d(output rows).
template <typename Scalar>
void project_rows_backward(const ProjectionHead<Scalar>& head, const ProjectionCache<Scalar>& c,
                           const Matrix<Scalar>& d_output, ProjectionHead<Scalar>& grad) {
  // y = z/|z|  =>  dz = (dy - y (y . dy)) / |z|
  const Vector<Scalar> radial = (c.output.cwiseProduct(d_output)).rowwise().sum();
  const Matrix<Scalar> dz =
      c.norms.cwiseInverse().asDiagonal() * (d_output - radial.asDiagonal() * c.output);
  grad.W2.noalias() += dz.transpose() * c.hidden;
  grad.b2 += dz.colwise().sum().transpose();
  const Matrix<Scalar> dpre = (dz * head.W2).cwiseProduct((c.pre.array() > Scalar(0)).matrix().template cast<Scalar>());
  grad.W1.noalias() += dpre.transpose() * c.input;
  grad.b1 += dpre.colwise().sum().transpose();
}

}  // namespace stepalign
