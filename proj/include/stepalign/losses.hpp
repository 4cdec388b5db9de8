#pragma once

// Contrastive objectives over similarity blocks. Every routine returns the loss value together with its
// exact partial derivatives with respect to the similarity entries it reads and to its log-parameterized
// temperature (and Gaussian variance for the intra-manual loss). Chaining to embeddings and heads
// happens in objective.hpp.

#include "stepalign/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace stepalign {

/// Trainable scalars of the objective. Temperatures and the Gaussian variance are stored as logs so
/// they stay positive; exp(0) makes the initial variance exactly 1.
template <typename Scalar>
struct LossParams {
  Scalar log_tau_A = std::log(Scalar(0.07));  // infoNCE and video-diagram loss
  Scalar log_tau_B = std::log(Scalar(0.07));  // video-manual loss
  Scalar log_tau_C = std::log(Scalar(0.07));  // intra-manual loss
  Scalar log_theta = Scalar(0);               // variance of the intra-manual Gaussian target

  Scalar tau_A() const { return std::exp(log_tau_A); }
  Scalar tau_B() const { return std::exp(log_tau_B); }
  Scalar tau_C() const { return std::exp(log_tau_C); }
  Scalar theta() const { return std::exp(log_theta); }

  static LossParams zero() { return {Scalar(0), Scalar(0), Scalar(0), Scalar(0)}; }
};

/// Value and gradient of a loss term with respect to its similarity block and log-parameters.
template <typename Scalar>
struct LossResult {
  Scalar value = Scalar(0);
  Matrix<Scalar> d_sim;
  Scalar d_log_tau = Scalar(0);
  Scalar d_log_theta = Scalar(0);
};

template <typename DA, typename DB>
typename DA::Scalar cosine_sim(const Eigen::MatrixBase<DA>& u, const Eigen::MatrixBase<DB>& v) {
  using Scalar = typename DA::Scalar;
  const Scalar nu = u.norm(), nv = v.norm();
  if (!(nu > Scalar(0)) || !(nv > Scalar(0))) fail("cosine_sim: zero vector");
  return std::clamp(u.dot(v) / (nu * nv), Scalar(-1), Scalar(1));
}

template <typename Scalar>
Scalar log_sum_exp(const Eigen::Ref<const Vector<Scalar>>& x) {
  const Scalar m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.array() - m).exp().sum());
}

/// Row-wise log-softmax with max subtraction.
template <typename Scalar>
Matrix<Scalar> log_softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const Vector<Scalar> row = logits.row(i).transpose();
    out.row(i) = (row.array() - log_sum_exp<Scalar>(row)).matrix().transpose();
  }
  return out;
}

/// V2I: row i is the distribution over diagrams for video i. I2V: row j is the distribution over
/// videos for diagram j (softmax down column j of S).
template <typename Scalar>
Matrix<Scalar> match_probs(const Matrix<Scalar>& S, Scalar tau, Direction dir) {
  if (!(tau > Scalar(0))) fail("match_probs: temperature must be positive");
  const Matrix<Scalar> logits = (dir == Direction::V2I ? S : Matrix<Scalar>(S.transpose())) / tau;
  return log_softmax_rows<Scalar>(logits).array().exp().matrix();
}

namespace detail {

inline double log_add_exp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// JS divergence between two distributions given as log-probabilities, plus the partials
/// dJS/dp_k = 0.5 log(p_k/m_k) and dJS/dq_k = 0.5 log(q_k/m_k) (entries with p_k = 0 or q_k = 0 get 0,
/// their contribution vanishes under the softmax chain rule anyway).
template <typename Scalar>
Scalar js_from_logs(const Vector<Scalar>& log_p, const Vector<Scalar>& log_q, Vector<Scalar>* dp, Vector<Scalar>* dq) {
  const Index n = log_p.size();
  Scalar js = Scalar(0);
  if (dp) dp->setZero(n);
  if (dq) dq->setZero(n);
  const Scalar ln2 = std::numbers::ln2_v<Scalar>;
  for (Index k = 0; k < n; ++k) {
    const Scalar lp = log_p[k], lq = log_q[k];
    if (lp == -INFINITY && lq == -INFINITY) continue;
    const Scalar lm = static_cast<Scalar>(log_add_exp(static_cast<double>(lp), static_cast<double>(lq))) - ln2;
    if (lp != -INFINITY) {
      js += Scalar(0.5) * std::exp(lp) * (lp - lm);
      if (dp) (*dp)[k] = Scalar(0.5) * (lp - lm);
    }
    if (lq != -INFINITY) {
      js += Scalar(0.5) * std::exp(lq) * (lq - lm);
      if (dq) (*dq)[k] = Scalar(0.5) * (lq - lm);
    }
  }
  return std::max(js, Scalar(0));
}

/// Pulls a gradient w.r.t. probabilities back to the logits of a softmax: p (g - <p, g>).
template <typename Scalar>
Vector<Scalar> softmax_backward(const Vector<Scalar>& p, const Vector<Scalar>& g) {
  return p.cwiseProduct(g.array().matrix() - Vector<Scalar>::Constant(g.size(), p.dot(g)));
}

}  // namespace detail

/// Jensen-Shannon divergence (natural log) with 0 log 0 = 0. Bounded by ln 2.
template <typename DA, typename DB>
double js_divergence(const Eigen::MatrixBase<DA>& p, const Eigen::MatrixBase<DB>& q) {
  if (p.size() != q.size()) fail("js_divergence: supports differ in size");
  VectorXd lp(p.size()), lq(q.size());
  for (Index k = 0; k < p.size(); ++k) {
    lp[k] = p[k] > 0 ? std::log(static_cast<double>(p[k])) : -INFINITY;
    lq[k] = q[k] > 0 ? std::log(static_cast<double>(q[k])) : -INFINITY;
  }
  return detail::js_from_logs<double>(lp, lq, nullptr, nullptr);
}

/// d(loss)/d(log tau) given d(loss)/d(logits) where logits = S / tau.
template <typename Scalar>
Scalar log_tau_partial(const Matrix<Scalar>& d_logits, const Matrix<Scalar>& logits) {
  return -(d_logits.cwiseProduct(logits)).sum();
}

/// Symmetric infoNCE over a B x B block whose diagonal holds the positives.
template <typename Scalar>
LossResult<Scalar> info_nce(const Matrix<Scalar>& S, Scalar log_tau) {
  const Index B = S.rows();
  if (B == 0 || S.cols() != B) fail("info_nce: need a non-empty square similarity block");
  const Scalar tau = std::exp(log_tau);
  const Matrix<Scalar> logits = S / tau;
  const Matrix<Scalar> lp_v2i = log_softmax_rows<Scalar>(logits);
  const Matrix<Scalar> lp_i2v = log_softmax_rows<Scalar>(logits.transpose()).transpose();  // column-normalized
  LossResult<Scalar> r;
  r.value = -(lp_v2i.diagonal().sum() + lp_i2v.diagonal().sum()) / (Scalar(2) * B);
  Matrix<Scalar> d_logits = lp_v2i.array().exp().matrix() + lp_i2v.array().exp().matrix();
  d_logits.diagonal().array() -= Scalar(2);
  d_logits /= Scalar(2) * B;
  r.d_sim = d_logits / tau;
  r.d_log_tau = log_tau_partial<Scalar>(d_logits, logits);
  return r;
}

/// Video-diagram loss: mean over rows of JS(p^{V2I} || q^{V2I}) and over columns of JS(p^{I2V} || q^{I2V}),
/// averaged. `positive(i, j)` marks clip i and the diagram in slot j as a true match; the targets are
/// uniform over each row's (column's) positives, so clips sharing a diagram are mutual positives.
template <typename Scalar>
LossResult<Scalar> video_diagram_loss(const Matrix<Scalar>& S, const Eigen::Matrix<bool, -1, -1>& positive,
                                      Scalar log_tau) {
  const Index B = S.rows(), K = S.cols();
  if (B == 0 || K == 0 || positive.rows() != B || positive.cols() != K) fail("video_diagram_loss: shape mismatch");
  const Scalar tau = std::exp(log_tau);
  const Matrix<Scalar> logits = S / tau;
  Matrix<Scalar> d_logits = Matrix<Scalar>::Zero(B, K);
  LossResult<Scalar> r;

  auto target_logs = [](const auto& mask_line) {
    const Index n = mask_line.size();
    const Scalar count = static_cast<Scalar>(mask_line.count());
    if (count == Scalar(0)) fail("video_diagram_loss: a row or column has no positive");
    Vector<Scalar> lq(n);
    for (Index k = 0; k < n; ++k) lq[k] = mask_line[k] ? -std::log(count) : Scalar(-INFINITY);
    return lq;
  };

  Scalar rows_total = Scalar(0), cols_total = Scalar(0);
  const Matrix<Scalar> lp_rows = log_softmax_rows<Scalar>(logits);
  for (Index i = 0; i < B; ++i) {
    const Vector<Scalar> lp = lp_rows.row(i).transpose();
    Vector<Scalar> dp;
    rows_total += detail::js_from_logs<Scalar>(lp, target_logs(positive.row(i).transpose()), &dp, nullptr);
    d_logits.row(i) += detail::softmax_backward<Scalar>(lp.array().exp().matrix(), dp).transpose() / (Scalar(2) * B);
  }
  const Matrix<Scalar> lp_cols = log_softmax_rows<Scalar>(logits.transpose());
  for (Index j = 0; j < K; ++j) {
    const Vector<Scalar> lp = lp_cols.row(j).transpose();
    Vector<Scalar> dp;
    cols_total += detail::js_from_logs<Scalar>(lp, target_logs(positive.col(j)), &dp, nullptr);
    d_logits.col(j) += detail::softmax_backward<Scalar>(lp.array().exp().matrix(), dp) / (Scalar(2) * K);
  }
  r.value = Scalar(0.5) * (rows_total / B + cols_total / K);
  r.d_sim = d_logits / tau;
  r.d_log_tau = log_tau_partial<Scalar>(d_logits, logits);
  return r;
}

/// Slice of a wide similarity block owned by one clip (its manual's diagrams).
struct ManualSpan {
  Index offset = 0;  // first column of the manual
  Index length = 0;  // M_i
  Index target = 0;  // 0-based position of the positive (video-manual) or anchor row (intra-manual)
};

/// Video-manual loss: sum_i (M_i / sum_b M_b) CE(softmax(S[i, span_i] / tau), one-hot target_i).
/// S is B x K with the diagrams of all manuals in the batch laid out as column spans.
template <typename Scalar>
LossResult<Scalar> video_manual_loss(const Matrix<Scalar>& S, const std::vector<ManualSpan>& spans, Scalar log_tau) {
  const Index B = S.rows();
  if (B == 0 || static_cast<Index>(spans.size()) != B) fail("video_manual_loss: one span per clip required");
  const Scalar tau = std::exp(log_tau);
  Scalar total_m = Scalar(0);
  for (const ManualSpan& sp : spans) total_m += static_cast<Scalar>(sp.length);
  Matrix<Scalar> d_logits = Matrix<Scalar>::Zero(B, S.cols());
  Scalar log_tau_grad = Scalar(0);
  LossResult<Scalar> r;
  for (Index i = 0; i < B; ++i) {
    const ManualSpan& sp = spans[static_cast<std::size_t>(i)];
    if (sp.length < 1 || sp.target < 0 || sp.target >= sp.length || sp.offset + sp.length > S.cols())
      fail("video_manual_loss: invalid manual span");
    const Scalar w = static_cast<Scalar>(sp.length) / total_m;
    const Vector<Scalar> logits = S.row(i).segment(sp.offset, sp.length).transpose() / tau;
    const Vector<Scalar> lp = logits.array() - log_sum_exp<Scalar>(logits);
    r.value -= w * lp[sp.target];
    Vector<Scalar> g = lp.array().exp().matrix() * w;
    g[sp.target] -= w;
    d_logits.row(i).segment(sp.offset, sp.length) = g.transpose();
    log_tau_grad -= g.dot(logits);
  }
  r.d_sim = d_logits / tau;
  r.d_log_tau = log_tau_grad;
  return r;
}

/// Discretized Gaussian on {1..M} centred on step j (1-based) with variance theta, as log-probabilities.
template <typename Scalar>
Vector<Scalar> gaussian_target_logs(Index M, Index j, Scalar theta) {
  Vector<Scalar> g(M);
  for (Index k = 1; k <= M; ++k) {
    const Scalar d = static_cast<Scalar>(k - j);
    g[k - 1] = -d * d / (Scalar(2) * theta);
  }
  return g.array() - log_sum_exp<Scalar>(g);
}

template <typename Scalar>
Vector<Scalar> gaussian_target(Index M, Index j, Scalar theta) {
  return gaussian_target_logs<Scalar>(M, j, theta).array().exp().matrix();
}

/// Intra-manual loss over a K x K diagram Gram block. Each anchor names a manual span and a row inside it;
/// its term is (M / sum M) JS(softmax(G[row, span] / tau) || N(row, theta)), self-similarity included.
template <typename Scalar>
LossResult<Scalar> intra_manual_loss(const Matrix<Scalar>& G, const std::vector<ManualSpan>& anchors, Scalar log_tau,
                                     Scalar log_theta) {
  if (anchors.empty()) fail("intra_manual_loss: no anchors");
  if (G.rows() != G.cols()) fail("intra_manual_loss: Gram block must be square");
  const Scalar tau = std::exp(log_tau), theta = std::exp(log_theta);
  Scalar total_m = Scalar(0);
  for (const ManualSpan& a : anchors) total_m += static_cast<Scalar>(a.length);
  Matrix<Scalar> d_logits = Matrix<Scalar>::Zero(G.rows(), G.cols());
  Scalar log_tau_grad = Scalar(0);
  LossResult<Scalar> r;
  for (const ManualSpan& a : anchors) {
    if (a.length < 1 || a.target < 0 || a.target >= a.length || a.offset + a.length > G.cols())
      fail("intra_manual_loss: invalid anchor");
    const Scalar w = static_cast<Scalar>(a.length) / total_m;
    const Index row = a.offset + a.target;
    const Vector<Scalar> logits = G.row(row).segment(a.offset, a.length).transpose() / tau;
    const Vector<Scalar> lp = logits.array() - log_sum_exp<Scalar>(logits);
    const Vector<Scalar> lq = gaussian_target_logs<Scalar>(a.length, a.target + 1, theta);
    Vector<Scalar> dp, dq;
    r.value += w * detail::js_from_logs<Scalar>(lp, lq, &dp, &dq);
    const Vector<Scalar> g = w * detail::softmax_backward<Scalar>(lp.array().exp().matrix(), dp);
    d_logits.row(row).segment(a.offset, a.length) += g.transpose();
    log_tau_grad -= g.dot(logits);
    // q = softmax(e), e_k = -(k - j)^2 / (2 theta): de_k/d(log theta) = (k - j)^2 / (2 theta) = -e_k.
    const Vector<Scalar> q = lq.array().exp().matrix();
    Vector<Scalar> de(a.length);
    for (Index k = 0; k < a.length; ++k) {
      const Scalar d = static_cast<Scalar>(k - a.target);
      de[k] = d * d / (Scalar(2) * theta);
    }
    r.d_log_theta += w * detail::softmax_backward<Scalar>(q, dq).dot(de);
  }
  r.d_sim = d_logits / tau;
  r.d_log_tau = log_tau_grad;
  return r;
}

/// Single-manual form: every diagram of the manual is an anchor, each weighted 1/M.
template <typename Scalar>
LossResult<Scalar> intra_manual_loss(const Matrix<Scalar>& G, Scalar log_tau, Scalar log_theta) {
  std::vector<ManualSpan> anchors;
  for (Index j = 0; j < G.rows(); ++j) anchors.push_back({0, G.rows(), j});
  return intra_manual_loss<Scalar>(G, anchors, log_tau, log_theta);
}

/// Cosine-similarity baseline: mean(1 - s_ii) over the positive pairs on the diagonal.
template <typename Scalar>
LossResult<Scalar> cosine_baseline_loss(const Matrix<Scalar>& S) {
  const Index B = std::min(S.rows(), S.cols());
  if (B == 0) fail("cosine_baseline_loss: empty block");
  LossResult<Scalar> r;
  r.value = Scalar(1) - S.diagonal().sum() / B;
  r.d_sim = Matrix<Scalar>::Zero(S.rows(), S.cols());
  r.d_sim.diagonal().setConstant(Scalar(-1) / B);
  return r;
}

}  // namespace stepalign
