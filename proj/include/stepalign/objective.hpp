#pragma once

#include "stepalign/features.hpp"
#include "stepalign/losses.hpp"

#include <map>
#include <string>
#include <vector>

namespace stepalign {

enum class LossKind {
  info_nce,       // CLIP-style baseline
  cosine,         // cosine-similarity baseline
  video_diagram,  // loss A
  video_manual,   // loss B
  intra_manual,   // loss C
};

struct LossTerm {
  LossKind kind = LossKind::video_manual;
  Granularity granularity = Granularity::step;

  friend bool operator==(const LossTerm&, const LossTerm&) = default;
  friend auto operator<=>(const LossTerm&, const LossTerm&) = default;
};

std::string to_string(LossKind k);
std::string to_string(const LossTerm& t);
/// Comma-separated terms such as "B:step,C:step,A:page,clip,cos". A bare kind means step granularity.
std::vector<LossTerm> parse_loss_terms(const std::string& text);
std::string format_loss_terms(const std::vector<LossTerm>& terms);
bool uses_pair_batch(LossKind k);

/// One row of the loss-combination ablation: the baselines, then A1..D2.
struct LossPreset {
  std::string name;
  std::vector<LossTerm> losses;
  std::size_t batch_size = 128;  // pair-only rows double the clips
};

const std::vector<LossPreset>& loss_presets();
const LossPreset& find_loss_preset(const std::string& name);

/// All trainable state: one projection head per modality plus the loss scalars.
template <typename Scalar>
struct Model {
  ProjectionHead<Scalar> video;
  ProjectionHead<Scalar> diagram;
  LossParams<Scalar> params;

  /// Zero-valued model with the same shapes (used as a gradient accumulator).
  Model zeros_like() const {
    Model z;
    z.video = ProjectionHead<Scalar>(video.in_dim(), video.hidden_dim(), video.out_dim());
    z.diagram = ProjectionHead<Scalar>(diagram.in_dim(), diagram.hidden_dim(), diagram.out_dim());
    z.params = LossParams<Scalar>::zero();
    return z;
  }

  template <typename Other>
  Model<Other> cast() const {
    Model<Other> m;
    m.video = video.template cast<Other>();
    m.diagram = diagram.template cast<Other>();
    m.params = {static_cast<Other>(params.log_tau_A), static_cast<Other>(params.log_tau_B),
                static_cast<Other>(params.log_tau_C), static_cast<Other>(params.log_theta)};
    return m;
  }
};

template <typename Scalar>
using GradientSet = Model<Scalar>;

/// Flat parameter view shared by the optimizer and the gradient checker.
/// Order: video W1 b1 W2 b2, diagram W1 b1 W2 b2, log_tau_A, log_tau_B, log_tau_C, log_theta.
template <typename Scalar>
Vector<Scalar> flatten(const Model<Scalar>& m) {
  const ProjectionHead<Scalar>* heads[] = {&m.video, &m.diagram};
  Index n = 4;
  for (auto* h : heads) n += h->W1.size() + h->b1.size() + h->W2.size() + h->b2.size();
  Vector<Scalar> out(n);
  Index at = 0;
  auto put = [&](const auto& x) {
    out.segment(at, x.size()) = Eigen::Map<const Vector<Scalar>>(x.data(), x.size());
    at += x.size();
  };
  for (auto* h : heads) {
    put(h->W1);
    put(h->b1);
    put(h->W2);
    put(h->b2);
  }
  out.tail(4) << m.params.log_tau_A, m.params.log_tau_B, m.params.log_tau_C, m.params.log_theta;
  return out;
}

template <typename Scalar>
void unflatten(const Vector<Scalar>& flat, Model<Scalar>& m) {
  ProjectionHead<Scalar>* heads[] = {&m.video, &m.diagram};
  Index at = 0;
  auto take = [&](auto& x) {
    Eigen::Map<Vector<Scalar>>(x.data(), x.size()) = flat.segment(at, x.size());
    at += x.size();
  };
  for (auto* h : heads) {
    take(h->W1);
    take(h->b1);
    take(h->W2);
    take(h->b2);
  }
  if (at + 4 != flat.size()) fail("unflatten: parameter count mismatch");
  m.params.log_tau_A = flat[at];
  m.params.log_tau_B = flat[at + 1];
  m.params.log_tau_C = flat[at + 2];
  m.params.log_theta = flat[at + 3];
}

/// Human-readable name of every flat parameter, e.g. "video.W1[3,0]".
template <typename Scalar>
std::vector<std::string> parameter_names(const Model<Scalar>& m) {
  std::vector<std::string> names;
  auto add_matrix = [&](const std::string& base, const Matrix<Scalar>& x) {
    for (Index c = 0; c < x.cols(); ++c)  // column-major, matching flatten
      for (Index r = 0; r < x.rows(); ++r)
        names.push_back(base + "[" + std::to_string(r) + "," + std::to_string(c) + "]");
  };
  auto add_vector = [&](const std::string& base, const Vector<Scalar>& x) {
    for (Index k = 0; k < x.size(); ++k) names.push_back(base + "[" + std::to_string(k) + "]");
  };
  for (const auto& [tag, h] : {std::pair<std::string, const ProjectionHead<Scalar>*>{"video", &m.video},
                               std::pair<std::string, const ProjectionHead<Scalar>*>{"diagram", &m.diagram}}) {
    add_matrix(tag + ".W1", h->W1);
    add_vector(tag + ".b1", h->b1);
    add_matrix(tag + ".W2", h->W2);
    add_vector(tag + ".b2", h->b2);
  }
  for (const char* n : {"log_tau_A", "log_tau_B", "log_tau_C", "log_theta"}) names.emplace_back(n);
  return names;
}

/// 1 for parameters subject to weight decay (head weights and biases), 0 for temperatures and variance.
template <typename Scalar>
Vector<Scalar> decay_mask(const Model<Scalar>& m) {
  Vector<Scalar> mask = Vector<Scalar>::Ones(flatten(m).size());
  mask.tail(4).setZero();
  return mask;
}

/// Inputs for losses over (clip, ground-truth diagram) pairs: infoNCE, cosine baseline, loss A.
template <typename Scalar>
struct PairInputs {
  Matrix<Scalar> video;    // B x D_video_in, augmented
  Matrix<Scalar> diagram;  // B x D_diagram_in, augmented; row b is clip b's diagram
  Eigen::Matrix<bool, -1, -1> positive;  // B x B, same diagram

  Index size() const { return video.rows(); }
};

/// Inputs for losses over clips and their whole manuals: losses B and C.
template <typename Scalar>
struct ManualInputs {
  Matrix<Scalar> video;    // B x D_video_in
  Matrix<Scalar> diagram;  // K x D_diagram_in, every batch manual's diagrams laid out contiguously
  std::vector<ManualSpan> spans;  // per clip: its manual's columns and its ground-truth position

  Index size() const { return video.rows(); }
};

template <typename Scalar>
struct ObjectiveBatch {
  Granularity granularity = Granularity::step;
  std::vector<LossKind> pair_losses;
  PairInputs<Scalar> pair;
  std::vector<LossKind> manual_losses;
  ManualInputs<Scalar> manual;
};

template <typename Scalar>
struct ObjectiveValue {
  Scalar total = Scalar(0);
  std::map<LossTerm, Scalar> terms;
  GradientSet<Scalar> grad;
};

namespace detail {

template <typename Scalar>
Scalar& log_tau_for(LossParams<Scalar>& p, LossKind k) {
  switch (k) {
    case LossKind::video_manual: return p.log_tau_B;
    case LossKind::intra_manual: return p.log_tau_C;
    default: return p.log_tau_A;
  }
}

}  // namespace detail

/// Unweighted (by default) sum of the enabled loss terms and, if requested, its exact gradient.
template <typename Scalar>
ObjectiveValue<Scalar> evaluate_objective(const Model<Scalar>& model, const std::vector<ObjectiveBatch<Scalar>>& batches,
                                          bool with_gradient = true, const std::map<LossKind, double>& weights = {}) {
  ObjectiveValue<Scalar> out;
  out.grad = model.zeros_like();
  std::size_t enabled = 0;
  LossParams<Scalar> p = model.params;
  auto weight_of = [&](LossKind k) {
    auto it = weights.find(k);
    return static_cast<Scalar>(it == weights.end() ? 1.0 : it->second);
  };
  auto record = [&](LossKind k, Granularity g, const LossResult<Scalar>& r, Scalar w) {
    out.terms[{k, g}] += r.value;
    out.total += w * r.value;
    ++enabled;
  };

  for (const ObjectiveBatch<Scalar>& batch : batches) {
    if (!batch.pair_losses.empty()) {
      const auto cv = project_rows(model.video, batch.pair.video);
      const auto ci = project_rows(model.diagram, batch.pair.diagram);
      const Matrix<Scalar> S = cv.output * ci.output.transpose();
      Matrix<Scalar> dS = Matrix<Scalar>::Zero(S.rows(), S.cols());
      for (LossKind k : batch.pair_losses) {
        LossResult<Scalar> r;
        switch (k) {
          case LossKind::info_nce: r = info_nce<Scalar>(S, p.log_tau_A); break;
          case LossKind::cosine: r = cosine_baseline_loss<Scalar>(S); break;
          case LossKind::video_diagram: r = video_diagram_loss<Scalar>(S, batch.pair.positive, p.log_tau_A); break;
          default: fail("loss " + to_string(k) + " does not use a pair batch");
        }
        const Scalar w = weight_of(k);
        record(k, batch.granularity, r, w);
        if (with_gradient) {
          dS += w * r.d_sim;
          detail::log_tau_for(out.grad.params, k) += w * r.d_log_tau;
        }
      }
      if (with_gradient) {
        project_rows_backward(model.video, cv, Matrix<Scalar>(dS * ci.output), out.grad.video);
        project_rows_backward(model.diagram, ci, Matrix<Scalar>(dS.transpose() * cv.output), out.grad.diagram);
      }
    }
    if (!batch.manual_losses.empty()) {
      const auto cv = project_rows(model.video, batch.manual.video);
      const auto ci = project_rows(model.diagram, batch.manual.diagram);
      Matrix<Scalar> dYV = Matrix<Scalar>::Zero(cv.output.rows(), cv.output.cols());
      Matrix<Scalar> dYI = Matrix<Scalar>::Zero(ci.output.rows(), ci.output.cols());
      for (LossKind k : batch.manual_losses) {
        const Scalar w = weight_of(k);
        if (k == LossKind::video_manual) {
          const Matrix<Scalar> S = cv.output * ci.output.transpose();
          const auto r = video_manual_loss<Scalar>(S, batch.manual.spans, p.log_tau_B);
          record(k, batch.granularity, r, w);
          if (with_gradient) {
            dYV += w * r.d_sim * ci.output;
            dYI += w * r.d_sim.transpose() * cv.output;
            out.grad.params.log_tau_B += w * r.d_log_tau;
          }
        } else if (k == LossKind::intra_manual) {
          const Matrix<Scalar> G = ci.output * ci.output.transpose();
          const auto r = intra_manual_loss<Scalar>(G, batch.manual.spans, p.log_tau_C, p.log_theta);
          record(k, batch.granularity, r, w);
          if (with_gradient) {
            dYI += w * (r.d_sim + r.d_sim.transpose()) * ci.output;
            out.grad.params.log_tau_C += w * r.d_log_tau;
            out.grad.params.log_theta += w * r.d_log_theta;
          }
        } else {
          fail("loss " + to_string(k) + " does not use a manual batch");
        }
      }
      if (with_gradient) {
        project_rows_backward(model.video, cv, dYV, out.grad.video);
        project_rows_backward(model.diagram, ci, dYI, out.grad.diagram);
      }
    }
  }
  if (enabled == 0) fail("total loss: no loss term enabled");
  return out;
}

}  // namespace stepalign
