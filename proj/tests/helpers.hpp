#pragma once

#include "stepalign/dataset.hpp"
#include "stepalign/objective.hpp"

#include <random>
#include <string>

namespace testutil {

/// One manual "m" with three steps (two pages), one video with two labeled segments.
inline stepalign::Dataset tiny_dataset() {
  using namespace stepalign;
  Dataset ds;
  Manual m;
  m.manual_id = "m";
  m.furniture_id = "f";
  for (int j = 1; j <= 3; ++j) m.steps.push_back({"m_s" + std::to_string(j), "m", j, Granularity::step});
  for (int j = 1; j <= 2; ++j) m.pages.push_back({"m_p" + std::to_string(j), "m", j, Granularity::page});
  ds.manuals.push_back(m);
  VideoRecord v;
  v.video_id = "v";
  v.manual_id = "m";
  v.duration = 30.0;
  v.segments.push_back({"v_0", 0.0, 10.0, 1, 1});
  v.segments.push_back({"v_1", 10.0, 20.0, 3, 2});
  ds.videos.push_back(v);
  ds.splits[Split::train] = {"v"};
  ds.build();
  return ds;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0,
                                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

/// Head computing x -> x / |x| exactly: relu(x) - relu(-x) through a hidden layer of width 2 * dim.
inline stepalign::ProjectionHead<double> identity_head(Eigen::Index dim) {
  stepalign::ProjectionHead<double> h(dim, 2 * dim, dim);
  h.W1.topRows(dim).setIdentity();
  h.W1.bottomRows(dim) = -Eigen::MatrixXd::Identity(dim, dim);
  h.W2.leftCols(dim).setIdentity();
  h.W2.rightCols(dim) = -Eigen::MatrixXd::Identity(dim, dim);
  return h;
}

inline stepalign::Model<double> identity_model(Eigen::Index video_dim, Eigen::Index diagram_dim) {
  stepalign::Model<double> m;
  m.video = identity_head(video_dim);
  m.diagram = identity_head(diagram_dim);
  return m;
}

}  // namespace testutil
