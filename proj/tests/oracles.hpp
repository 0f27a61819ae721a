#pragma once

// Independent reference implementations shared by the unit and acceptance
// tests. Deliberately naive.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "coldstart/core.hpp"
#include "coldstart/regressor.hpp"
#include "coldstart/sppmi.hpp"

namespace coldstart::oracle {

struct Metrics {
  double precision = 0, recall = 0, ndcg = 0;
  bool has_truth = false;
};

inline Metrics brute_metrics(const std::vector<TrackId>& rec, const std::set<TrackId>& truth, std::size_t k) {
  Metrics m;
  std::vector<TrackId> seen;
  double hits = 0, dcg = 0;
  for (std::size_t i = 0; i < rec.size() && i < k; ++i) {
    bool repeat = false;
    for (auto s : seen) repeat = repeat || s == rec[i];
    seen.push_back(rec[i]);
    if (repeat) continue;
    bool rel = false;
    for (auto t : truth) rel = rel || t == rec[i];
    if (rel) {
      hits += 1;
      dcg += 1.0 / std::log2(double(i) + 2.0);
    }
  }
  m.precision = hits / double(k);
  if (truth.empty()) return m;
  m.has_truth = true;
  m.recall = hits / double(truth.size());
  double ideal = 0;
  for (std::size_t i = 0; i < std::min(k, truth.size()); ++i) ideal += 1.0 / std::log2(double(i) + 2.0);
  m.ndcg = dcg / ideal;
  return m;
}

// Lowest within-cluster sum of squares over every labelling of the rows.
inline double exhaustive_kmeans_optimum(const Eigen::MatrixXd& points, std::size_t k,
                                        Eigen::MatrixXd* best_centroids = nullptr) {
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<std::size_t> labels(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), points.cols());
    std::vector<double> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(labels[i])) += points.row(static_cast<Eigen::Index>(i));
      ++count[labels[i]];
    }
    bool all_used = true;
    for (auto c : count) all_used = all_used && c > 0;
    if (all_used) {
      for (std::size_t c = 0; c < k; ++c) sums.row(static_cast<Eigen::Index>(c)) /= count[c];
      double wcss = 0;
      for (std::size_t i = 0; i < n; ++i)
        wcss += (points.row(static_cast<Eigen::Index>(i)) - sums.row(static_cast<Eigen::Index>(labels[i]))).squaredNorm();
      if (wcss < best) {
        best = wcss;
        if (best_centroids) *best_centroids = sums;
      }
    }
    std::size_t pos = 0;
    while (pos < n && ++labels[pos] == k) labels[pos++] = 0;
    if (pos == n) break;
  }
  return best;
}

// Rank-d truncation of the dense SVD.
inline Eigen::MatrixXd dense_rank_d(const Eigen::MatrixXd& m, std::size_t d) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto r = static_cast<Eigen::Index>(d);
  return svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
}

// Largest elementwise |analytic - numeric| / max(|analytic|, |numeric|, floor)
// over every trainable parameter, numeric by central differences.
inline double max_gradient_error(RegressorModel model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                 double h = 1e-3, double floor = 1e-7) {
  Gradients g;
  loss_and_gradients(model, x, y, &g);
  double worst = 0;
  // Five-point stencil: truncation O(h^4), roundoff O(eps / h). When the
  // estimates at h and h/4 disagree the stencil spans a ReLU kink, so the
  // narrower one is used.
  auto probe = [&](double& param, double analytic) {
    const double saved = param;
    auto at = [&](double offset) {
      param = saved + offset;
      return loss_and_gradients(model, x, y, nullptr);
    };
    auto stencil = [&](double step) { return (at(-2 * step) - 8 * at(-step) + 8 * at(step) - at(2 * step)) / (12 * step); };
    const double wide = stencil(h), narrow = stencil(h / 4);
    const bool smooth = std::abs(wide - narrow) <= 1e-6 * std::max({std::abs(wide), std::abs(narrow), floor});
    const double numeric = smooth ? wide : narrow;
    param = saved;
    const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    worst = std::max(worst, err);
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) probe(layer.weight.data()[i], g.layers[l].weight.data()[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) probe(layer.bias(i), g.layers[l].bias(i));
  }
  for (std::size_t l = 0; l < model.norms.size(); ++l) {
    auto& norm = model.norms[l];
    for (Eigen::Index i = 0; i < norm.gamma.size(); ++i) probe(norm.gamma(i), g.norms[l].gamma(i));
    for (Eigen::Index i = 0; i < norm.beta.size(); ++i) probe(norm.beta(i), g.norms[l].beta(i));
  }
  return worst;
}

}  // namespace coldstart::oracle
