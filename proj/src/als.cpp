#include "coldstart/als.hpp"

#include <cmath>
#include <random>

#include <spdlog/spdlog.h>

#include "coldstart/errors.hpp"

namespace coldstart {

namespace {

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Solves every row of `target` given the fixed factor `fixed`. Row r of
// `scores` holds the observed scores of entity r against rows of `fixed`.
std::size_t solve_side(const RowSparse& scores, const Eigen::MatrixXd& fixed, Eigen::MatrixXd& target,
                       const AlsConfig& cfg) {
  const auto d = fixed.cols();
  const Eigen::MatrixXd gram = fixed.transpose() * fixed;
  std::size_t ill = 0;
  Eigen::MatrixXd a(d, d);
  Eigen::VectorXd b(d);
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    a = gram;
    a.diagonal().array() += cfg.lambda;
    b.setZero();
    for (RowSparse::InnerIterator it(scores, r); it; ++it) {
      const double c = 1.0 + cfg.alpha * it.value();
      const auto y = fixed.row(it.col()).transpose();
      a.noalias() += (c - 1.0) * y * y.transpose();
      b.noalias() += c * y;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      if (llt.rcond() * cfg.max_condition < 1.0) ++ill;
      target.row(r) = llt.solve(b).transpose();
    } else {
      ++ill;
      target.row(r) = a.completeOrthogonalDecomposition().solve(b).transpose();
    }
  }
  return ill;
}

EmbeddingTable to_table(const std::vector<EntityId>& ids, const Eigen::MatrixXd& m) {
  EmbeddingTable t(static_cast<std::size_t>(m.cols()));
  std::vector<double> row(static_cast<std::size_t>(m.cols()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(static_cast<Eigen::Index>(i), j);
    t.add(ids[i], std::span<const double>(row));
  }
  return t;
}

}  // namespace

double als_objective(const AffinityMatrix& matrix, const Eigen::MatrixXd& users, const Eigen::MatrixXd& tracks,
                     double lambda, double alpha) {
  // Unobserved cells contribute (x.y)^2; summing that over all cells is
  // trace(X'X Y'Y), and observed cells are corrected individually.
  double total = (users.transpose() * users).cwiseProduct(tracks.transpose() * tracks).sum();
  for (Eigen::Index r = 0; r < matrix.scores.outerSize(); ++r) {
    for (RowSparse::InnerIterator it(matrix.scores, r); it; ++it) {
      const double pred = users.row(r).dot(tracks.row(it.col()));
      const double c = 1.0 + alpha * it.value();
      total += c * (1.0 - pred) * (1.0 - pred) - pred * pred;
    }
  }
  return total + lambda * (users.squaredNorm() + tracks.squaredNorm());
}

AlsResult train_als(const AffinityMatrix& matrix, const AlsConfig& cfg) {
  if (cfg.dim < 1) throw UsageError("ALS dimension must be >= 1");
  if (cfg.iterations < 1) throw UsageError("ALS iterations must be >= 1");
  if (cfg.lambda < 0.0 || cfg.alpha < 0.0) throw UsageError("ALS lambda and alpha must be >= 0");
  if (matrix.empty()) throw DataError("affinity matrix is empty");
  const auto n = static_cast<std::size_t>(matrix.scores.rows());
  const auto m = static_cast<std::size_t>(matrix.scores.cols());
  if (cfg.dim > std::min(n, m)) {
    throw UsageError("ALS dimension " + std::to_string(cfg.dim) + " exceeds min(users, tracks) = " +
                     std::to_string(std::min(n, m)));
  }

  const auto d = static_cast<Eigen::Index>(cfg.dim);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, cfg.init_scale);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), d);
  Eigen::MatrixXd y(static_cast<Eigen::Index>(m), d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);

  const RowSparse by_track = matrix.scores.transpose();

  AlsResult result;
  auto record = [&] {
    if (!cfg.track_objective) return;
    double obj = als_objective(matrix, x, y, cfg.lambda, cfg.alpha);
    if (!std::isfinite(obj)) throw NumericalError("ALS objective is not finite");
    result.objective.push_back(obj);
  };
  record();
  for (int it = 0; it < cfg.iterations; ++it) {
    result.ill_conditioned_solves += solve_side(matrix.scores, y, x, cfg);
    record();
    result.ill_conditioned_solves += solve_side(by_track, x, y, cfg);
    record();
  }
  if (result.ill_conditioned_solves > 0) {
    spdlog::warn("ALS: {} normal-equation solves exceeded condition threshold {:g}",
                 result.ill_conditioned_solves, cfg.max_condition);
  }
  if (!x.allFinite() || !y.allFinite()) throw NumericalError("ALS produced non-finite factors");
  result.users = to_table(matrix.users, x);
  result.tracks = to_table(matrix.tracks, y);
  return result;
}

}  // namespace coldstart
