#include "coldstart/svd_embedding.hpp"

#include <cmath>
#include <random>

#include <spdlog/spdlog.h>

#include "coldstart/errors.hpp"

namespace coldstart {

namespace {

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace

SvdEmbedding train_svd_embeddings(const SparseMatrix& matrix, const std::vector<TrackId>& ids,
                                  const SvdConfig& cfg) {
  const auto n = static_cast<std::size_t>(matrix.rows());
  if (cfg.dim == 0) throw UsageError("SVD dimension must be >= 1");
  if (matrix.rows() != matrix.cols()) throw DimensionError("SVD embedding expects a square matrix");
  if (ids.size() != n) throw DimensionError("id list does not match matrix order");
  if (cfg.dim > n) {
    throw UsageError("SVD dimension " + std::to_string(cfg.dim) + " exceeds matrix order " + std::to_string(n));
  }
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  const auto l = static_cast<Eigen::Index>(std::min(n, cfg.dim + cfg.oversample));
  const auto rows = static_cast<Eigen::Index>(n);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd omega(rows, l);
  for (Eigen::Index i = 0; i < omega.size(); ++i) omega.data()[i] = normal(rng);

  const SparseMatrix transposed = matrix.transpose();
  Eigen::MatrixXd q = orthonormalize(matrix * omega);
  Eigen::VectorXd previous = Eigen::VectorXd::Zero(d);
  SvdEmbedding out;
  for (int it = 0; it < cfg.max_subspace_iterations; ++it) {
    Eigen::MatrixXd z = orthonormalize(transposed * q);
    q = orthonormalize(matrix * z);
    out.subspace_iterations = it + 1;
    // Singular values of Q' S approximate the leading ones of S.
    Eigen::MatrixXd b = (transposed * q).transpose();
    Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(b).singularValues().head(d);
    const double scale = std::max(sv.size() ? sv(0) : 0.0, 1e-300);
    const bool converged = ((sv - previous).cwiseAbs().maxCoeff() <= cfg.tolerance * scale);
    previous = sv;
    if (converged || l == rows) break;
  }

  const Eigen::MatrixXd b = (transposed * q).transpose();  // l x n
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::MatrixXd u = q * svd.matrixU().leftCols(d);
  Eigen::MatrixXd v = svd.matrixV().leftCols(d);
  Eigen::VectorXd sigma = svd.singularValues().head(d);

  const double sigma_max = sigma.size() ? sigma(0) : 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (sigma_max == 0.0 || sigma(j) <= cfg.rank_tolerance * sigma_max) {
      u.col(j).setZero();
      v.col(j).setZero();
      sigma(j) = 0.0;
      ++out.zero_padded;
      continue;
    }
    Eigen::Index arg = 0;
    u.col(j).cwiseAbs().maxCoeff(&arg);
    if (u(arg, j) < 0.0) {
      u.col(j) *= -1.0;
      v.col(j) *= -1.0;
    }
  }
  if (out.zero_padded > 0) {
    spdlog::warn("SVD: dimension {} exceeds numerical rank; {} zero columns padded", cfg.dim, out.zero_padded);
  }

  Eigen::VectorXd factor(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    switch (cfg.scaling) {
      case SvdScaling::u: factor(j) = 1.0; break;
      case SvdScaling::u_sigma: factor(j) = sigma(j); break;
      case SvdScaling::u_sqrt_sigma: factor(j) = std::sqrt(sigma(j)); break;
    }
  }
  out.rows = u * factor.asDiagonal();
  out.contexts = v * factor.asDiagonal();
  out.singular_values.assign(sigma.data(), sigma.data() + d);
  if (!out.rows.allFinite()) throw NumericalError("SVD produced non-finite embeddings");

  out.table = EmbeddingTable(cfg.dim);
  std::vector<double> row(cfg.dim);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) row[j] = out.rows(i, j);
    out.table.add(ids[i], std::span<const double>(row));
  }
  return out;
}

}  // namespace coldstart
