#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "coldstart/core.hpp"
#include "coldstart/sppmi.hpp"

namespace coldstart {

// How singular values are folded into the row embedding.
enum class SvdScaling { u, u_sigma, u_sqrt_sigma };

struct SvdConfig {
  std::size_t dim = 128;
  std::uint64_t seed = 0;
  std::size_t oversample = 10;
  int max_subspace_iterations = 100;
  // Stop once the leading `dim` singular values move less than this
  // (relative) between two subspace iterations.
  double tolerance = 1e-13;
  // Singular values below rank_tolerance * sigma_max count as zero.
  double rank_tolerance = 1e-10;
  SvdScaling scaling = SvdScaling::u_sqrt_sigma;
};

struct SvdEmbedding {
  // Rows: U_d * scale(Sigma_d); contexts: V_d * scale(Sigma_d). Both in
  // double precision; `table` is the float32 export of `rows`.
  Eigen::MatrixXd rows;
  Eigen::MatrixXd contexts;
  std::vector<double> singular_values;  // leading `dim`, descending
  std::size_t zero_padded = 0;          // columns beyond the numerical rank
  int subspace_iterations = 0;
  EmbeddingTable table;
};

// Truncated SVD by randomized subspace iteration. Columns are sign
// canonicalized: the largest-magnitude component of each left singular
// vector is positive.
SvdEmbedding train_svd_embeddings(const SparseMatrix& matrix, const std::vector<TrackId>& ids,
                                  const SvdConfig& cfg);

}  // namespace coldstart
