#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "coldstart/affinity.hpp"
#include "coldstart/core.hpp"

namespace coldstart {

struct AlsConfig {
  std::size_t dim = 256;
  double lambda = 0.1;  // L2 regularization
  double alpha = 40.0;  // confidence slope: c = 1 + alpha * score
  int iterations = 15;
  std::uint64_t seed = 0;
  double init_scale = 0.1;
  // Normal-equation solves with a larger condition estimate are counted.
  double max_condition = 1e10;
  // Evaluate the weighted objective after every half-step.
  bool track_objective = true;
};

struct AlsResult {
  EmbeddingTable users;
  EmbeddingTable tracks;
  // Initial objective, then one entry per half-step (users, tracks, users, ...).
  std::vector<double> objective;
  std::size_t ill_conditioned_solves = 0;
};

// Implicit-feedback weighted matrix factorization by alternating ridge
// solves: preference p = 1[score > 0], confidence c = 1 + alpha * score.
AlsResult train_als(const AffinityMatrix& matrix, const AlsConfig& cfg);

// sum_{u,i} c_ui (p_ui - x_u . y_i)^2 + lambda (|X|^2 + |Y|^2), with
// X as users x d and Y as tracks x d.
double als_objective(const AffinityMatrix& matrix, const Eigen::MatrixXd& users,
                     const Eigen::MatrixXd& tracks, double lambda, double alpha);

}  // namespace coldstart
