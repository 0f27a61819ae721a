#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "coldstart/catalog.hpp"
#include "coldstart/interactions.hpp"

namespace coldstart {

// Linear affinity rule:
//   score(u, t) = stream * #streams(u, t) + favorite * 1[t, its album or its artist favorited by u]
struct AffinityWeights {
  double stream = 1.0;
  double favorite = 2.0;

  // Keys are signal names; absent keys keep their defaults. Throws UnknownSignalError for unknown names and
  // DataError for known signals without an affinity rule or negative weights.
  static AffinityWeights from_map(const std::map<std::string, double>& weights);
};

// Sparse user x track matrix of nonnegative scores; zeros are not stored.
struct AffinityMatrix {
  std::vector<UserId> users;    // row ids, ascending
  std::vector<TrackId> tracks;  // column ids, ascending
  Eigen::SparseMatrix<double, Eigen::RowMajor> scores;

  bool empty() const { return scores.nonZeros() == 0; }
};

AffinityMatrix build_affinity_matrix(const InteractionLog& log, const Catalog& catalog,
                                     const AffinityWeights& weights = {});

}  // namespace coldstart
