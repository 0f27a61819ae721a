#pragma once

#include <vector>

#include <Eigen/SparseCore>

#include "coldstart/catalog.hpp"

namespace coldstart {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Symmetric track x track co-occurrence counts.
struct CooccurrenceCounts {
  std::vector<TrackId> tracks;  // row/column ids, ascending
  SparseMatrix counts;
  std::vector<double> marginals;  // row sums
  double total = 0.0;             // sum of all counts

  // Marginals and total derived from a symmetric count matrix.
  static CooccurrenceCounts from_matrix(std::vector<TrackId> tracks, SparseMatrix counts);
};

// Counts every unordered pair of distinct tracks sharing a collection (both
// directions). Tracks outside the catalog are ignored; `tracks` lists every
// catalog track so that the matrix order equals the catalog size.
CooccurrenceCounts count_cooccurrences(const std::vector<std::vector<TrackId>>& collections,
                                       const Catalog& catalog);

// Playlists of the catalog, the default collection source.
std::vector<std::vector<TrackId>> playlist_collections(const Catalog& catalog);

// max(log(N c_ij / (c_i c_j)) - log k, 0).
double sppmi_value(double c_ij, double c_i, double c_j, double total, double shift_k);

// Shifted positive PMI; entries that clamp to zero are not stored.
SparseMatrix build_sppmi(const CooccurrenceCounts& counts, double shift_k = 1.0);

}  // namespace coldstart
