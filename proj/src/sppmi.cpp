#include "coldstart/sppmi.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "coldstart/errors.hpp"

namespace coldstart {

CooccurrenceCounts CooccurrenceCounts::from_matrix(std::vector<TrackId> tracks, SparseMatrix counts) {
  if (counts.rows() != counts.cols() || static_cast<std::size_t>(counts.rows()) != tracks.size()) {
    throw DimensionError("co-occurrence matrix must be square and match the id list");
  }
  CooccurrenceCounts c;
  c.tracks = std::move(tracks);
  c.counts = std::move(counts);
  c.counts.makeCompressed();
  c.marginals.assign(c.tracks.size(), 0.0);
  for (Eigen::Index r = 0; r < c.counts.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(c.counts, r); it; ++it) {
      if (it.value() < 0.0) throw DataError("negative co-occurrence count");
      c.marginals[r] += it.value();
    }
  }
  for (double m : c.marginals) c.total += m;
  return c;
}

CooccurrenceCounts count_cooccurrences(const std::vector<std::vector<TrackId>>& collections,
                                       const Catalog& catalog) {
  std::vector<TrackId> ids;
  for (const auto& [id, _] : catalog.tracks()) ids.push_back(id);
  auto pos = [&](TrackId t) {
    return static_cast<int>(std::lower_bound(ids.begin(), ids.end(), t) - ids.begin());
  };
  std::map<std::pair<int, int>, double> cells;
  for (const auto& coll : collections) {
    std::vector<int> members;
    for (auto t : coll) {
      if (catalog.contains(t)) members.push_back(pos(t));
    }
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        cells[{members[a], members[b]}] += 1.0;
        cells[{members[b], members[a]}] += 1.0;
      }
    }
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(cells.size());
  for (const auto& [rc, v] : cells) triplets.emplace_back(rc.first, rc.second, v);
  SparseMatrix counts(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(ids.size()));
  counts.setFromTriplets(triplets.begin(), triplets.end());
  return CooccurrenceCounts::from_matrix(std::move(ids), std::move(counts));
}

std::vector<std::vector<TrackId>> playlist_collections(const Catalog& catalog) {
  std::vector<std::vector<TrackId>> out;
  for (const auto& [_, tracks] : catalog.playlists()) out.push_back(tracks);
  return out;
}

double sppmi_value(double c_ij, double c_i, double c_j, double total, double shift_k) {
  if (c_ij <= 0.0) return 0.0;
  const double pmi = std::log(total * c_ij / (c_i * c_j));
  return std::max(pmi - std::log(shift_k), 0.0);
}

SparseMatrix build_sppmi(const CooccurrenceCounts& counts, double shift_k) {
  if (!(counts.total > 0.0)) throw DataError("co-occurrence total must be positive");
  if (shift_k < 1.0) throw UsageError("SPPMI shift k must be >= 1");
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index r = 0; r < counts.counts.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(counts.counts, r); it; ++it) {
      const double v = sppmi_value(it.value(), counts.marginals[r], counts.marginals[it.col()], counts.total,
                                   shift_k);
      if (v > 0.0) triplets.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), v);
    }
  }
  SparseMatrix s(counts.counts.rows(), counts.counts.cols());
  s.setFromTriplets(triplets.begin(), triplets.end());
  s.makeCompressed();
  return s;
}

}  // namespace coldstart
