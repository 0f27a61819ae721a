#include "coldstart/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "coldstart/errors.hpp"

namespace coldstart {

namespace {

// Relevance of each of the first K positions.
std::vector<bool> relevance(std::span<const TrackId> rec, const std::set<TrackId>& truth, std::size_t k) {
  const auto n = std::min(k, rec.size());
  std::vector<bool> rel(n, false);
  std::unordered_set<TrackId> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (seen.insert(rec[i]).second && truth.contains(rec[i])) rel[i] = true;
  }
  return rel;
}

}  // namespace

std::size_t hits_at_k(std::span<const TrackId> rec, const std::set<TrackId>& truth, std::size_t k) {
  auto rel = relevance(rec, truth, k);
  return static_cast<std::size_t>(std::count(rel.begin(), rel.end(), true));
}

double precision_at_k(std::span<const TrackId> rec, const std::set<TrackId>& truth, std::size_t k) {
  if (k == 0) throw UsageError("precision@K needs K >= 1");
  return double(hits_at_k(rec, truth, k)) / double(k);
}

std::optional<double> recall_at_k(std::span<const TrackId> rec, const std::set<TrackId>& truth, std::size_t k) {
  if (truth.empty()) return std::nullopt;
  return double(hits_at_k(rec, truth, k)) / double(truth.size());
}

std::optional<double> ndcg_at_k(std::span<const TrackId> rec, const std::set<TrackId>& truth, std::size_t k) {
  if (truth.empty()) return std::nullopt;
  if (k == 0) throw UsageError("NDCG@K needs K >= 1");
  auto rel = relevance(rec, truth, k);
  double dcg = 0.0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (rel[i]) dcg += 1.0 / std::log2(double(i) + 2.0);
  }
  double idcg = 0.0;
  const auto ideal = std::min(k, truth.size());
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(double(i) + 2.0);
  return dcg / idcg;
}

std::optional<UserScores> score_user(std::span<const TrackId> rec, const std::set<TrackId>& truth, std::size_t k) {
  if (truth.empty()) return std::nullopt;
  return UserScores{precision_at_k(rec, truth, k), *recall_at_k(rec, truth, k), *ndcg_at_k(rec, truth, k)};
}

}  // namespace coldstart
