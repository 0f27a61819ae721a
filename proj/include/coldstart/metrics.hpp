#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>

#include "coldstart/core.hpp"

namespace coldstart {

// Tracks each cold user listened to after registration day.
using GroundTruth = std::map<UserId, std::set<TrackId>>;

// Relevant tracks among the first K recommended; a repeated track counts once.
std::size_t hits_at_k(std::span<const TrackId> rec, const std::set<TrackId>& truth, std::size_t k);

// hits / K. Throws UsageError for K = 0.
double precision_at_k(std::span<const TrackId> rec, const std::set<TrackId>& truth, std::size_t k);
// hits / |truth|; nullopt for empty truth.
std::optional<double> recall_at_k(std::span<const TrackId> rec, const std::set<TrackId>& truth, std::size_t k);
// Binary relevance, log2(i + 1) discount, ideal DCG over min(K, |truth|)
// hits; nullopt for empty truth.
std::optional<double> ndcg_at_k(std::span<const TrackId> rec, const std::set<TrackId>& truth, std::size_t k);

struct UserScores {
  double precision = 0.0;
  double recall = 0.0;
  double ndcg = 0.0;
};

// nullopt when the user has no ground truth (excluded from means).
std::optional<UserScores> score_user(std::span<const TrackId> rec, const std::set<TrackId>& truth, std::size_t k);

}  // namespace coldstart
