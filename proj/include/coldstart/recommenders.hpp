#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coldstart/catalog.hpp"
#include "coldstart/core.hpp"
#include "coldstart/interactions.hpp"
#include "coldstart/segmentation.hpp"

namespace coldstart {

enum class Strategy { semi, full, popularity, reg_streams, feat_cluster };

inline constexpr std::array kAllStrategies{Strategy::semi, Strategy::full, Strategy::popularity,
                                           Strategy::reg_streams, Strategy::feat_cluster};

std::string_view to_string(Strategy s);
// Throws UsageError for unknown names.
Strategy parse_strategy(std::string_view name);

struct Recommendation {
  UserId user = 0;
  Strategy strategy = Strategy::popularity;
  std::optional<std::uint32_t> segment;
  std::vector<Scored> items;  // ranked, unique tracks, non-increasing scores

  std::vector<TrackId> track_ids() const;
  friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

// Every catalog track ranked by distinct streaming listeners in `log`, ties by
// catalog popularity rank then id. Tracks nobody streamed score 0.
struct PopularityTable {
  std::vector<Scored> ranked;

  std::size_t size() const { return ranked.size(); }
  std::string to_text() const;
  static PopularityTable from_text(const std::string& text);
  friend bool operator==(const PopularityTable&, const PopularityTable&) = default;
};

PopularityTable build_popularity_table(const Catalog& catalog, const InteractionLog& log);

// Appends popularity items not already listed until `k` entries (or the
// table runs out). Padded items score min(last score, 0).
void pad_with_popularity(std::vector<Scored>& items, const PopularityTable& popularity, std::size_t k);

Recommendation recommend_popularity(UserId user, const PopularityTable& popularity, std::size_t k);

// Nearest segment's precomputed list, padded from global popularity.
Recommendation recommend_semi_personalized(UserId user, std::span<const float> embedding, const Segmentation& seg,
                                           const PopularityTable& popularity, std::size_t k);

// Cosine nearest tracks. A null embedding falls back to popularity.
Recommendation recommend_full_personalized(UserId user, std::span<const float> embedding,
                                           const EmbeddingTable& tracks, const PopularityTable& popularity,
                                           std::size_t k);

// Mean embedding of the tracks streamed in `events` (each stream counts),
// then nearest tracks; popularity when nothing resolves.
Recommendation recommend_registration_streams(UserId user, std::span<const Event> events,
                                              const EmbeddingTable& tracks, const PopularityTable& popularity,
                                              std::size_t k);

// Segments built from stacked input features instead of embeddings.
struct FeatureClusterModel {
  Segmentation segmentation;
};

FeatureClusterModel fit_feature_clusters(const EmbeddingTable& warm_features, const InteractionLog& warm_log,
                                         const Catalog& catalog, const KMeansConfig& cfg, std::size_t k);

Recommendation recommend_feature_cluster(UserId user, std::span<const float> features,
                                         const FeatureClusterModel& model, const PopularityTable& popularity,
                                         std::size_t k);

// One line per user: user \t strategy \t segment or "-" \t track ids
// comma-separated in rank order \t scores comma-separated.
std::string recommendation_to_line(const Recommendation& rec);
Recommendation recommendation_from_line(std::string_view line);
std::string recommendations_to_text(std::span<const Recommendation> recs);
std::vector<Recommendation> recommendations_from_text(const std::string& text);

}  // namespace coldstart
