#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coldstart/als.hpp"
#include "coldstart/dataset.hpp"
#include "coldstart/entity_embeddings.hpp"
#include "coldstart/features.hpp"
#include "coldstart/metrics.hpp"
#include "coldstart/recommenders.hpp"
#include "coldstart/regressor.hpp"
#include "coldstart/segmentation.hpp"
#include "coldstart/svd_embedding.hpp"

namespace coldstart {

// ---- embedding spaces ----

struct SpaceConfig {
  std::size_t dim = 32;
  std::uint64_t seed = 0;
  int als_iterations = 15;
  double als_lambda = 0.1;
  double als_alpha = 40.0;
  double sppmi_shift = 1.0;
};

struct SpaceData {
  std::string name;
  EmbeddingTable tracks;
  EmbeddingTable warm_users;
};

// "tt-svd": SPPMI of playlist co-occurrences (warm histories when the
// catalog has no playlists), truncated SVD, users as stream-weighted history
// means. "ut-als": implicit ALS on warm affinities. Any other name is read
// from the bundle; warm users default to history means there as well.
SpaceData prepare_space(const DatasetBundle& bundle, const std::string& space, const SpaceConfig& cfg);

// ---- features ----

struct FeatureSet {
  ChannelSpec spec;
  GroupEmbeddings groups;
  EntityEmbeddings entities;
  EmbeddingTable warm_features;  // warm users with a target embedding
  EmbeddingTable warm_targets;   // aligned with warm_features
  EmbeddingTable cold_features;  // the evaluated split
};

FeatureSet build_feature_set(const DatasetBundle& bundle, const SpaceData& space, std::span<const UserId> cold_users,
                             std::size_t min_group_size = 10);

// ---- per-strategy recommendation ----

struct StrategyInputs {
  const InteractionLog* cold_log = nullptr;
  const PopularityTable* popularity = nullptr;
  const EmbeddingTable* tracks = nullptr;
  const EmbeddingTable* cold_embeddings = nullptr;  // predicted
  const Segmentation* segmentation = nullptr;       // with top items
  const EmbeddingTable* cold_features = nullptr;
  const FeatureClusterModel* feature_clusters = nullptr;
};

// Throws UsageError when an input the strategy needs is missing.
std::vector<Recommendation> recommend_users(Strategy strategy, std::span<const UserId> users,
                                            const StrategyInputs& in, std::size_t k);

// ---- experiment ----

struct ExperimentConfig {
  std::vector<Strategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  std::size_t top_k = 50;
  std::size_t seeds = 10;
  std::uint64_t base_seed = 0;
  std::size_t segments = 20;
  std::size_t feature_segments = 20;
  std::string split = "test";
  std::vector<std::size_t> hidden{400, 300, 200};
  TrainConfig train;
  std::size_t min_group_size = 10;

  // Canonical key=value text; the basis of the report fingerprint.
  std::string to_text() const;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation across seeds
};

struct StrategyReport {
  Strategy strategy = Strategy::popularity;
  MetricSummary precision, recall, ndcg;
  std::vector<UserScores> per_seed;       // mean over users, per seed
  std::map<UserId, UserScores> per_user;  // mean over seeds
};

struct EvalReport {
  std::string space;
  std::string split;
  std::size_t top_k = 0;
  std::size_t seeds = 0;
  std::size_t users = 0;     // scored
  std::size_t excluded = 0;  // empty ground truth
  std::string fingerprint;
  std::vector<StrategyReport> strategies;

  const StrategyReport& get(Strategy s) const;
};

// Artifacts of one seed, kept for reporting and for the CLI stages.
struct SeedArtifacts {
  std::uint64_t seed = 0;
  RegressorModel model;
  std::vector<EpochLoss> history;
  Segmentation segmentation;
  EmbeddingTable cold_embeddings;
  FeatureClusterModel feature_clusters;
  std::map<Strategy, std::vector<Recommendation>> recommendations;
};

// Retrains the regressor and both clusterings for every seed over fixed
// features, recommends for the split's users and scores them against the
// ground truth. `first_seed`, when given, receives the artifacts of the
// first seed.
EvalReport run_experiment(const DatasetBundle& bundle, const SpaceData& space, const FeatureSet& features,
                          const ExperimentConfig& cfg, SeedArtifacts* first_seed = nullptr);

SeedArtifacts run_seed(const DatasetBundle& bundle, const SpaceData& space, const FeatureSet& features,
                       const ExperimentConfig& cfg, std::uint64_t seed, std::span<const UserId> users);

// Mean and sample standard deviation (0 for fewer than two values).
MetricSummary summarize(std::span<const double> values);

// CSV with one row per strategy, fractions in [0, 1].
std::string report_csv(const EvalReport& report);
// Fixed-width table of Precision/Recall/NDCG@K in percent, mean +- std.
std::string report_table(const EvalReport& report);
std::string per_user_csv(const EvalReport& report);

// ---- breakdowns ----

enum class InteractionDimension { onboarding, streams, skips, events };

std::string_view to_string(InteractionDimension d);
std::size_t count_interactions(std::span<const Event> events, InteractionDimension d);

struct CountBin {
  std::size_t lo = 0;
  std::size_t hi = std::numeric_limits<std::size_t>::max();  // inclusive
  std::string label() const;
};

std::vector<CountBin> default_bins();

struct BreakdownRow {
  InteractionDimension dimension = InteractionDimension::events;
  CountBin bin;
  std::size_t users = 0;
  std::optional<double> mean_precision;  // absent for an empty bin
};

// Per-user precision bucketed by registration-day interaction counts.
std::vector<BreakdownRow> breakdown_by_interaction(const std::map<UserId, UserScores>& per_user,
                                                   const InteractionLog& cold_log,
                                                   std::span<const InteractionDimension> dimensions,
                                                   std::span<const CountBin> bins);
std::string breakdown_csv(const std::vector<BreakdownRow>& rows, Strategy strategy);

struct HistogramBucket {
  std::uint32_t first_rank = 0;
  std::uint32_t last_rank = 0;
  std::size_t count = 0;
  double frequency = 0.0;
};

// Recommended slots per popularity-rank bucket over ranks 1..catalog size.
std::vector<HistogramBucket> popularity_distribution(std::span<const Recommendation> recs, const Catalog& catalog,
                                                     std::uint32_t bucket_size);
std::string histogram_csv(const std::vector<HistogramBucket>& buckets, Strategy strategy);

}  // namespace coldstart
