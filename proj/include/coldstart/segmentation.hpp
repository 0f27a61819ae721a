#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coldstart/catalog.hpp"
#include "coldstart/core.hpp"
#include "coldstart/interactions.hpp"

namespace coldstart {

struct KMeansConfig {
  std::size_t k = 20;
  std::uint64_t seed = 0;
  int max_iter = 100;
  double tol = 1e-4;  // relative centroid movement
};

struct KMeansResult {
  std::vector<std::size_t> assignment;  // per point
  Eigen::MatrixXd centroids;            // k x d
  std::vector<double> objective;        // within-cluster sum of squares per iteration
  int iterations = 0;
  bool converged = false;
  std::size_t reseeded = 0;  // empty clusters re-seeded over the run
};

// Lloyd's algorithm with k-means++ seeding. Points are rows. Empty clusters
// take the point farthest from its centroid. Throws UsageError when k
// exceeds the number of points.
KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansConfig& cfg);

double within_cluster_sum_of_squares(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                                     std::span<const std::size_t> assignment);

// Argmin Euclidean distance over centroid rows; ties go to the lowest index.
std::size_t nearest_centroid(std::span<const float> v, std::span<const float> centroids, std::size_t dim);
std::size_t nearest_centroid(const Eigen::Ref<const Eigen::VectorXd>& v, const Eigen::MatrixXd& centroids);

// Cosine mode L2-normalizes points and queries before Euclidean assignment.
enum class DistanceMode : std::uint32_t { euclidean = 0, cosine = 1 };

enum class PopularityCount { distinct_listeners, streams };

struct Segmentation {
  std::size_t k = 0;
  std::size_t dim = 0;
  DistanceMode mode = DistanceMode::euclidean;
  std::vector<float> centroids;  // k x dim, row-major
  std::vector<std::pair<UserId, std::uint32_t>> assignment;  // ascending user id
  // Per segment, ranked (track, listener count).
  std::vector<std::vector<Scored>> top_items;

  std::span<const float> centroid(std::size_t s) const { return {centroids.data() + s * dim, dim}; }
  std::optional<std::size_t> segment_of(UserId user) const;
  std::vector<UserId> members(std::size_t s) const;
  // Dimensions consistent, assignments in range, no empty segment.
  void validate() const;

  friend bool operator==(const Segmentation&, const Segmentation&) = default;
};

// Clusters the rows of `users` and records their assignment. top_items
// holds k empty lists until filled from segment_top_items.
Segmentation build_segmentation(const EmbeddingTable& users, const KMeansConfig& cfg,
                                DistanceMode mode = DistanceMode::euclidean);

std::size_t assign_segment(std::span<const float> v, const Segmentation& seg);

// Ranks tracks per segment by the number of distinct members who streamed
// them (or raw stream counts); ties by global popularity rank then id.
std::vector<std::vector<Scored>> segment_top_items(const Segmentation& seg, const InteractionLog& log,
                                                   const Catalog& catalog, std::size_t k,
                                                   PopularityCount count = PopularityCount::distinct_listeners);

struct SegmentProfile {
  std::string country = "unknown";
  std::string age_class = "unknown";
  std::vector<std::string> genres;  // up to three, most common first
  std::size_t members = 0;
};

SegmentProfile describe_segment(std::size_t segment, const Segmentation& seg, const UserUniverse& universe,
                                const InteractionLog& log, const Catalog& catalog);

// Container: "SEG1", u32 version, u32 k, u32 d, u32 mode, centroid block in
// EMB1 layout (ids 0..k-1), u64 n, n x (u64 user, u32 segment), then per
// segment u32 length followed by (u64 track, u32 listeners) pairs.
void save_segmentation(const std::filesystem::path& path, const Segmentation& seg);
Segmentation load_segmentation(const std::filesystem::path& path);
std::string segmentation_to_text(const Segmentation& seg);

}  // namespace coldstart
