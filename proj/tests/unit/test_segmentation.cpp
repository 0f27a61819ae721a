#include <doctest.h>

#include <random>

#include "coldstart/errors.hpp"
#include "coldstart/segmentation.hpp"
#include "../oracles.hpp"
#include "support.hpp"

using namespace coldstart;

using oracle::exhaustive_kmeans_optimum;

TEST_CASE("k-means on the four-point line") {
  Eigen::MatrixXd p(4, 1);
  p << 0, 1, 9, 10;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = kmeans(p, {2, seed, 100, 1e-4});
    std::vector<double> c{r.centroids(0, 0), r.centroids(1, 0)};
    std::sort(c.begin(), c.end());
    CHECK(c[0] == doctest::Approx(0.5));
    CHECK(c[1] == doctest::Approx(9.5));
    CHECK(r.objective.back() == doctest::Approx(exhaustive_kmeans_optimum(p, 2)));
  }
}

TEST_CASE("k-means objective is monotone and never leaves a cluster empty") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Eigen::MatrixXd p(40, 3);
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j) p(i, j) = g(rng) + (i % 4) * 3.0;
    // Duplicate points make empty clusters likely.
    for (Eigen::Index i = 20; i < 40; ++i) p.row(i) = p.row(0);
    const auto r = kmeans(p, {12, seed, 50, 0.0});
    for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] <= r.objective[i - 1] + 1e-9);
    std::vector<std::size_t> sizes(12);
    for (auto a : r.assignment) ++sizes[a];
    for (auto s : sizes) CHECK(s > 0);
  }
}

TEST_CASE("k-means matches the exhaustive optimum on tiny well-separated sets") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0, 0.1);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd p(7, 2);
    for (Eigen::Index i = 0; i < 7; ++i) {
      p(i, 0) = (i % 3) * 10 + g(rng);
      p(i, 1) = g(rng);
    }
    const auto r = kmeans(p, {3, static_cast<std::uint64_t>(trial), 100, 0.0});
    CHECK(r.objective.back() == doctest::Approx(exhaustive_kmeans_optimum(p, 3)).epsilon(1e-9));
  }
}

TEST_CASE("k-means argument checks") {
  Eigen::MatrixXd p(2, 1);
  p << 0, 1;
  CHECK_THROWS_AS(kmeans(p, {3, 0, 10, 1e-4}), UsageError);
  CHECK_THROWS_AS(kmeans(p, {0, 0, 10, 1e-4}), UsageError);
}

TEST_CASE("nearest centroid breaks ties toward the lower index") {
  const float c[] = {-1, 1};
  const float v[] = {0};
  CHECK(nearest_centroid(v, c, 1) == 0);
  const float w[] = {0.9f};
  CHECK(nearest_centroid(w, c, 1) == 1);
}

TEST_CASE("segmentation build, ranking and container roundtrip") {
  EmbeddingTable users(2);
  const float a[] = {0, 0}, b[] = {0.1f, 0}, c[] = {5, 5}, d[] = {5.1f, 5};
  users.add(1, std::span<const float>(a));
  users.add(2, std::span<const float>(b));
  users.add(3, std::span<const float>(c));
  users.add(4, std::span<const float>(d));
  auto seg = build_segmentation(users, {2, 3, 100, 1e-4});
  CHECK_NOTHROW(seg.validate());
  CHECK(seg.segment_of(1) == seg.segment_of(2));
  CHECK(seg.segment_of(3) == seg.segment_of(4));
  CHECK(seg.segment_of(1) != seg.segment_of(3));
  CHECK_FALSE(seg.segment_of(99));

  Catalog cat;
  cat.add_track(10, {1, 1, {}, 3});
  cat.add_track(11, {1, 1, {}, 1});
  cat.add_track(12, {1, 1, {}, 2});
  InteractionLog log({{1, 0, Signal::stream, EntityKind::track, 10},
                      {1, 1, Signal::stream, EntityKind::track, 10},
                      {2, 0, Signal::stream, EntityKind::track, 12},
                      {2, 1, Signal::stream, EntityKind::track, 11},
                      {2, 2, Signal::skip, EntityKind::track, 10},
                      {3, 0, Signal::stream, EntityKind::track, 12}});
  seg.top_items = segment_top_items(seg, log, cat, 5);
  const auto& low = seg.top_items[*seg.segment_of(1)];
  REQUIRE(low.size() == 3);
  // One listener each: popularity rank decides.
  CHECK(low[0].id == 11);
  CHECK(low[1].id == 12);
  CHECK(low[2].id == 10);
  const auto by_streams = segment_top_items(seg, log, cat, 5, PopularityCount::streams);
  CHECK(by_streams[*seg.segment_of(1)][0].id == 10);
  CHECK(seg.top_items[*seg.segment_of(3)].size() == 1);

  const float q[] = {4, 4};
  CHECK(assign_segment(q, seg) == *seg.segment_of(3));

  test::TempDir dir("seg");
  save_segmentation(dir.path() / "s.seg", seg);
  CHECK(load_segmentation(dir.path() / "s.seg") == seg);
  CHECK_FALSE(segmentation_to_text(seg).empty());
}

TEST_CASE("cosine mode normalizes before assignment") {
  EmbeddingTable users(2);
  const float a[] = {1, 0}, b[] = {10, 0.5f}, c[] = {0, 1}, d[] = {0.2f, 7};
  users.add(1, std::span<const float>(a));
  users.add(2, std::span<const float>(b));
  users.add(3, std::span<const float>(c));
  users.add(4, std::span<const float>(d));
  const auto seg = build_segmentation(users, {2, 0, 100, 1e-4}, DistanceMode::cosine);
  CHECK(seg.segment_of(1) == seg.segment_of(2));
  CHECK(seg.segment_of(3) == seg.segment_of(4));
  const float q[] = {100, 1};
  CHECK(assign_segment(q, seg) == *seg.segment_of(1));
}
