#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "coldstart/binary_io.hpp"
#include "coldstart/catalog.hpp"
#include "coldstart/core.hpp"
#include "coldstart/embedding_io.hpp"
#include "coldstart/errors.hpp"
#include "coldstart/fingerprint.hpp"
#include "coldstart/interactions.hpp"
#include "support.hpp"

using namespace coldstart;

namespace {

EmbeddingTable random_table(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<float> g;
  EmbeddingTable t(d);
  std::vector<float> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : row) v = g(rng);
    t.add(1000 + i * 7, std::span<const float>(row));
  }
  return t;
}

}  // namespace

TEST_CASE("embedding table rejects bad rows") {
  EmbeddingTable t(3);
  const float a[] = {1, 2, 3};
  t.add(5, std::span<const float>(a));
  CHECK(t.contains(5));
  CHECK(t.find(6).empty());
  CHECK_THROWS_AS(t.add(5, std::span<const float>(a)), DataError);
  const float short_row[] = {1, 2};
  CHECK_THROWS_AS(t.add(7, std::span<const float>(short_row)), DimensionError);
  const float nan_row[] = {1, NAN, 3};
  CHECK_THROWS_AS(t.add(8, std::span<const float>(nan_row)), DataError);
}

TEST_CASE("cosine of the zero vector is degenerate") {
  const float z[] = {0, 0};
  const float x[] = {1, 0};
  auto s = cosine_sim(z, x);
  CHECK(s.degenerate);
  CHECK(s.value == 0.0);
  const float y[] = {2, 0};
  CHECK(cosine_sim(x, y).value == doctest::Approx(1.0));
}

TEST_CASE("top-k matches a brute-force sort") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto table = random_table(60, 5, rng);
    std::vector<float> q(5);
    std::normal_distribution<float> g;
    for (auto& v : q) v = g(rng);
    std::unordered_set<EntityId> exclude{table.ids()[0], table.ids()[10]};
    for (auto kind : {SimilarityKind::cosine, SimilarityKind::inner_product}) {
      std::vector<Scored> all;
      for (std::size_t p = 0; p < table.size(); ++p) {
        if (exclude.contains(table.ids()[p])) continue;
        const double s = kind == SimilarityKind::cosine ? cosine_sim(q, table.row(p)).value : inner_product(q, table.row(p));
        all.push_back({table.ids()[p], s});
      }
      std::sort(all.begin(), all.end(), ranks_before);
      all.resize(17);
      CHECK(top_k_by_similarity(q, table, 17, exclude, kind) == all);
    }
  }
  const auto t = random_table(3, 2, rng);
  const float q[] = {1, 1};
  CHECK(top_k_by_similarity(q, t, 10).size() == 3);
  CHECK_THROWS_AS(top_k_by_similarity(q, t, 0), UsageError);
}

TEST_CASE("top-k ties break by ascending id") {
  EmbeddingTable t(2);
  const float r[] = {1, 0};
  for (EntityId id : {9, 3, 6}) t.add(id, std::span<const float>(r));
  const auto top = top_k_by_similarity(r, t, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].id == 3);
  CHECK(top[1].id == 6);
}

TEST_CASE("mean embedding skips unknown ids and flags null") {
  EmbeddingTable t(2);
  const float a[] = {1, 3};
  const float b[] = {3, 5};
  t.add(1, std::span<const float>(a));
  t.add(2, std::span<const float>(b));
  const EntityId ids[] = {1, 2, 99};
  auto m = mean_embedding(ids, t);
  CHECK_FALSE(m.is_null);
  CHECK(m.missing == 1);
  CHECK(m.value[0] == doctest::Approx(2.0));
  CHECK(m.value[1] == doctest::Approx(4.0));
  const EntityId none[] = {42};
  auto n = mean_embedding(none, t);
  CHECK(n.is_null);
  CHECK(is_zero(n.value));
  const double w[] = {3.0, 1.0, 5.0};
  auto wm = mean_embedding(ids, w, t);
  CHECK(wm.value[0] == doctest::Approx(1.5));
}

TEST_CASE("embedding files roundtrip and detect corruption") {
  std::mt19937_64 rng(5);
  const auto t = random_table(25, 4, rng);
  std::stringstream ss;
  write_embeddings(ss, t);
  const std::string bytes = ss.str();
  std::istringstream in(bytes);
  CHECK(read_embeddings(in) == t);
  CHECK(embeddings_from_text(embeddings_to_text(t)) == t);

  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream bad_in(bad);
  try {
    read_embeddings(bad_in);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::bad_magic);
  }
  std::istringstream short_in(bytes.substr(0, bytes.size() - 3));
  try {
    read_embeddings(short_in);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::truncated);
  }
  std::string versioned = bytes;
  versioned[4] = 9;
  std::istringstream v_in(versioned);
  try {
    read_embeddings(v_in);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::version_mismatch);
  }
}

TEST_CASE("float text is shortest roundtrip") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double d = u(rng);
    CHECK(io::parse_double(io::format_double(d)) == d);
    const float f = static_cast<float>(d);
    CHECK(io::parse_float(io::format_float(f)) == f);
  }
  CHECK(io::format_double(0.5) == "0.5");
  CHECK_THROWS_AS(io::parse_double("1.5x"), DataError);
}

TEST_CASE("interaction log sorts and slices by day") {
  InteractionLog log({{2, 86400 * 3 + 10, Signal::stream, EntityKind::track, 7},
                      {1, 86400 * 5 + 1, Signal::skip, EntityKind::track, 8},
                      {1, 86400 * 4 + 99, Signal::stream, EntityKind::track, 9}});
  CHECK(log.users() == std::vector<UserId>{1, 2});
  const auto u1 = log.for_user(1);
  REQUIRE(u1.size() == 2);
  CHECK(u1[0].item == 9);
  CHECK(registration_day_slice(u1, 4).size() == 1);
  CHECK(log.for_user(3).empty());
  CHECK(day_of(-1) == -1);
  CHECK(day_of(86399) == 0);
}

TEST_CASE("vocabulary parsing") {
  for (auto s : kAllSignals) CHECK(parse_signal(to_string(s)) == s);
  for (auto e : kAllEntities) CHECK(parse_entity(to_string(e)) == e);
  CHECK_THROWS_AS(parse_signal("like"), UnknownSignalError);
  CHECK_THROWS_AS(parse_entity("label"), UnknownEntityError);
}

TEST_CASE("catalog validation and derived indexes") {
  Catalog c;
  c.add_track(1, {10, 100, {"rock"}, 2});
  c.add_track(2, {10, 101, {"pop", "rock"}, 1});
  c.add_track(3, {11, 102, {"jazz"}, 3});
  c.add_playlist(50, {1, 3});
  CHECK_NOTHROW(c.validate());
  CHECK(c.by_popularity() == std::vector<TrackId>{2, 1, 3});
  CHECK(c.artist_tracks(10).size() == 2);
  CHECK(c.artist_genres(10) == std::vector<std::string>{"pop", "rock"});
  CHECK(c.artist_tracks(12).empty());

  Catalog dup_rank = c;
  dup_rank.add_track(4, {11, 102, {}, 3});
  CHECK_THROWS_AS(dup_rank.validate(), DataError);
  Catalog bad_list = c;
  bad_list.add_playlist(51, {1, 77});
  CHECK_THROWS_AS(bad_list.validate(), DataError);
}

TEST_CASE("age classes") {
  CHECK(age_class(std::nullopt) == AgeClass::unknown);
  CHECK(age_class(17) == AgeClass::under_18);
  CHECK(age_class(18) == AgeClass::from_18_to_24);
  CHECK(age_class(34) == AgeClass::from_25_to_34);
  CHECK(age_class(49) == AgeClass::from_35_to_49);
  CHECK(age_class(50) == AgeClass::over_50);
}

TEST_CASE("user universe keeps warm and cold disjoint") {
  UserUniverse u;
  u.add_warm(1, {});
  u.add_cold(2, {});
  CHECK_NOTHROW(u.validate());
  CHECK(u.is_warm(1));
  CHECK(u.is_cold(2));
  CHECK_THROWS_AS(u.add_cold(1, {}), DataError);
}

TEST_CASE("fingerprints") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fingerprint("a") == "af63dc4c8601ec8c");
  test::TempDir dir("fp");
  io::write_file(dir.path() / "x.txt", "a");
  CHECK(fingerprint_file(dir.path() / "x.txt") == "af63dc4c8601ec8c");
  CHECK(io::read_file(dir.path() / "x.txt") == "a");
}
