#include <doctest.h>

#include <filesystem>

#include "coldstart/binary_io.hpp"
#include "coldstart/embedding_io.hpp"
#include "coldstart/errors.hpp"
#include "coldstart/pipeline.hpp"
#include "support.hpp"

using namespace coldstart;
namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = io::read_file(e.path());
  }
  return files;
}

void run_everything(const PipelineConfig& p) {
  test::run_tiny_stages(p);
  for (auto s : kAllStrategies) {
    auto q = p;
    q.strategy = std::string(to_string(s));
    run_recommend(q);
  }
  run_evaluate(p);
  run_report(p);
  export_snapshot(p);
}

}  // namespace

TEST_CASE("stages refuse to run without their inputs") {
  test::TempDir dir("lineage");
  const auto p = test::tiny_pipeline(dir.path() / "work");
  CHECK_THROWS_AS(run_train_embeddings(p), MissingArtifactError);
  run_gen_data(p);
  try {
    run_segment(p);
    FAIL("expected MissingArtifactError");
  } catch (const MissingArtifactError& e) {
    CHECK(std::string(e.what()).find("train-embeddings") != std::string::npos);
  }
  run_train_embeddings(p);
  CHECK_THROWS_AS(run_train_regressor(p), MissingArtifactError);
  CHECK_THROWS_AS(run_report(p), MissingArtifactError);
}

TEST_CASE("changed upstream artifacts break lineage") {
  test::TempDir dir("tamper");
  const auto p = test::tiny_pipeline(dir.path() / "work");
  run_gen_data(p);
  run_train_embeddings(p);
  const auto users = p.stage_dir("spaces") / "users.emb";
  auto bytes = io::read_file(users);
  bytes.back() ^= 0x01;
  io::write_file(users, bytes);
  CHECK_THROWS_WITH_AS(run_segment(p), doctest::Contains("lineage mismatch"), DataError);
  fs::remove(users);
  CHECK_THROWS_WITH_AS(run_segment(p), doctest::Contains("no longer exists"), DataError);
}

TEST_CASE("every stage writes its artifacts and identical runs match byte for byte") {
  test::TempDir dir("pipeline");
  const auto a = test::tiny_pipeline(dir.path() / "a");
  const auto b = test::tiny_pipeline(dir.path() / "b");
  run_everything(a);
  run_everything(b);
  for (const char* f : {"bundle/manifest.json", "spaces/tt-svd/tracks.emb", "segments/tt-svd/segmentation.seg",
                        "segments/tt-svd/profiles.tsv", "features/tt-svd/cold_features.emb",
                        "models/tt-svd/model.csreg", "recs/tt-svd/semi/recommendations.tsv",
                        "recs/tt-svd/feat-cluster/manifest.json", "reports/tt-svd/eval.csv",
                        "reports/tt-svd/breakdown.csv", "reports/tt-svd/report.md", "snapshot/tt-svd/manifest.json"}) {
    CHECK_MESSAGE(fs::exists(a.out / f), f);
  }
  CHECK(read_tree(a.out) == read_tree(b.out));
  const auto recs = recommendations_from_text(io::read_file(a.out / "recs/tt-svd/semi/recommendations.tsv"));
  const auto bundle = load_bundle(a.bundle_dir());
  CHECK(recs.size() == bundle.test.size());
  for (const auto& r : recs) CHECK(r.items.size() == 10);
}

TEST_CASE("a single segment reproduces the popularity ranking") {
  test::TempDir dir("onesegment");
  auto p = test::tiny_pipeline(dir.path() / "work");
  p.segments = 1;
  test::run_tiny_stages(p);
  run_recommend(p);
  auto q = p;
  q.strategy = "popularity";
  run_recommend(q);
  const auto semi = recommendations_from_text(io::read_file(p.stage_dir("recs") / "semi" / "recommendations.tsv"));
  const auto pop = recommendations_from_text(io::read_file(p.stage_dir("recs") / "popularity" / "recommendations.tsv"));
  REQUIRE(semi.size() == pop.size());
  for (std::size_t i = 0; i < semi.size(); ++i) {
    CHECK(semi[i].track_ids() == pop[i].track_ids());
    CHECK(semi[i].items == pop[i].items);
  }
}

TEST_CASE("directory fingerprints track content and names") {
  test::TempDir dir("fpdir");
  io::write_file(dir.path() / "a.txt", "x");
  const auto before = fingerprint_dir(dir.path());
  CHECK(fingerprint_dir(dir.path()) == before);
  io::write_file(dir.path() / "a.txt", "y");
  CHECK(fingerprint_dir(dir.path()) != before);
  CHECK_THROWS_AS(fingerprint_dir(dir.path() / "missing"), DataError);
}
