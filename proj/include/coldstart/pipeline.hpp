#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coldstart/experiment.hpp"
#include "coldstart/service.hpp"
#include "coldstart/synthetic.hpp"

namespace coldstart {

// Settings shared by the CLI stages. Every stage reads its inputs from and
// writes its artifacts under `out`:
//   bundle/                       gen-data (unless `bundle` points elsewhere)
//   spaces/<space>/               train-embeddings
//   segments/<space>/             segment
//   features/<space>/             build-features
//   models/<space>/               train-regressor
//   recs/<space>/<strategy>/      recommend
//   reports/<space>/              evaluate, report
//   snapshot/<space>/             serve
// Each stage directory holds a manifest.json with the stage config, seed and
// the fingerprints of its inputs and outputs.
struct PipelineConfig {
  std::filesystem::path out = "work";
  std::optional<std::filesystem::path> bundle;
  std::uint64_t seed = 0;
  std::string space = "tt-svd";
  std::size_t segments = 20;
  std::size_t feature_segments = 20;
  std::size_t top_k = 50;
  std::string strategy = "semi";
  std::size_t seeds = 10;
  std::string split = "test";
  std::size_t min_group_size = 10;
  std::uint32_t histogram_bucket = 50;
  std::vector<std::size_t> hidden{400, 300, 200};
  TrainConfig train;
  SpaceConfig space_config;
  SyntheticConfig synthetic;

  std::filesystem::path bundle_dir() const { return bundle ? *bundle : out / "bundle"; }
  std::filesystem::path stage_dir(const std::string& stage) const { return out / stage / space; }
  ExperimentConfig experiment() const;
};

void run_gen_data(const PipelineConfig& cfg);
void run_train_embeddings(const PipelineConfig& cfg);
void run_segment(const PipelineConfig& cfg);
void run_build_features(const PipelineConfig& cfg);
void run_train_regressor(const PipelineConfig& cfg);
void run_recommend(const PipelineConfig& cfg);
EvalReport run_evaluate(const PipelineConfig& cfg);
// Renders report.md from the evaluate outputs; returns the table text.
std::string run_report(const PipelineConfig& cfg);
// Assembles a serving snapshot from the stage artifacts.
std::filesystem::path export_snapshot(const PipelineConfig& cfg);

// Throws MissingArtifactError naming `producer` when the stage manifest is
// absent, and DataError when a recorded input or output no longer matches
// its fingerprint.
void verify_lineage(const std::filesystem::path& out, const std::filesystem::path& stage_dir,
                    const std::string& producer);

// Fingerprint over every regular file below `dir` (relative path + content).
std::string fingerprint_dir(const std::filesystem::path& dir);

}  // namespace coldstart
