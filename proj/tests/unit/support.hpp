#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "coldstart/pipeline.hpp"
#include "coldstart/synthetic.hpp"

namespace coldstart::test {

// Small planted bundle that generates in well under a second.
inline SyntheticConfig tiny_config(std::uint64_t seed = 1) {
  SyntheticConfig c;
  c.genres = 4;
  c.warm_users = 200;
  c.cold_users = 60;
  c.tracks = 240;
  c.dim = 8;
  c.artists_per_genre = 3;
  c.albums_per_artist = 2;
  c.playlists = 150;
  c.playlist_length = 10;
  c.countries = 3;
  c.history_listens_mean = 30;
  c.min_truth = 10;
  c.truth_extra_mean = 5;
  c.seed = seed;
  return c;
}

// Pipeline settings sized for unit tests.
inline PipelineConfig tiny_pipeline(const std::filesystem::path& out, std::uint64_t seed = 1) {
  PipelineConfig p;
  p.out = out;
  p.seed = seed;
  p.synthetic = tiny_config(seed);
  p.space_config.dim = p.synthetic.dim;
  p.segments = 4;
  p.feature_segments = 4;
  p.top_k = 10;
  p.seeds = 2;
  p.min_group_size = 5;
  p.histogram_bucket = 20;
  p.hidden = {16, 8};
  p.train.learning_rate = 0.05;
  p.train.batch_size = 32;
  p.train.epochs = 3;
  p.train.momentum = 0.9;
  return p;
}

// gen-data through train-regressor.
inline void run_tiny_stages(const PipelineConfig& p) {
  run_gen_data(p);
  run_train_embeddings(p);
  run_segment(p);
  run_build_features(p);
  run_train_regressor(p);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("coldstart-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace coldstart::test
