#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "coldstart/dataset.hpp"

namespace coldstart {

struct SyntheticConfig {
  std::size_t genres = 10;
  std::size_t warm_users = 5000;
  std::size_t cold_users = 1000;
  std::size_t tracks = 2000;
  std::size_t dim = 32;  // planted space
  std::size_t artists_per_genre = 10;
  std::size_t albums_per_artist = 2;
  std::size_t playlists = 2000;
  std::size_t playlist_length = 20;
  std::size_t countries = 8;

  double noise = 0.2;           // weight of the secondary genre mixture
  double concentration = 0.5;   // Dirichlet concentration of that mixture
  double zipf_exponent = 1.0;   // within-genre track popularity
  double demographic_strength = 4.0;
  double p_unknown_age = 0.1;
  double p_unknown_country = 0.05;

  // Registration day.
  double p_onboarding = 0.6;
  double onboarding_mean = 3.0;  // artists, given onboarding
  double p_stream = 0.7;
  double stream_mean = 5.0;      // streams, given any
  double skip_mean = 1.0;
  double ban_mean = 0.2;
  double search_mean = 0.5;
  double favorite_mean = 0.5;

  // After registration day.
  double history_listens_mean = 100.0;
  std::int64_t history_days = 60;
  std::size_t min_truth = 50;
  double truth_extra_mean = 20.0;
  std::int64_t truth_days = 30;

  double embedding_noise = 0.3;
  double validation_fraction = 0.5;
  std::uint64_t seed = 0;

  void validate() const;

  // Expected per-user registration-day counts implied by the parameters.
  double expected_streams() const { return p_stream * stream_mean; }
  double expected_onboarding() const { return p_onboarding * onboarding_mean; }
  double expected_skips() const { return skip_mean; }
};

struct SyntheticData {
  DatasetBundle bundle;
  std::vector<std::string> genre_names;
  std::map<TrackId, std::size_t> track_genre;
  std::map<UserId, std::vector<double>> mixtures;  // true genre mixture per user
  std::vector<std::vector<std::pair<TrackId, double>>> genre_tracks;  // per genre, (track, sampling weight)
};

// Planted-preference bundle. Tracks belong to one genre each; users draw a
// primary genre from demographic priors plus a Dirichlet secondary mixture;
// registration-day events, later histories and ground truth all come from
// the same mixture. Includes a "planted" embedding space where tracks sit
// around genre and artist centres. Deterministic given the seed.
SyntheticData generate_synthetic(const SyntheticConfig& cfg);

// Per user, top-K tracks by mixture-weighted sampling probability.
std::vector<TrackId> oracle_recommendation(const SyntheticData& data, UserId user, std::size_t k);

}  // namespace coldstart
