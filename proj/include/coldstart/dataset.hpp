#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "coldstart/catalog.hpp"
#include "coldstart/core.hpp"
#include "coldstart/interactions.hpp"
#include "coldstart/metrics.hpp"

namespace coldstart {

inline constexpr int kBundleFormatVersion = 1;

struct DatasetBundle {
  std::string name = "bundle";
  Catalog catalog;
  UserUniverse users;
  InteractionLog warm_log;  // full warm histories, registration day included
  InteractionLog cold_log;  // cold users' registration-day events only
  std::vector<UserId> validation;  // ascending
  std::vector<UserId> test;        // ascending
  GroundTruth truth;
  std::map<std::string, EmbeddingTable> track_spaces;
  std::map<std::string, EmbeddingTable> user_spaces;  // warm users
  std::size_t min_truth = 0;  // required ground-truth size per cold user, 0 to skip

  // Sorts the split lists.
  void canonicalize();

  // Full invariant check. Throws LeakageError for cold events off the
  // registration day, DataError listing offending records otherwise.
  void validate() const;

  const std::vector<UserId>& split(const std::string& name) const;

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

// Column and value mapping from an external tab-separated layout onto the
// internal fields. Tables: tracks, playlists, users, events, ground_truth.
struct SchemaMapping {
  struct Table {
    std::string file;
    std::map<std::string, std::string> columns;                        // field -> header
    std::map<std::string, std::map<std::string, std::string>> values;  // field -> external -> internal
    std::string list_separator = "|";
  };
  std::map<std::string, Table> tables;
  std::vector<std::string> missing_values{"", "NA", "null"};

  static SchemaMapping identity();
  std::string to_json() const;
  static SchemaMapping from_json(const std::string& text);

  const Table& table(const std::string& name) const;
};

// Directory layout: manifest.json, schema.json, the tables named by the
// schema, emb/<space>.tracks.emb and emb/<space>.users.emb.
DatasetBundle load_bundle(const std::filesystem::path& dir);
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);

}  // namespace coldstart
