#include "coldstart/dataset.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "coldstart/binary_io.hpp"
#include "coldstart/embedding_io.hpp"
#include "coldstart/errors.hpp"

namespace coldstart {

using nlohmann::json;

void DatasetBundle::canonicalize() {
  std::sort(validation.begin(), validation.end());
  std::sort(test.begin(), test.end());
}

const std::vector<UserId>& DatasetBundle::split(const std::string& name) const {
  if (name == "validation") return validation;
  if (name == "test") return test;
  throw UsageError("unknown split '" + name + "' (expected validation or test)");
}

namespace {

class Problems {
 public:
  explicit Problems(std::string what) : what_(std::move(what)) {}
  void add(std::string msg) {
    if (list_.size() < 20) list_.push_back(std::move(msg));
    ++count_;
  }
  void raise() const {
    if (count_ == 0) return;
    std::string msg = what_ + ": " + std::to_string(count_) + " problem(s)";
    for (const auto& p : list_) msg += "\n  " + p;
    if (count_ > list_.size()) msg += "\n  ...";
    throw DataError(msg);
  }

 private:
  std::string what_;
  std::vector<std::string> list_;
  std::size_t count_ = 0;
};

bool entity_known(const Catalog& catalog, EntityKind kind, EntityId id) {
  switch (kind) {
    case EntityKind::track: return catalog.contains(id);
    case EntityKind::artist: return catalog.has_artist(id);
    case EntityKind::album: return catalog.has_album(id);
    case EntityKind::playlist: return catalog.has_playlist(id);
  }
  return false;
}

std::string describe(const Event& e) {
  return "user " + std::to_string(e.user) + " ts " + std::to_string(e.timestamp) + " " +
         std::string(to_string(e.signal)) + " " + std::string(to_string(e.entity)) + " " + std::to_string(e.item);
}

}  // namespace

void DatasetBundle::validate() const {
  catalog.validate();
  users.validate();

  for (const auto& e : cold_log.events()) {
    if (!users.is_cold(e.user)) continue;
    const auto day = users.record(e.user).registration_day;
    if (day_of(e.timestamp) != day) {
      throw LeakageError("cold event dated day " + std::to_string(day_of(e.timestamp)) + ", registration day " +
                         std::to_string(day) + ": " + describe(e));
    }
  }

  Problems p("bundle '" + name + "' is invalid");
  for (const auto& e : warm_log.events()) {
    if (!users.is_warm(e.user)) p.add("warm-log event for a user who is not warm: " + describe(e));
    if (!entity_known(catalog, e.entity, e.item)) p.add("event references an unknown entity: " + describe(e));
  }
  for (const auto& e : cold_log.events()) {
    if (!users.is_cold(e.user)) p.add("cold-log event for a user who is not cold: " + describe(e));
    if (!entity_known(catalog, e.entity, e.item)) p.add("event references an unknown entity: " + describe(e));
  }

  std::set<UserId> seen;
  for (const auto* list : {&validation, &test}) {
    for (auto u : *list) {
      if (!users.is_cold(u)) p.add("split member " + std::to_string(u) + " is not a cold user");
      if (!seen.insert(u).second) p.add("user " + std::to_string(u) + " appears in more than one split slot");
    }
  }
  for (auto u : users.cold()) {
    if (!seen.contains(u)) p.add("cold user " + std::to_string(u) + " is in no split");
  }

  for (const auto& [u, tracks] : truth) {
    if (!users.is_cold(u)) p.add("ground truth for non-cold user " + std::to_string(u));
    for (auto t : tracks) {
      if (!catalog.contains(t)) p.add("ground truth of user " + std::to_string(u) + " names unknown track " + std::to_string(t));
    }
  }
  if (min_truth > 0) {
    for (auto u : users.cold()) {
      auto it = truth.find(u);
      const auto n = it == truth.end() ? 0 : it->second.size();
      if (n < min_truth) {
        p.add("cold user " + std::to_string(u) + " has " + std::to_string(n) + " ground-truth tracks, need " +
              std::to_string(min_truth));
      }
    }
  }

  for (const auto& [space, table] : track_spaces) {
    if (table.dim() == 0) p.add("space '" + space + "' has zero dimension");
    for (auto id : table.ids()) {
      if (!catalog.contains(id)) p.add("space '" + space + "' embeds unknown track " + std::to_string(id));
    }
  }
  for (const auto& [space, table] : user_spaces) {
    auto it = track_spaces.find(space);
    if (it == track_spaces.end()) {
      p.add("user space '" + space + "' has no track space");
    } else if (it->second.dim() != table.dim()) {
      p.add("user space '" + space + "' dimension differs from its track space");
    }
    for (auto id : table.ids()) {
      if (!users.is_warm(id)) p.add("user space '" + space + "' embeds non-warm user " + std::to_string(id));
    }
  }
  p.raise();
}

// ---- schema mapping ----

SchemaMapping SchemaMapping::identity() {
  SchemaMapping s;
  s.tables["tracks"] = {"tracks.tsv",
                        {{"id", "track_id"}, {"artist", "artist_id"}, {"album", "album_id"}, {"genres", "genres"},
                         {"popularity_rank", "popularity_rank"}},
                        {},
                        "|"};
  s.tables["playlists"] = {"playlists.tsv", {{"id", "playlist_id"}, {"tracks", "track_ids"}}, {}, ","};
  s.tables["users"] = {"users.tsv",
                       {{"id", "user_id"}, {"kind", "kind"}, {"split", "split"}, {"country", "country"},
                        {"age", "age"}, {"registration_day", "registration_day"}},
                       {},
                       "|"};
  s.tables["events"] = {"events.tsv",
                        {{"user", "user_id"}, {"timestamp", "timestamp"}, {"signal", "signal"},
                         {"entity", "entity"}, {"item", "item_id"}},
                        {},
                        "|"};
  s.tables["ground_truth"] = {"ground_truth.tsv", {{"user", "user_id"}, {"track", "track_id"}}, {}, "|"};
  return s;
}

std::string SchemaMapping::to_json() const {
  json j;
  for (const auto& [name, t] : tables) {
    j["tables"][name] = {{"file", t.file}, {"columns", t.columns}, {"values", t.values},
                         {"list_separator", t.list_separator}};
  }
  j["missing_values"] = missing_values;
  return j.dump(2) + "\n";
}

SchemaMapping SchemaMapping::from_json(const std::string& text) {
  SchemaMapping s = identity();
  try {
    auto j = json::parse(text);
    if (j.contains("missing_values")) s.missing_values = j.at("missing_values").get<std::vector<std::string>>();
    if (j.contains("tables")) {
      for (const auto& [name, t] : j.at("tables").items()) {
        auto& table = s.tables[name];
        if (t.contains("file")) table.file = t.at("file").get<std::string>();
        if (t.contains("columns")) {
          for (const auto& [field, header] : t.at("columns").items()) table.columns[field] = header.get<std::string>();
        }
        if (t.contains("values")) table.values = t.at("values").get<std::map<std::string, std::map<std::string, std::string>>>();
        if (t.contains("list_separator")) table.list_separator = t.at("list_separator").get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::parse, std::string("schema mapping: ") + e.what());
  }
  return s;
}

const SchemaMapping::Table& SchemaMapping::table(const std::string& name) const {
  auto it = tables.find(name);
  if (it == tables.end()) throw DataError("schema mapping has no table '" + name + "'");
  return it->second;
}

namespace {

std::vector<std::string> split_string(std::string_view s, std::string_view sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + sep.size();
  }
  return out;
}

// Tab-separated table with a header row, read through a schema table.
class MappedTable {
 public:
  MappedTable(const std::filesystem::path& dir, const SchemaMapping& schema, const std::string& name)
      : schema_(schema), table_(schema.table(name)), name_(name) {
    const auto path = dir / table_.file;
    if (!std::filesystem::exists(path)) throw DataError("bundle table '" + name + "' missing: " + path.string());
    std::istringstream in(io::read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw FormatError(FormatError::Kind::parse, path.string() + " has no header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_string(line, "\t");
    for (std::size_t i = 0; i < header.size(); ++i) index_[header[i]] = i;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto fields = split_string(line, "\t");
      if (fields.size() != header.size()) {
        throw FormatError(FormatError::Kind::parse, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                                        std::to_string(header.size()) + " fields, got " +
                                                        std::to_string(fields.size()));
      }
      rows_.push_back(std::move(fields));
    }
  }

  std::size_t size() const { return rows_.size(); }
  bool has(const std::string& field) const { return index_.contains(header_of(field)); }

  std::string get(std::size_t row, const std::string& field) const {
    auto it = index_.find(header_of(field));
    if (it == index_.end()) throw DataError("table '" + name_ + "' lacks column '" + header_of(field) + "'");
    const auto& raw = rows_[row][it->second];
    auto vit = table_.values.find(field);
    if (vit != table_.values.end()) {
      auto m = vit->second.find(raw);
      if (m != vit->second.end()) return m->second;
    }
    return raw;
  }

  bool missing(const std::string& value) const {
    return std::find(schema_.missing_values.begin(), schema_.missing_values.end(), value) !=
           schema_.missing_values.end();
  }

  std::vector<std::string> list(std::size_t row, const std::string& field) const {
    return split_string(get(row, field), table_.list_separator);
  }

 private:
  std::string header_of(const std::string& field) const {
    auto it = table_.columns.find(field);
    return it == table_.columns.end() ? field : it->second;
  }

  const SchemaMapping& schema_;
  const SchemaMapping::Table& table_;
  std::string name_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
};

void check_count(const json& manifest, const char* key, std::size_t actual) {
  if (!manifest.contains("counts") || !manifest["counts"].contains(key)) return;
  const auto expected = manifest["counts"][key].get<std::size_t>();
  if (expected != actual) {
    throw DataError(std::string("manifest count '") + key + "' is " + std::to_string(expected) + ", found " +
                    std::to_string(actual));
  }
}

}  // namespace

DatasetBundle load_bundle(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw MissingArtifactError(manifest_path.string(), "gen-data");
  }
  json manifest;
  try {
    manifest = json::parse(io::read_file(manifest_path));
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::parse, "bundle manifest: " + std::string(e.what()));
  }
  const int version = manifest.value("format_version", 0);
  if (version != kBundleFormatVersion) {
    throw FormatError(FormatError::Kind::version_mismatch, "bundle format " + std::to_string(version) +
                                                               ", expected " + std::to_string(kBundleFormatVersion));
  }
  SchemaMapping schema = SchemaMapping::identity();
  const auto schema_name = manifest.value("schema", std::string("schema.json"));
  if (std::filesystem::exists(dir / schema_name)) schema = SchemaMapping::from_json(io::read_file(dir / schema_name));

  DatasetBundle b;
  b.name = manifest.value("name", std::string("bundle"));
  b.min_truth = manifest.value("min_truth", std::size_t{0});

  {
    MappedTable t(dir, schema, "tracks");
    for (std::size_t r = 0; r < t.size(); ++r) {
      TrackMeta meta;
      meta.artist = io::parse_u64(t.get(r, "artist"));
      meta.album = io::parse_u64(t.get(r, "album"));
      meta.genres = t.list(r, "genres");
      meta.popularity_rank = static_cast<std::uint32_t>(io::parse_u64(t.get(r, "popularity_rank")));
      b.catalog.add_track(io::parse_u64(t.get(r, "id")), std::move(meta));
    }
  }
  if (std::filesystem::exists(dir / schema.table("playlists").file)) {
    MappedTable t(dir, schema, "playlists");
    for (std::size_t r = 0; r < t.size(); ++r) {
      std::vector<TrackId> tracks;
      for (const auto& s : t.list(r, "tracks")) tracks.push_back(io::parse_u64(s));
      b.catalog.add_playlist(io::parse_u64(t.get(r, "id")), std::move(tracks));
    }
  }
  {
    MappedTable t(dir, schema, "users");
    for (std::size_t r = 0; r < t.size(); ++r) {
      const auto id = io::parse_u64(t.get(r, "id"));
      UserRecord rec;
      const auto country = t.get(r, "country");
      if (!t.missing(country)) rec.demographics.country = country;
      const auto age = t.get(r, "age");
      if (!t.missing(age)) rec.demographics.age = static_cast<int>(io::parse_i64(age));
      rec.registration_day = io::parse_i64(t.get(r, "registration_day"));
      const auto kind = t.get(r, "kind");
      if (kind == "warm") {
        b.users.add_warm(id, rec);
      } else if (kind == "cold") {
        b.users.add_cold(id, rec);
        const auto split = t.get(r, "split");
        if (split == "validation") b.validation.push_back(id);
        else if (split == "test") b.test.push_back(id);
        else throw DataError("cold user " + std::to_string(id) + " has unknown split '" + split + "'");
      } else {
        throw DataError("user " + std::to_string(id) + " has unknown kind '" + kind + "'");
      }
    }
  }
  {
    MappedTable t(dir, schema, "events");
    std::vector<Event> warm, cold;
    for (std::size_t r = 0; r < t.size(); ++r) {
      Event e;
      e.user = io::parse_u64(t.get(r, "user"));
      e.timestamp = io::parse_i64(t.get(r, "timestamp"));
      e.signal = parse_signal(t.get(r, "signal"));
      e.entity = parse_entity(t.get(r, "entity"));
      e.item = io::parse_u64(t.get(r, "item"));
      if (b.users.is_cold(e.user)) cold.push_back(e);
      else if (b.users.is_warm(e.user)) warm.push_back(e);
      else throw DataError("event for unknown user: user " + std::to_string(e.user));
    }
    b.warm_log = InteractionLog(std::move(warm));
    b.cold_log = InteractionLog(std::move(cold));
  }
  {
    MappedTable t(dir, schema, "ground_truth");
    for (std::size_t r = 0; r < t.size(); ++r) {
      b.truth[io::parse_u64(t.get(r, "user"))].insert(io::parse_u64(t.get(r, "track")));
    }
  }
  if (manifest.contains("spaces")) {
    for (const auto& [space, info] : manifest["spaces"].items()) {
      if (info.contains("tracks")) b.track_spaces[space] = load_embeddings(dir / info["tracks"].get<std::string>());
      if (info.contains("users")) b.user_spaces[space] = load_embeddings(dir / info["users"].get<std::string>());
    }
  }

  check_count(manifest, "tracks", b.catalog.size());
  check_count(manifest, "playlists", b.catalog.playlists().size());
  check_count(manifest, "warm_users", b.users.warm().size());
  check_count(manifest, "cold_users", b.users.cold().size());
  check_count(manifest, "events", b.warm_log.size() + b.cold_log.size());
  b.canonicalize();
  b.validate();
  return b;
}

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  bundle.validate();
  std::filesystem::create_directories(dir);
  const auto schema = SchemaMapping::identity();

  std::string tracks = "track_id\tartist_id\talbum_id\tgenres\tpopularity_rank\n";
  for (const auto& [id, m] : bundle.catalog.tracks()) {
    std::string genres;
    for (std::size_t i = 0; i < m.genres.size(); ++i) genres += (i ? "|" : "") + m.genres[i];
    tracks += std::to_string(id) + '\t' + std::to_string(m.artist) + '\t' + std::to_string(m.album) + '\t' + genres +
              '\t' + std::to_string(m.popularity_rank) + '\n';
  }
  std::string playlists = "playlist_id\ttrack_ids\n";
  for (const auto& [id, list] : bundle.catalog.playlists()) {
    playlists += std::to_string(id) + '\t';
    for (std::size_t i = 0; i < list.size(); ++i) playlists += (i ? "," : "") + std::to_string(list[i]);
    playlists += '\n';
  }
  std::set<UserId> validation(bundle.validation.begin(), bundle.validation.end());
  std::string users = "user_id\tkind\tsplit\tcountry\tage\tregistration_day\n";
  for (const auto& [id, rec] : bundle.users.records()) {
    const bool cold = bundle.users.is_cold(id);
    users += std::to_string(id) + '\t' + (cold ? "cold" : "warm") + '\t' +
             (cold ? (validation.contains(id) ? "validation" : "test") : "-") + '\t' + rec.demographics.country +
             '\t' + (rec.demographics.age ? std::to_string(*rec.demographics.age) : std::string()) + '\t' +
             std::to_string(rec.registration_day) + '\n';
  }
  std::vector<Event> all(bundle.warm_log.events());
  all.insert(all.end(), bundle.cold_log.events().begin(), bundle.cold_log.events().end());
  std::sort(all.begin(), all.end());
  std::string events = "user_id\ttimestamp\tsignal\tentity\titem_id\n";
  for (const auto& e : all) {
    events += std::to_string(e.user) + '\t' + std::to_string(e.timestamp) + '\t' + std::string(to_string(e.signal)) +
              '\t' + std::string(to_string(e.entity)) + '\t' + std::to_string(e.item) + '\n';
  }
  std::string truth = "user_id\ttrack_id\n";
  for (const auto& [u, tracks_of] : bundle.truth) {
    for (auto t : tracks_of) truth += std::to_string(u) + '\t' + std::to_string(t) + '\n';
  }

  io::write_file(dir / "schema.json", schema.to_json());
  io::write_file(dir / "tracks.tsv", tracks);
  io::write_file(dir / "playlists.tsv", playlists);
  io::write_file(dir / "users.tsv", users);
  io::write_file(dir / "events.tsv", events);
  io::write_file(dir / "ground_truth.tsv", truth);

  json manifest;
  manifest["format_version"] = kBundleFormatVersion;
  manifest["name"] = bundle.name;
  manifest["schema"] = "schema.json";
  manifest["min_truth"] = bundle.min_truth;
  manifest["counts"] = {{"tracks", bundle.catalog.size()},
                        {"playlists", bundle.catalog.playlists().size()},
                        {"warm_users", bundle.users.warm().size()},
                        {"cold_users", bundle.users.cold().size()},
                        {"events", all.size()},
                        {"ground_truth_users", bundle.truth.size()}};
  manifest["split"] = {{"validation", bundle.validation.size()}, {"test", bundle.test.size()}};
  manifest["spaces"] = json::object();
  for (const auto& [space, table] : bundle.track_spaces) {
    const auto rel = "emb/" + space + ".tracks.emb";
    save_embeddings(dir / rel, table);
    manifest["spaces"][space] = {{"dim", table.dim()}, {"tracks", rel}};
  }
  for (const auto& [space, table] : bundle.user_spaces) {
    const auto rel = "emb/" + space + ".users.emb";
    save_embeddings(dir / rel, table);
    manifest["spaces"][space]["users"] = rel;
  }
  io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace coldstart
