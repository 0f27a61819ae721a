#include "coldstart/service.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "coldstart/binary_io.hpp"
#include "coldstart/embedding_io.hpp"
#include "coldstart/errors.hpp"
#include "coldstart/fingerprint.hpp"

namespace coldstart {

using nlohmann::json;

void ServingSnapshot::validate() const {
  spec.validate();
  if (!model.trained) throw DataError("snapshot model is untrained");
  if (model.spec.input_dim != spec.total_dim()) {
    throw DimensionError("model input " + std::to_string(model.spec.input_dim) + " != channel spec width " +
                         std::to_string(spec.total_dim()));
  }
  if (model.channel_spec_version != spec.version) {
    throw DimensionError("model was trained on channel spec version " + std::to_string(model.channel_spec_version) +
                         ", snapshot carries " + std::to_string(spec.version));
  }
  const auto d = spec.dim;
  auto check = [d](std::size_t got, const std::string& what) {
    if (got != d) throw DimensionError(what + " has dimension " + std::to_string(got) + ", expected " + std::to_string(d));
  };
  check(model.spec.output_dim, "model output");
  check(groups.dim, "group embeddings");
  check(segmentation.dim, "segmentation");
  check(entities.tracks.dim(), "track embeddings");
  for (auto kind : {EntityKind::artist, EntityKind::album, EntityKind::playlist}) {
    const auto& t = entities.table(kind);
    if (!t.empty()) check(t.dim(), std::string(to_string(kind)) + " embeddings");
  }
  segmentation.validate();
  if (popularity.ranked.empty()) throw DataError("snapshot popularity table is empty");
}

namespace {

constexpr int kSnapshotFormat = 1;

const std::vector<std::pair<std::string, std::string>> kSnapshotFiles{
    {"model", "model.csreg"},         {"channel_spec", "channel_spec.txt"}, {"groups", "groups.txt"},
    {"segmentation", "segmentation.seg"}, {"tracks", "tracks.emb"},     {"artists", "artists.emb"},
    {"albums", "albums.emb"},         {"playlists", "playlists.emb"},     {"popularity", "popularity.tsv"}};

}  // namespace

void save_snapshot(const ServingSnapshot& snapshot, const std::filesystem::path& dir) {
  snapshot.validate();
  std::filesystem::create_directories(dir);
  save_model(dir / "model.csreg", snapshot.model);
  io::write_file(dir / "channel_spec.txt", snapshot.spec.to_text());
  io::write_file(dir / "groups.txt", snapshot.groups.to_text());
  save_segmentation(dir / "segmentation.seg", snapshot.segmentation);
  save_embeddings(dir / "tracks.emb", snapshot.entities.tracks);
  save_embeddings(dir / "artists.emb", snapshot.entities.artists);
  save_embeddings(dir / "albums.emb", snapshot.entities.albums);
  save_embeddings(dir / "playlists.emb", snapshot.entities.playlists);
  io::write_file(dir / "popularity.tsv", snapshot.popularity.to_text());

  json manifest;
  manifest["format_version"] = kSnapshotFormat;
  std::string all;
  for (const auto& [key, file] : kSnapshotFiles) {
    const auto fp = fingerprint_file(dir / file);
    manifest["files"][key] = {{"path", file}, {"fingerprint", fp}};
    all += fp;
  }
  manifest["version"] = snapshot.version.empty() ? fingerprint(all) : snapshot.version;
  io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

ServingSnapshot load_snapshot(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw MissingArtifactError(manifest_path.string(), "serve");
  json manifest;
  try {
    manifest = json::parse(io::read_file(manifest_path));
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::parse, "snapshot manifest: " + std::string(e.what()));
  }
  if (manifest.value("format_version", 0) != kSnapshotFormat) {
    throw FormatError(FormatError::Kind::version_mismatch, "unsupported snapshot format");
  }
  for (const auto& [key, file] : kSnapshotFiles) {
    const auto path = dir / file;
    if (!std::filesystem::exists(path)) throw DataError("snapshot file missing: " + path.string());
    const auto expected = manifest["files"][key].value("fingerprint", std::string());
    if (fingerprint_file(path) != expected) throw DataError("snapshot file " + file + " does not match its manifest");
  }
  ServingSnapshot s;
  s.version = manifest.at("version").get<std::string>();
  s.model = load_model(dir / "model.csreg");
  s.spec = ChannelSpec::from_text(io::read_file(dir / "channel_spec.txt"));
  s.groups = GroupEmbeddings::from_text(io::read_file(dir / "groups.txt"));
  s.segmentation = load_segmentation(dir / "segmentation.seg");
  s.entities.tracks = load_embeddings(dir / "tracks.emb");
  s.entities.artists = load_embeddings(dir / "artists.emb");
  s.entities.albums = load_embeddings(dir / "albums.emb");
  s.entities.playlists = load_embeddings(dir / "playlists.emb");
  s.popularity = PopularityTable::from_text(io::read_file(dir / "popularity.tsv"));
  s.validate();
  return s;
}

// ---- requests ----

ServeRequest parse_serve_request(const std::string& body, bool recommend) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw UsageError("body is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw UsageError("body must be a JSON object");
  ServeRequest r;
  try {
    r.user = j.value("user_id", UserId{0});
    if (j.contains("demographics")) {
      const auto& d = j.at("demographics");
      if (d.contains("country") && !d.at("country").is_null()) r.demographics.country = d.at("country").get<std::string>();
      if (d.contains("age") && !d.at("age").is_null()) r.demographics.age = d.at("age").get<int>();
    }
    if (j.contains("events")) {
      for (const auto& e : j.at("events")) {
        Event ev;
        ev.user = r.user;
        ev.timestamp = e.at("timestamp").get<std::int64_t>();
        ev.signal = parse_signal(e.at("signal").get<std::string>());
        ev.entity = parse_entity(e.at("entity").get<std::string>());
        ev.item = e.at("item").get<EntityId>();
        r.events.push_back(ev);
      }
    }
    if (j.contains("registration_day")) {
      r.registration_day = j.at("registration_day").get<std::int64_t>();
    } else if (!r.events.empty()) {
      r.registration_day = day_of(r.events.front().timestamp);
    }
    if (recommend) {
      const auto k = j.value("k", std::int64_t{50});
      if (k < 1) throw UsageError("k must be >= 1");
      r.k = static_cast<std::size_t>(k);
      r.strategy = parse_strategy(j.value("strategy", std::string("semi")));
      if (r.strategy != Strategy::semi && r.strategy != Strategy::full) {
        throw UsageError("strategy must be semi or full");
      }
    }
  } catch (const json::exception& e) {
    throw UsageError("malformed request field: " + std::string(e.what()));
  }
  std::sort(r.events.begin(), r.events.end());
  return r;
}

Vector embed_request(const ServingSnapshot& snapshot, const ServeRequest& request) {
  FeatureInput input{request.demographics, request.registration_day, request.events};
  const auto features = assemble_features(input, snapshot.entities, snapshot.groups, snapshot.spec);
  return predict_one(snapshot.model, features.values);
}

Recommendation recommend_request(const ServingSnapshot& snapshot, const ServeRequest& request) {
  const auto embedding = embed_request(snapshot, request);
  if (request.strategy == Strategy::full) {
    return recommend_full_personalized(request.user, embedding, snapshot.entities.tracks, snapshot.popularity,
                                       request.k);
  }
  return recommend_semi_personalized(request.user, embedding, snapshot.segmentation, snapshot.popularity, request.k);
}

std::string recommendation_body(const Recommendation& rec, const ServingSnapshot& snapshot) {
  json j;
  j["snapshot_version"] = snapshot.version;
  j["user_id"] = rec.user;
  j["strategy"] = std::string(to_string(rec.strategy));
  if (rec.segment) j["segment_id"] = *rec.segment;
  j["tracks"] = rec.track_ids();
  auto scores = json::array();
  for (const auto& s : rec.items) scores.push_back(s.score);
  j["scores"] = std::move(scores);
  return j.dump();
}

// ---- service ----

namespace {

HttpResult error(int status, const std::string& msg) { return {status, json{{"error", msg}}.dump()}; }

template <class F>
HttpResult guarded(F&& f) {
  try {
    return f();
  } catch (const UsageError& e) {
    return error(400, e.what());
  } catch (const UnknownSignalError& e) {
    return error(400, e.what());
  } catch (const UnknownEntityError& e) {
    return error(400, e.what());
  } catch (const LeakageError& e) {
    return error(422, e.what());
  } catch (const DimensionError& e) {
    return error(422, e.what());
  } catch (const DataError& e) {
    return error(422, e.what());
  } catch (const std::exception& e) {
    spdlog::error("request failed: {}", e.what());
    return error(500, e.what());
  }
}

}  // namespace

InferenceService::InferenceService() : started_(std::chrono::steady_clock::now()) {}

void InferenceService::publish(std::shared_ptr<const ServingSnapshot> snapshot) {
  std::lock_guard lock(mu_);
  current_ = std::move(snapshot);
}

std::shared_ptr<const ServingSnapshot> InferenceService::snapshot() const {
  std::lock_guard lock(mu_);
  return current_;
}

HttpResult InferenceService::embed(const std::string& body) const {
  const auto snap = snapshot();
  if (!snap) return error(503, "no snapshot loaded");
  return guarded([&] {
    const auto req = parse_serve_request(body, false);
    const auto v = embed_request(*snap, req);
    json j;
    j["snapshot_version"] = snap->version;
    j["embedding"] = v;
    j["segment_id"] = assign_segment(v, snap->segmentation);
    return HttpResult{200, j.dump()};
  });
}

HttpResult InferenceService::recommend(const std::string& body) const {
  const auto snap = snapshot();
  if (!snap) return error(503, "no snapshot loaded");
  return guarded([&] {
    const auto req = parse_serve_request(body, true);
    return HttpResult{200, recommendation_body(recommend_request(*snap, req), *snap)};
  });
}

HttpResult InferenceService::reload(const std::string& body) {
  std::lock_guard reload_lock(reload_mu_);
  std::filesystem::path dir = default_dir_;
  if (!body.empty()) {
    try {
      auto j = json::parse(body);
      if (j.contains("snapshot_dir")) dir = j.at("snapshot_dir").get<std::string>();
    } catch (const json::exception& e) {
      return error(400, "body is not valid JSON: " + std::string(e.what()));
    }
  }
  if (dir.empty()) return error(400, "no snapshot_dir given and no default configured");
  const auto old = snapshot();
  const std::string old_version = old ? old->version : "";
  std::shared_ptr<const ServingSnapshot> next;
  try {
    next = std::make_shared<const ServingSnapshot>(load_snapshot(dir));
  } catch (const std::exception& e) {
    spdlog::warn("reload from {} rejected: {}", dir.string(), e.what());
    return {409, json{{"error", e.what()}, {"snapshot_version", old_version}}.dump()};
  }
  publish(next);
  spdlog::info("snapshot {} -> {}", old_version, next->version);
  return {200, json{{"old_version", old_version}, {"new_version", next->version}}.dump()};
}

HttpResult InferenceService::health() const {
  const auto snap = snapshot();
  const double uptime = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  json j;
  j["status"] = snap ? "ok" : "degraded";
  j["snapshot_version"] = snap ? json(snap->version) : json(nullptr);
  j["uptime_seconds"] = uptime;
  return {200, j.dump()};
}

// ---- HTTP ----

HttpServer::HttpServer(InferenceService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto reply = [](httplib::Response& res, const HttpResult& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server_->Post("/v1/embed", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service_.embed(req.body));
  });
  server_->Post("/v1/recommend", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service_.recommend(req.body));
  });
  server_->Post("/admin/reload", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service_.reload(req.body));
  });
  server_->Get("/health", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service_.health());
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw UsageError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void HttpServer::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) throw UsageError("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace coldstart
