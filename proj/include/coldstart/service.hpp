#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "coldstart/entity_embeddings.hpp"
#include "coldstart/features.hpp"
#include "coldstart/recommenders.hpp"
#include "coldstart/regressor.hpp"
#include "coldstart/segmentation.hpp"

namespace httplib {
class Server;
}

namespace coldstart {

// Everything one request needs, immutable once published.
struct ServingSnapshot {
  std::string version;
  RegressorModel model;
  ChannelSpec spec;
  GroupEmbeddings groups;
  Segmentation segmentation;
  EntityEmbeddings entities;
  PopularityTable popularity;

  // Throws DimensionError / DataError describing the first inconsistency.
  void validate() const;
};

// Directory: manifest.json (version, file fingerprints), model.csreg,
// channel_spec.txt, groups.txt, segmentation.seg, {tracks,artists,albums,
// playlists}.emb, popularity.tsv. An empty version is derived from the
// component fingerprints.
void save_snapshot(const ServingSnapshot& snapshot, const std::filesystem::path& dir);
ServingSnapshot load_snapshot(const std::filesystem::path& dir);

struct ServeRequest {
  UserId user = 0;
  Demographics demographics;
  std::int64_t registration_day = 0;
  std::vector<Event> events;
  std::size_t k = 50;
  Strategy strategy = Strategy::semi;
};

// JSON body -> request. Throws UsageError for malformed bodies and
// UnknownSignalError / UnknownEntityError for unknown vocabulary.
ServeRequest parse_serve_request(const std::string& body, bool recommend);

Vector embed_request(const ServingSnapshot& snapshot, const ServeRequest& request);
// semi or full only.
Recommendation recommend_request(const ServingSnapshot& snapshot, const ServeRequest& request);

std::string recommendation_body(const Recommendation& rec, const ServingSnapshot& snapshot);

struct HttpResult {
  int status = 200;
  std::string body;
};

// Transport-independent request handling. Readers take a reference to the
// current snapshot once per request; reload builds the replacement aside
// and swaps it in, and the old one is freed when its last reader finishes.
class InferenceService {
 public:
  InferenceService();

  void publish(std::shared_ptr<const ServingSnapshot> snapshot);
  std::shared_ptr<const ServingSnapshot> snapshot() const;

  HttpResult embed(const std::string& body) const;
  HttpResult recommend(const std::string& body) const;
  // Body: {"snapshot_dir": "..."}; falls back to the default directory.
  HttpResult reload(const std::string& body);
  HttpResult health() const;

  void set_default_snapshot_dir(std::filesystem::path dir) { default_dir_ = std::move(dir); }

 private:
  mutable std::mutex mu_;
  std::mutex reload_mu_;
  std::shared_ptr<const ServingSnapshot> current_;
  std::filesystem::path default_dir_;
  std::chrono::steady_clock::time_point started_;
};

// HTTP/1.1 front end over an InferenceService.
class HttpServer {
 public:
  explicit HttpServer(InferenceService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port.
  int start(const std::string& host, int port);
  // Blocks until stop() is called from elsewhere.
  void listen(const std::string& host, int port);
  void stop();

 private:
  InferenceService& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace coldstart
