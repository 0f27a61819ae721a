#include "coldstart/recommenders.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "coldstart/binary_io.hpp"
#include "coldstart/errors.hpp"

namespace coldstart {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::semi: return "semi";
    case Strategy::full: return "full";
    case Strategy::popularity: return "popularity";
    case Strategy::reg_streams: return "reg-streams";
    case Strategy::feat_cluster: return "feat-cluster";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  for (auto s : kAllStrategies) {
    if (to_string(s) == name) return s;
  }
  throw UsageError("unknown strategy '" + std::string(name) +
                   "' (expected semi, full, popularity, reg-streams or feat-cluster)");
}

std::vector<TrackId> Recommendation::track_ids() const {
  std::vector<TrackId> out;
  out.reserve(items.size());
  for (const auto& s : items) out.push_back(s.id);
  return out;
}

PopularityTable build_popularity_table(const Catalog& catalog, const InteractionLog& log) {
  std::map<TrackId, double> listeners;
  for (const auto& [id, meta] : catalog.tracks()) listeners[id] = 0.0;
  UserId current = 0;
  bool first = true;
  std::set<TrackId> seen;
  for (const auto& e : log.events()) {
    if (first || e.user != current) {
      seen.clear();
      current = e.user;
      first = false;
    }
    if (e.signal != Signal::stream || e.entity != EntityKind::track || !catalog.contains(e.item)) continue;
    if (seen.insert(e.item).second) listeners[e.item] += 1.0;
  }
  PopularityTable table;
  for (const auto& [t, c] : listeners) table.ranked.push_back({t, c});
  std::sort(table.ranked.begin(), table.ranked.end(), [&](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    const auto ra = catalog.meta(a.id).popularity_rank, rb = catalog.meta(b.id).popularity_rank;
    return ra != rb ? ra < rb : a.id < b.id;
  });
  return table;
}

std::string PopularityTable::to_text() const {
  std::string out;
  for (const auto& s : ranked) out += std::to_string(s.id) + '\t' + io::format_double(s.score) + '\n';
  return out;
}

PopularityTable PopularityTable::from_text(const std::string& text) {
  PopularityTable t;
  std::istringstream in(text);
  std::string line;
  std::set<TrackId> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(FormatError::Kind::parse, "bad popularity line '" + line + "'");
    Scored s{io::parse_u64(std::string_view(line).substr(0, tab)), io::parse_double(std::string_view(line).substr(tab + 1))};
    if (!seen.insert(s.id).second) throw DataError("duplicate track " + std::to_string(s.id) + " in popularity table");
    t.ranked.push_back(s);
  }
  return t;
}

void pad_with_popularity(std::vector<Scored>& items, const PopularityTable& popularity, std::size_t k) {
  if (items.size() >= k) return;
  std::unordered_set<TrackId> present;
  for (const auto& s : items) present.insert(s.id);
  const double pad_score = items.empty() ? 0.0 : std::min(items.back().score, 0.0);
  for (const auto& s : popularity.ranked) {
    if (items.size() >= k) break;
    if (present.insert(s.id).second) items.push_back({s.id, pad_score});
  }
}

Recommendation recommend_popularity(UserId user, const PopularityTable& popularity, std::size_t k) {
  Recommendation r{user, Strategy::popularity, std::nullopt, {}};
  const auto n = std::min(k, popularity.ranked.size());
  r.items.assign(popularity.ranked.begin(), popularity.ranked.begin() + static_cast<std::ptrdiff_t>(n));
  return r;
}

Recommendation recommend_semi_personalized(UserId user, std::span<const float> embedding, const Segmentation& seg,
                                           const PopularityTable& popularity, std::size_t k) {
  if (embedding.size() != seg.dim) {
    throw DimensionError("embedding has " + std::to_string(embedding.size()) + " components, segmentation " +
                         std::to_string(seg.dim));
  }
  const auto s = assign_segment(embedding, seg);
  Recommendation r{user, Strategy::semi, static_cast<std::uint32_t>(s), {}};
  if (s < seg.top_items.size()) {
    const auto& list = seg.top_items[s];
    r.items.assign(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(std::min(k, list.size())));
  }
  pad_with_popularity(r.items, popularity, k);
  return r;
}

namespace {

Recommendation nearest_tracks(UserId user, Strategy strategy, std::span<const float> query,
                              const EmbeddingTable& tracks, const PopularityTable& popularity, std::size_t k) {
  Recommendation r{user, strategy, std::nullopt, {}};
  if (k == 0) return r;
  r.items = top_k_by_similarity(query, tracks, k);
  pad_with_popularity(r.items, popularity, k);
  return r;
}

}  // namespace

Recommendation recommend_full_personalized(UserId user, std::span<const float> embedding,
                                           const EmbeddingTable& tracks, const PopularityTable& popularity,
                                           std::size_t k) {
  if (embedding.size() != tracks.dim()) {
    throw DimensionError("embedding has " + std::to_string(embedding.size()) + " components, tracks " +
                         std::to_string(tracks.dim()));
  }
  if (is_zero(embedding)) {
    spdlog::warn("user {} has a null embedding; using popularity", user);
    auto r = recommend_popularity(user, popularity, k);
    r.strategy = Strategy::full;
    return r;
  }
  return nearest_tracks(user, Strategy::full, embedding, tracks, popularity, k);
}

Recommendation recommend_registration_streams(UserId user, std::span<const Event> events,
                                              const EmbeddingTable& tracks, const PopularityTable& popularity,
                                              std::size_t k) {
  std::vector<EntityId> streamed;
  for (const auto& e : events) {
    if (e.signal == Signal::stream && e.entity == EntityKind::track) streamed.push_back(e.item);
  }
  auto mean = mean_embedding(streamed, tracks);
  if (mean.is_null || is_zero(mean.value)) {
    auto r = recommend_popularity(user, popularity, k);
    r.strategy = Strategy::reg_streams;
    return r;
  }
  return nearest_tracks(user, Strategy::reg_streams, mean.value, tracks, popularity, k);
}

FeatureClusterModel fit_feature_clusters(const EmbeddingTable& warm_features, const InteractionLog& warm_log,
                                         const Catalog& catalog, const KMeansConfig& cfg, std::size_t k) {
  FeatureClusterModel m{build_segmentation(warm_features, cfg)};
  m.segmentation.top_items = segment_top_items(m.segmentation, warm_log, catalog, k);
  return m;
}

Recommendation recommend_feature_cluster(UserId user, std::span<const float> features,
                                         const FeatureClusterModel& model, const PopularityTable& popularity,
                                         std::size_t k) {
  auto r = recommend_semi_personalized(user, features, model.segmentation, popularity, k);
  r.strategy = Strategy::feat_cluster;
  return r;
}

std::string recommendation_to_line(const Recommendation& rec) {
  std::string ids, scores;
  for (std::size_t i = 0; i < rec.items.size(); ++i) {
    if (i) {
      ids += ',';
      scores += ',';
    }
    ids += std::to_string(rec.items[i].id);
    scores += io::format_double(rec.items[i].score);
  }
  return std::to_string(rec.user) + '\t' + std::string(to_string(rec.strategy)) + '\t' +
         (rec.segment ? std::to_string(*rec.segment) : std::string("-")) + '\t' + ids + '\t' + scores;
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

Recommendation recommendation_from_line(std::string_view line) {
  auto f = split(line, '\t');
  if (f.size() != 5) throw FormatError(FormatError::Kind::parse, "recommendation line needs 5 fields");
  Recommendation r;
  r.user = io::parse_u64(f[0]);
  r.strategy = parse_strategy(f[1]);
  if (f[2] != "-") r.segment = static_cast<std::uint32_t>(io::parse_u64(f[2]));
  if (!f[3].empty()) {
    auto ids = split(f[3], ',');
    auto scores = split(f[4], ',');
    if (ids.size() != scores.size()) throw FormatError(FormatError::Kind::parse, "ids and scores differ in length");
    for (std::size_t i = 0; i < ids.size(); ++i) r.items.push_back({io::parse_u64(ids[i]), io::parse_double(scores[i])});
  }
  return r;
}

std::string recommendations_to_text(std::span<const Recommendation> recs) {
  std::string out;
  for (const auto& r : recs) out += recommendation_to_line(r) + '\n';
  return out;
}

std::vector<Recommendation> recommendations_from_text(const std::string& text) {
  std::vector<Recommendation> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(recommendation_from_line(line));
  }
  return out;
}

}  // namespace coldstart
