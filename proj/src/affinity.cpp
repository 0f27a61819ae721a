#include "coldstart/affinity.hpp"

#include <algorithm>
#include <set>

#include "coldstart/errors.hpp"

namespace coldstart {

AffinityWeights AffinityWeights::from_map(const std::map<std::string, double>& weights) {
  AffinityWeights w;
  for (const auto& [name, value] : weights) {
    auto signal = parse_signal(name);
    if (value < 0.0) throw DataError("affinity weight for '" + name + "' is negative");
    switch (signal) {
      case Signal::stream: w.stream = value; break;
      case Signal::favorite: w.favorite = value; break;
      default: throw DataError("signal '" + name + "' has no affinity rule");
    }
  }
  return w;
}

AffinityMatrix build_affinity_matrix(const InteractionLog& log, const Catalog& catalog,
                                     const AffinityWeights& weights) {
  if (weights.stream < 0.0 || weights.favorite < 0.0) throw DataError("affinity weights must be nonnegative");

  // (user, track) -> stream count, and favorited tracks per user.
  std::map<std::pair<UserId, TrackId>, double> streams;
  std::set<std::pair<UserId, TrackId>> favorited;
  for (const auto& e : log.events()) {
    if (e.signal == Signal::stream && e.entity == EntityKind::track && catalog.contains(e.item)) {
      streams[{e.user, e.item}] += 1.0;
    } else if (e.signal == Signal::favorite) {
      std::span<const TrackId> members;
      switch (e.entity) {
        case EntityKind::track:
          if (catalog.contains(e.item)) favorited.insert({e.user, e.item});
          break;
        case EntityKind::album: members = catalog.album_tracks(e.item); break;
        case EntityKind::artist: members = catalog.artist_tracks(e.item); break;
        case EntityKind::playlist: break;
      }
      for (auto t : members) favorited.insert({e.user, t});
    }
  }

  std::map<std::pair<UserId, TrackId>, double> score;
  for (const auto& [key, n] : streams) score[key] += weights.stream * n;
  for (const auto& key : favorited) score[key] += weights.favorite;

  AffinityMatrix m;
  for (const auto& [key, s] : score) {
    if (s > 0.0) {
      m.users.push_back(key.first);
      m.tracks.push_back(key.second);
    }
  }
  auto uniq = [](std::vector<EntityId>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(m.users);
  uniq(m.tracks);

  std::vector<Eigen::Triplet<double>> triplets;
  for (const auto& [key, s] : score) {
    if (s <= 0.0) continue;
    auto r = std::lower_bound(m.users.begin(), m.users.end(), key.first) - m.users.begin();
    auto c = std::lower_bound(m.tracks.begin(), m.tracks.end(), key.second) - m.tracks.begin();
    triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), s);
  }
  m.scores.resize(static_cast<Eigen::Index>(m.users.size()), static_cast<Eigen::Index>(m.tracks.size()));
  m.scores.setFromTriplets(triplets.begin(), triplets.end());
  m.scores.makeCompressed();
  return m;
}

}  // namespace coldstart
