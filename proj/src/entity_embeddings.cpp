#include "coldstart/entity_embeddings.hpp"

#include <map>

#include <spdlog/spdlog.h>

namespace coldstart {

MeanEmbedding derive_entity_embedding(EntityKind kind, EntityId id, const EmbeddingTable& tracks,
                                      const Catalog& catalog) {
  switch (kind) {
    case EntityKind::track: {
      TrackId single[] = {id};
      return mean_embedding(single, tracks);
    }
    case EntityKind::artist: return mean_embedding(catalog.artist_tracks(id), tracks);
    case EntityKind::album: return mean_embedding(catalog.album_tracks(id), tracks);
    case EntityKind::playlist: return mean_embedding(catalog.playlist_tracks(id), tracks);
  }
  return {};
}

const EmbeddingTable& EntityEmbeddings::table(EntityKind kind) const {
  switch (kind) {
    case EntityKind::track: return tracks;
    case EntityKind::artist: return artists;
    case EntityKind::album: return albums;
    case EntityKind::playlist: return playlists;
  }
  return tracks;
}

EntityEmbeddings build_entity_embeddings(EmbeddingTable tracks, const Catalog& catalog) {
  EntityEmbeddings out;
  const auto d = tracks.dim();
  out.artists = EmbeddingTable(d);
  out.albums = EmbeddingTable(d);
  out.playlists = EmbeddingTable(d);
  auto fill = [&](EntityKind kind, const std::map<EntityId, std::vector<TrackId>>& groups, EmbeddingTable& dst) {
    for (const auto& [id, _] : groups) {
      auto mean = derive_entity_embedding(kind, id, tracks, catalog);
      if (!mean.is_null) dst.add(id, std::span<const float>(mean.value));
    }
  };
  fill(EntityKind::artist, catalog.artists(), out.artists);
  fill(EntityKind::album, catalog.albums(), out.albums);
  fill(EntityKind::playlist, catalog.playlists(), out.playlists);
  out.tracks = std::move(tracks);
  return out;
}

MeanEmbedding warm_user_embedding_from_history(std::span<const Event> user_events, const EmbeddingTable& tracks,
                                               HistoryWeighting weighting) {
  std::map<TrackId, double> counts;
  for (const auto& e : user_events) {
    if (e.signal == Signal::stream && e.entity == EntityKind::track) counts[e.item] += 1.0;
  }
  std::vector<TrackId> ids;
  std::vector<double> weights;
  for (const auto& [id, n] : counts) {
    ids.push_back(id);
    weights.push_back(weighting == HistoryWeighting::stream_count ? n : 1.0);
  }
  return mean_embedding(ids, weights, tracks);
}

EmbeddingTable warm_user_embeddings(const InteractionLog& log, std::span<const UserId> users,
                                    const EmbeddingTable& tracks, HistoryWeighting weighting,
                                    std::size_t* skipped) {
  EmbeddingTable out(tracks.dim());
  std::size_t empty = 0;
  for (auto u : users) {
    auto mean = warm_user_embedding_from_history(log.for_user(u), tracks, weighting);
    if (mean.is_null) {
      ++empty;
      continue;
    }
    out.add(u, std::span<const float>(mean.value));
  }
  if (empty > 0) spdlog::warn("{} warm users have no embedded listening history", empty);
  if (skipped) *skipped = empty;
  return out;
}

}  // namespace coldstart
