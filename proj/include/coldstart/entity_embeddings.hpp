#pragma once

#include <span>

#include "coldstart/catalog.hpp"
#include "coldstart/core.hpp"
#include "coldstart/interactions.hpp"

namespace coldstart {

// Mean of member-track embeddings: artist = its tracks, album = album
// tracks, playlist = tracklist, track = the row itself. No embedded member
// yields the null vector.
MeanEmbedding derive_entity_embedding(EntityKind kind, EntityId id, const EmbeddingTable& tracks,
                                      const Catalog& catalog);

// Track table plus derived artist/album/playlist tables. Entities whose
// embedding is null have no row.
struct EntityEmbeddings {
  EmbeddingTable tracks;
  EmbeddingTable artists;
  EmbeddingTable albums;
  EmbeddingTable playlists;

  std::size_t dim() const { return tracks.dim(); }
  const EmbeddingTable& table(EntityKind kind) const;
};

EntityEmbeddings build_entity_embeddings(EmbeddingTable tracks, const Catalog& catalog);

enum class HistoryWeighting { stream_count, distinct };

// Mean over the user's streamed tracks; count weighting repeats a track once
// per stream.
MeanEmbedding warm_user_embedding_from_history(std::span<const Event> user_events, const EmbeddingTable& tracks,
                                               HistoryWeighting weighting = HistoryWeighting::stream_count);

// History means for `users`; users with an empty history are skipped and
// counted in `skipped`.
EmbeddingTable warm_user_embeddings(const InteractionLog& log, std::span<const UserId> users,
                                    const EmbeddingTable& tracks,
                                    HistoryWeighting weighting = HistoryWeighting::stream_count,
                                    std::size_t* skipped = nullptr);

}  // namespace coldstart
