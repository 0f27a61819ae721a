#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coldstart/core.hpp"

namespace coldstart {

struct TrackMeta {
  EntityId artist = 0;
  EntityId album = 0;
  std::vector<std::string> genres;
  std::uint32_t popularity_rank = 0;  // 1 = most popular

  friend bool operator==(const TrackMeta&, const TrackMeta&) = default;
};

// The fixed track universe plus the collections tracks belong to.
class Catalog {
 public:
  void add_track(TrackId id, TrackMeta meta);
  void add_playlist(EntityId id, std::vector<TrackId> tracks);

  // Ids unique, ranks a bijection onto 1..m, playlist members known.
  // Throws DataError listing offending records.
  void validate() const;

  std::size_t size() const { return tracks_.size(); }
  bool contains(TrackId id) const { return tracks_.contains(id); }
  const TrackMeta& meta(TrackId id) const;
  const std::map<TrackId, TrackMeta>& tracks() const { return tracks_; }
  const std::map<EntityId, std::vector<TrackId>>& playlists() const { return playlists_; }

  bool has_artist(EntityId id) const { return artists_.contains(id); }
  bool has_album(EntityId id) const { return albums_.contains(id); }
  bool has_playlist(EntityId id) const { return playlists_.contains(id); }
  // Empty span for unknown ids.
  std::span<const TrackId> artist_tracks(EntityId artist) const;
  std::span<const TrackId> album_tracks(EntityId album) const;
  std::span<const TrackId> playlist_tracks(EntityId playlist) const;
  const std::map<EntityId, std::vector<TrackId>>& artists() const { return artists_; }
  const std::map<EntityId, std::vector<TrackId>>& albums() const { return albums_; }

  // All track ids ordered by popularity rank.
  std::vector<TrackId> by_popularity() const;
  // Union of the genre tags of an artist's tracks, sorted.
  std::vector<std::string> artist_genres(EntityId artist) const;

  friend bool operator==(const Catalog& a, const Catalog& b) {
    return a.tracks_ == b.tracks_ && a.playlists_ == b.playlists_;
  }

 private:
  std::map<TrackId, TrackMeta> tracks_;
  std::map<EntityId, std::vector<TrackId>> playlists_;
  std::map<EntityId, std::vector<TrackId>> artists_;
  std::map<EntityId, std::vector<TrackId>> albums_;
};

enum class AgeClass : std::uint8_t { under_18, from_18_to_24, from_25_to_34, from_35_to_49, over_50, unknown };

inline constexpr std::string_view kUnknown = "unknown";

AgeClass age_class(std::optional<int> age);
std::string_view to_string(AgeClass c);

struct Demographics {
  std::string country = std::string(kUnknown);  // ISO code
  std::optional<int> age;                       // years

  friend bool operator==(const Demographics&, const Demographics&) = default;
};

struct UserRecord {
  Demographics demographics;
  std::int64_t registration_day = 0;

  friend bool operator==(const UserRecord&, const UserRecord&) = default;
};

class UserUniverse {
 public:
  void add_warm(UserId id, UserRecord record);
  void add_cold(UserId id, UserRecord record);

  // warm and cold disjoint; every user has a record.
  void validate() const;

  const std::set<UserId>& warm() const { return warm_; }
  const std::set<UserId>& cold() const { return cold_; }
  bool is_warm(UserId id) const { return warm_.contains(id); }
  bool is_cold(UserId id) const { return cold_.contains(id); }
  bool contains(UserId id) const { return records_.contains(id); }
  const UserRecord& record(UserId id) const;
  const std::map<UserId, UserRecord>& records() const { return records_; }

  friend bool operator==(const UserUniverse&, const UserUniverse&) = default;

 private:
  std::set<UserId> warm_;
  std::set<UserId> cold_;
  std::map<UserId, UserRecord> records_;
};

}  // namespace coldstart
