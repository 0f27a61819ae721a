#include "coldstart/catalog.hpp"

#include <algorithm>

#include "coldstart/errors.hpp"

namespace coldstart {

namespace {

std::string join_ids(const std::vector<EntityId>& ids, std::size_t limit = 10) {
  std::string s;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) {
    if (i) s += ", ";
    s += std::to_string(ids[i]);
  }
  if (ids.size() > limit) s += ", ... (" + std::to_string(ids.size()) + " total)";
  return s;
}

}  // namespace

void Catalog::add_track(TrackId id, TrackMeta meta) {
  if (tracks_.contains(id)) throw DataError("duplicate track id " + std::to_string(id));
  artists_[meta.artist].push_back(id);
  albums_[meta.album].push_back(id);
  tracks_.emplace(id, std::move(meta));
}

void Catalog::add_playlist(EntityId id, std::vector<TrackId> tracks) {
  if (playlists_.contains(id)) throw DataError("duplicate playlist id " + std::to_string(id));
  playlists_.emplace(id, std::move(tracks));
}

void Catalog::validate() const {
  const auto m = tracks_.size();
  std::vector<char> seen(m + 1, 0);
  std::vector<EntityId> bad;
  for (const auto& [id, meta] : tracks_) {
    if (meta.popularity_rank < 1 || meta.popularity_rank > m || seen[meta.popularity_rank]) {
      bad.push_back(id);
    } else {
      seen[meta.popularity_rank] = 1;
    }
  }
  if (!bad.empty()) {
    throw DataError("popularity ranks are not a bijection onto 1.." + std::to_string(m) +
                    "; offending tracks: " + join_ids(bad));
  }
  for (const auto& [pid, members] : playlists_) {
    for (auto t : members) {
      if (!tracks_.contains(t)) bad.push_back(pid);
    }
  }
  if (!bad.empty()) throw DataError("playlists reference unknown tracks: " + join_ids(bad));
}

const TrackMeta& Catalog::meta(TrackId id) const {
  auto it = tracks_.find(id);
  if (it == tracks_.end()) throw DataError("track " + std::to_string(id) + " not in catalog");
  return it->second;
}

static std::span<const TrackId> lookup(const std::map<EntityId, std::vector<TrackId>>& m, EntityId id) {
  auto it = m.find(id);
  if (it == m.end()) return {};
  return it->second;
}

std::span<const TrackId> Catalog::artist_tracks(EntityId artist) const { return lookup(artists_, artist); }
std::span<const TrackId> Catalog::album_tracks(EntityId album) const { return lookup(albums_, album); }
std::span<const TrackId> Catalog::playlist_tracks(EntityId playlist) const {
  return lookup(playlists_, playlist);
}

std::vector<TrackId> Catalog::by_popularity() const {
  std::vector<TrackId> ids;
  ids.reserve(tracks_.size());
  for (const auto& [id, _] : tracks_) ids.push_back(id);
  std::sort(ids.begin(), ids.end(), [&](TrackId a, TrackId b) {
    const auto ra = tracks_.at(a).popularity_rank, rb = tracks_.at(b).popularity_rank;
    return ra != rb ? ra < rb : a < b;
  });
  return ids;
}

std::vector<std::string> Catalog::artist_genres(EntityId artist) const {
  std::vector<std::string> out;
  for (auto t : artist_tracks(artist)) {
    const auto& g = tracks_.at(t).genres;
    out.insert(out.end(), g.begin(), g.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

AgeClass age_class(std::optional<int> age) {
  if (!age || *age < 0) return AgeClass::unknown;
  if (*age < 18) return AgeClass::under_18;
  if (*age <= 24) return AgeClass::from_18_to_24;
  if (*age <= 34) return AgeClass::from_25_to_34;
  if (*age <= 49) return AgeClass::from_35_to_49;
  return AgeClass::over_50;
}

std::string_view to_string(AgeClass c) {
  switch (c) {
    case AgeClass::under_18: return "<18";
    case AgeClass::from_18_to_24: return "18-24";
    case AgeClass::from_25_to_34: return "25-34";
    case AgeClass::from_35_to_49: return "35-49";
    case AgeClass::over_50: return "50+";
    case AgeClass::unknown: return "unknown";
  }
  return "unknown";
}

void UserUniverse::add_warm(UserId id, UserRecord record) {
  if (records_.contains(id)) throw DataError("duplicate user id " + std::to_string(id));
  warm_.insert(id);
  records_.emplace(id, std::move(record));
}

void UserUniverse::add_cold(UserId id, UserRecord record) {
  if (records_.contains(id)) throw DataError("duplicate user id " + std::to_string(id));
  cold_.insert(id);
  records_.emplace(id, std::move(record));
}

void UserUniverse::validate() const {
  std::vector<EntityId> both;
  std::set_intersection(warm_.begin(), warm_.end(), cold_.begin(), cold_.end(), std::back_inserter(both));
  if (!both.empty()) throw DataError("users both warm and cold: " + join_ids(both));
  std::vector<EntityId> missing;
  for (auto u : warm_) {
    if (!records_.contains(u)) missing.push_back(u);
  }
  for (auto u : cold_) {
    if (!records_.contains(u)) missing.push_back(u);
  }
  if (!missing.empty()) throw DataError("users without demographics: " + join_ids(missing));
}

const UserRecord& UserUniverse::record(UserId id) const {
  auto it = records_.find(id);
  if (it == records_.end()) throw DataError("unknown user " + std::to_string(id));
  return it->second;
}

}  // namespace coldstart
