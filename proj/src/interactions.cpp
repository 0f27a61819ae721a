#include "coldstart/interactions.hpp"

#include <algorithm>
#include <string>

#include "coldstart/errors.hpp"

namespace coldstart {

std::string_view to_string(Signal s) {
  switch (s) {
    case Signal::stream: return "stream";
    case Signal::skip: return "skip";
    case Signal::ban: return "ban";
    case Signal::search: return "search";
    case Signal::favorite: return "favorite";
    case Signal::onboarding: return "onboarding";
  }
  return "?";
}

std::string_view to_string(EntityKind e) {
  switch (e) {
    case EntityKind::track: return "track";
    case EntityKind::artist: return "artist";
    case EntityKind::album: return "album";
    case EntityKind::playlist: return "playlist";
  }
  return "?";
}

Signal parse_signal(std::string_view name) {
  for (auto s : kAllSignals) {
    if (to_string(s) == name) return s;
  }
  throw UnknownSignalError(std::string(name));
}

EntityKind parse_entity(std::string_view name) {
  for (auto e : kAllEntities) {
    if (to_string(e) == name) return e;
  }
  throw UnknownEntityError(std::string(name));
}

InteractionLog::InteractionLog(std::vector<Event> events) : events_(std::move(events)) {
  std::sort(events_.begin(), events_.end());
}

std::span<const Event> InteractionLog::for_user(UserId user) const {
  auto lo = std::lower_bound(events_.begin(), events_.end(), user,
                             [](const Event& e, UserId u) { return e.user < u; });
  auto hi = std::upper_bound(lo, events_.end(), user,
                             [](UserId u, const Event& e) { return u < e.user; });
  return {lo, hi};
}

std::vector<UserId> InteractionLog::users() const {
  std::vector<UserId> out;
  for (const auto& e : events_) {
    if (out.empty() || out.back() != e.user) out.push_back(e.user);
  }
  return out;
}

std::vector<Event> registration_day_slice(std::span<const Event> events, std::int64_t day) {
  std::vector<Event> out;
  for (const auto& e : events) {
    if (day_of(e.timestamp) == day) out.push_back(e);
  }
  return out;
}

}  // namespace coldstart
