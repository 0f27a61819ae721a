#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "coldstart/core.hpp"

namespace coldstart {

enum class Signal : std::uint8_t { stream, skip, ban, search, favorite, onboarding };
enum class EntityKind : std::uint8_t { track, artist, album, playlist };

inline constexpr std::array kAllSignals{Signal::stream, Signal::skip,     Signal::ban,
                                        Signal::search, Signal::favorite, Signal::onboarding};
inline constexpr std::array kAllEntities{EntityKind::track, EntityKind::artist, EntityKind::album,
                                         EntityKind::playlist};

std::string_view to_string(Signal s);
std::string_view to_string(EntityKind e);
// Throw UnknownSignalError / UnknownEntityError.
Signal parse_signal(std::string_view name);
EntityKind parse_entity(std::string_view name);

inline constexpr std::int64_t kSecondsPerDay = 86400;

constexpr std::int64_t day_of(std::int64_t timestamp) {
  return timestamp >= 0 ? timestamp / kSecondsPerDay : -((-timestamp + kSecondsPerDay - 1) / kSecondsPerDay);
}

struct Event {
  UserId user = 0;
  std::int64_t timestamp = 0;  // seconds since epoch
  Signal signal = Signal::stream;
  EntityKind entity = EntityKind::track;
  EntityId item = 0;

  friend auto operator<=>(const Event&, const Event&) = default;
};

// Timestamped typed events, stored sorted by (user, timestamp, signal,
// entity, item). Immutable once built.
class InteractionLog {
 public:
  InteractionLog() = default;
  explicit InteractionLog(std::vector<Event> events);

  const std::vector<Event>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  std::span<const Event> for_user(UserId user) const;
  // Distinct users, ascending.
  std::vector<UserId> users() const;

  friend bool operator==(const InteractionLog&, const InteractionLog&) = default;

 private:
  std::vector<Event> events_;
};

// Events dated on `day` (registration day of the user).
std::vector<Event> registration_day_slice(std::span<const Event> events, std::int64_t day);

}  // namespace coldstart
