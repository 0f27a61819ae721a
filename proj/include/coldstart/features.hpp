#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coldstart/catalog.hpp"
#include "coldstart/core.hpp"
#include "coldstart/entity_embeddings.hpp"
#include "coldstart/interactions.hpp"

namespace coldstart {

struct Channel {
  Signal signal = Signal::stream;
  EntityKind entity = EntityKind::track;
  friend bool operator==(const Channel&, const Channel&) = default;
};

// Layout of the dense input vector:
//   [embedding channels...][country block][age block][scalars...]
// Each block has `dim` components. Scalar names:
//   count:<signal>:<entity>  log1p of the channel's event count
//   age                      age / 100 clamped to [0, 1], 0 when unknown
//   missing:age              1 when age is unknown
//   missing:country          1 when the country block is the global fallback
//   missing:events           1 when the user has no event at all
//   missing:stream           1 when no stream event
//   missing:onboarding       1 when no onboarding selection
struct ChannelSpec {
  std::uint32_t version = 1;
  std::size_t dim = 0;
  std::vector<Channel> channels;
  bool country_block = true;
  bool age_block = true;
  std::vector<std::string> scalars;

  std::size_t block_count() const { return channels.size() + (country_block ? 1 : 0) + (age_block ? 1 : 0); }
  std::size_t total_dim() const { return block_count() * dim + scalars.size(); }

  // 5 signals x 4 entity levels, onboarding artists, country, age; 27 scalars.
  static ChannelSpec default_spec(std::size_t dim);

  // Throws DataError on unknown scalar names or duplicate channels.
  void validate() const;
  std::string to_text() const;
  static ChannelSpec from_text(const std::string& text);

  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;
};

// Mean warm-user embedding per country and per age class; groups smaller
// than the minimum size resolve to the global mean.
struct GroupEmbeddings {
  std::size_t dim = 0;
  std::map<std::string, Vector> countries;
  std::map<std::string, Vector> age_classes;
  Vector fallback;

  std::span<const float> country(const std::string& code) const;
  std::span<const float> age(AgeClass c) const;
  bool has_country(const std::string& code) const { return countries.contains(code); }

  std::string to_text() const;
  static GroupEmbeddings from_text(const std::string& text);

  friend bool operator==(const GroupEmbeddings&, const GroupEmbeddings&) = default;
};

GroupEmbeddings fit_group_embeddings(const EmbeddingTable& warm_embeddings, const UserUniverse& universe,
                                     std::size_t min_group_size = 10);

struct FeatureVector {
  std::vector<float> values;
  std::uint32_t spec_version = 0;
};

struct FeatureInput {
  Demographics demographics;
  std::int64_t registration_day = 0;
  std::span<const Event> events;  // must all be dated on registration_day
};

// Throws LeakageError when an event is dated off the registration day and
// DimensionError when the spec and embedding dimensions disagree.
FeatureVector assemble_features(const FeatureInput& input, const EntityEmbeddings& entities,
                                const GroupEmbeddings& groups, const ChannelSpec& spec);

// Feature rows keyed by user. With `slice_registration_day`, events outside
// the registration day are dropped first (warm users); otherwise they are
// rejected (cold users).
EmbeddingTable build_feature_table(std::span<const UserId> users, const UserUniverse& universe,
                                   const InteractionLog& log, const EntityEmbeddings& entities,
                                   const GroupEmbeddings& groups, const ChannelSpec& spec,
                                   bool slice_registration_day);

}  // namespace coldstart
