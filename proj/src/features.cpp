#include "coldstart/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "coldstart/binary_io.hpp"
#include "coldstart/errors.hpp"

namespace coldstart {

namespace {

constexpr Signal kInteractionSignals[] = {Signal::stream, Signal::skip, Signal::ban, Signal::search,
                                          Signal::favorite};

std::string count_scalar(const Channel& c) {
  return "count:" + std::string(to_string(c.signal)) + ":" + std::string(to_string(c.entity));
}

bool is_known_scalar(const std::string& name, const std::vector<Channel>& channels) {
  static const std::set<std::string> fixed{"age", "missing:age", "missing:country", "missing:events",
                                           "missing:stream", "missing:onboarding"};
  if (fixed.contains(name)) return true;
  for (const auto& c : channels) {
    if (count_scalar(c) == name) return true;
  }
  return false;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string format_vector(std::span<const float> v) {
  std::string s;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (j) s += ',';
    s += io::format_float(v[j]);
  }
  return s;
}

Vector parse_vector(const std::string& s) {
  Vector v;
  for (const auto& part : split(s, ',')) v.push_back(io::parse_float(part));
  return v;
}

}  // namespace

ChannelSpec ChannelSpec::default_spec(std::size_t dim) {
  ChannelSpec spec;
  spec.dim = dim;
  for (auto s : kInteractionSignals) {
    for (auto e : kAllEntities) spec.channels.push_back({s, e});
  }
  spec.channels.push_back({Signal::onboarding, EntityKind::artist});
  for (const auto& c : spec.channels) spec.scalars.push_back(count_scalar(c));
  for (const char* name : {"age", "missing:age", "missing:country", "missing:events", "missing:stream",
                           "missing:onboarding"}) {
    spec.scalars.emplace_back(name);
  }
  return spec;
}

void ChannelSpec::validate() const {
  if (dim == 0) throw DataError("channel spec dimension must be positive");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    for (std::size_t j = i + 1; j < channels.size(); ++j) {
      if (channels[i] == channels[j]) throw DataError("duplicate channel in spec");
    }
  }
  std::set<std::string> seen;
  for (const auto& s : scalars) {
    if (!is_known_scalar(s, channels)) throw DataError("unknown scalar feature '" + s + "'");
    if (!seen.insert(s).second) throw DataError("duplicate scalar feature '" + s + "'");
  }
}

std::string ChannelSpec::to_text() const {
  std::ostringstream out;
  out << "channel_spec " << version << '\n';
  out << "dim " << dim << '\n';
  for (const auto& c : channels) out << "channel " << to_string(c.signal) << ' ' << to_string(c.entity) << '\n';
  if (country_block) out << "demographic country\n";
  if (age_block) out << "demographic age\n";
  for (const auto& s : scalars) out << "scalar " << s << '\n';
  out << "total_dim " << total_dim() << '\n';
  return out.str();
}

ChannelSpec ChannelSpec::from_text(const std::string& text) {
  ChannelSpec spec;
  spec.country_block = false;
  spec.age_block = false;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  std::size_t declared_total = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "channel_spec") {
      ls >> spec.version;
      header = true;
    } else if (key == "dim") {
      ls >> spec.dim;
    } else if (key == "channel") {
      std::string sig, ent;
      ls >> sig >> ent;
      spec.channels.push_back({parse_signal(sig), parse_entity(ent)});
    } else if (key == "demographic") {
      std::string which;
      ls >> which;
      if (which == "country") spec.country_block = true;
      else if (which == "age") spec.age_block = true;
      else throw FormatError(FormatError::Kind::parse, "unknown demographic block '" + which + "'");
    } else if (key == "scalar") {
      std::string name;
      ls >> name;
      spec.scalars.push_back(name);
    } else if (key == "total_dim") {
      ls >> declared_total;
    } else {
      throw FormatError(FormatError::Kind::parse, "unknown channel spec line '" + line + "'");
    }
  }
  if (!header) throw FormatError(FormatError::Kind::bad_magic, "not a channel spec manifest");
  spec.validate();
  if (declared_total != 0 && declared_total != spec.total_dim()) {
    throw FormatError(FormatError::Kind::shape_mismatch, "channel spec total_dim does not match its channels");
  }
  return spec;
}

std::span<const float> GroupEmbeddings::country(const std::string& code) const {
  auto it = countries.find(code);
  return it == countries.end() ? std::span<const float>(fallback) : std::span<const float>(it->second);
}

std::span<const float> GroupEmbeddings::age(AgeClass c) const {
  auto it = age_classes.find(std::string(to_string(c)));
  return it == age_classes.end() ? std::span<const float>(fallback) : std::span<const float>(it->second);
}

std::string GroupEmbeddings::to_text() const {
  std::ostringstream out;
  out << "group_embeddings " << dim << '\n';
  out << "fallback\t-\t" << format_vector(fallback) << '\n';
  for (const auto& [k, v] : countries) out << "country\t" << k << '\t' << format_vector(v) << '\n';
  for (const auto& [k, v] : age_classes) out << "age\t" << k << '\t' << format_vector(v) << '\n';
  return out.str();
}

GroupEmbeddings GroupEmbeddings::from_text(const std::string& text) {
  GroupEmbeddings g;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("group_embeddings ", 0) != 0) {
    throw FormatError(FormatError::Kind::bad_magic, "not a group embeddings file");
  }
  g.dim = io::parse_u64(line.substr(17));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto parts = split(line, '\t');
    if (parts.size() != 3) throw FormatError(FormatError::Kind::parse, "bad group embedding line");
    auto v = parse_vector(parts[2]);
    if (v.size() != g.dim) throw FormatError(FormatError::Kind::shape_mismatch, "group vector length mismatch");
    if (parts[0] == "fallback") g.fallback = std::move(v);
    else if (parts[0] == "country") g.countries[parts[1]] = std::move(v);
    else if (parts[0] == "age") g.age_classes[parts[1]] = std::move(v);
    else throw FormatError(FormatError::Kind::parse, "unknown group kind '" + parts[0] + "'");
  }
  if (g.fallback.size() != g.dim) throw FormatError(FormatError::Kind::parse, "group embeddings lack a fallback");
  return g;
}

GroupEmbeddings fit_group_embeddings(const EmbeddingTable& warm_embeddings, const UserUniverse& universe,
                                     std::size_t min_group_size) {
  if (warm_embeddings.empty()) throw DataError("group embeddings need at least one warm user");
  const auto d = warm_embeddings.dim();
  struct Acc {
    std::vector<double> sum;
    std::size_t n = 0;
  };
  std::map<std::string, Acc> countries, ages;
  Acc global;
  auto add = [d](Acc& a, std::span<const float> row) {
    if (a.sum.empty()) a.sum.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) a.sum[j] += row[j];
    ++a.n;
  };
  for (std::size_t p = 0; p < warm_embeddings.size(); ++p) {
    const auto id = warm_embeddings.ids()[p];
    const auto row = warm_embeddings.row(p);
    add(global, row);
    if (!universe.contains(id)) continue;
    const auto& demo = universe.record(id).demographics;
    if (!demo.country.empty() && demo.country != kUnknown) add(countries[demo.country], row);
    const auto cls = age_class(demo.age);
    if (cls != AgeClass::unknown) add(ages[std::string(to_string(cls))], row);
  }
  auto mean = [d](const Acc& a) {
    Vector v(d);
    for (std::size_t j = 0; j < d; ++j) v[j] = static_cast<float>(a.sum[j] / double(a.n));
    return v;
  };
  GroupEmbeddings g;
  g.dim = d;
  g.fallback = mean(global);
  for (const auto& [k, a] : countries) {
    if (a.n >= min_group_size) g.countries[k] = mean(a);
  }
  for (const auto& [k, a] : ages) {
    if (a.n >= min_group_size) g.age_classes[k] = mean(a);
  }
  return g;
}

FeatureVector assemble_features(const FeatureInput& input, const EntityEmbeddings& entities,
                                const GroupEmbeddings& groups, const ChannelSpec& spec) {
  const auto d = spec.dim;
  if (entities.dim() != d || groups.dim != d) {
    throw DimensionError("channel spec dimension " + std::to_string(d) +
                         " does not match embedding dimension " + std::to_string(entities.dim()));
  }
  for (const auto& e : input.events) {
    const auto day = day_of(e.timestamp);
    if (day != input.registration_day) {
      throw LeakageError("event of user " + std::to_string(e.user) + " dated day " + std::to_string(day) +
                         (day > input.registration_day ? ", after" : ", before") + " registration day " +
                         std::to_string(input.registration_day));
    }
  }

  FeatureVector fv;
  fv.spec_version = spec.version;
  fv.values.assign(spec.total_dim(), 0.0f);
  std::size_t offset = 0;
  std::map<std::string, double> scalar_values;

  for (const auto& ch : spec.channels) {
    std::vector<double> acc(d, 0.0);
    double resolved = 0.0;
    std::size_t count = 0;
    const auto& table = entities.table(ch.entity);
    for (const auto& e : input.events) {
      if (e.signal != ch.signal || e.entity != ch.entity) continue;
      ++count;
      auto row = table.find(e.item);
      if (row.empty()) continue;
      for (std::size_t j = 0; j < d; ++j) acc[j] += row[j];
      resolved += 1.0;
    }
    if (resolved > 0.0) {
      for (std::size_t j = 0; j < d; ++j) fv.values[offset + j] = static_cast<float>(acc[j] / resolved);
    }
    scalar_values[count_scalar(ch)] = std::log1p(double(count));
    offset += d;
  }

  const auto& demo = input.demographics;
  if (spec.country_block) {
    auto v = groups.country(demo.country);
    std::copy(v.begin(), v.end(), fv.values.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += d;
  }
  const auto cls = age_class(demo.age);
  if (spec.age_block) {
    auto v = groups.age(cls);
    std::copy(v.begin(), v.end(), fv.values.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += d;
  }

  auto has = [&](Signal s) {
    return std::any_of(input.events.begin(), input.events.end(), [s](const Event& e) { return e.signal == s; });
  };
  scalar_values["age"] = cls == AgeClass::unknown ? 0.0 : std::clamp(double(*demo.age) / 100.0, 0.0, 1.0);
  scalar_values["missing:age"] = cls == AgeClass::unknown ? 1.0 : 0.0;
  scalar_values["missing:country"] = groups.has_country(demo.country) ? 0.0 : 1.0;
  scalar_values["missing:events"] = input.events.empty() ? 1.0 : 0.0;
  scalar_values["missing:stream"] = has(Signal::stream) ? 0.0 : 1.0;
  scalar_values["missing:onboarding"] = has(Signal::onboarding) ? 0.0 : 1.0;
  for (const auto& name : spec.scalars) {
    auto it = scalar_values.find(name);
    fv.values[offset++] = it == scalar_values.end() ? 0.0f : static_cast<float>(it->second);
  }
  return fv;
}

EmbeddingTable build_feature_table(std::span<const UserId> users, const UserUniverse& universe,
                                   const InteractionLog& log, const EntityEmbeddings& entities,
                                   const GroupEmbeddings& groups, const ChannelSpec& spec,
                                   bool slice_registration_day) {
  EmbeddingTable out(spec.total_dim());
  for (auto u : users) {
    const auto& rec = universe.record(u);
    auto events = log.for_user(u);
    std::vector<Event> sliced;
    FeatureInput input{rec.demographics, rec.registration_day, events};
    if (slice_registration_day) {
      sliced = registration_day_slice(events, rec.registration_day);
      input.events = sliced;
    }
    auto fv = assemble_features(input, entities, groups, spec);
    out.add(u, std::span<const float>(fv.values));
  }
  return out;
}

}  // namespace coldstart
