#include "coldstart/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "coldstart/entity_embeddings.hpp"
#include "coldstart/errors.hpp"

namespace coldstart {

void SyntheticConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw UsageError(std::string("synthetic config: ") + name + " must be >= 1");
  };
  positive(genres, "genres");
  positive(tracks, "tracks");
  positive(dim, "dim");
  positive(artists_per_genre, "artists_per_genre");
  positive(albums_per_artist, "albums_per_artist");
  positive(countries, "countries");
  if (tracks < genres) throw UsageError("synthetic config: need at least one track per genre");
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError(std::string("synthetic config: ") + name + " must lie in [0, 1]");
  };
  prob(noise, "noise");
  prob(p_unknown_age, "p_unknown_age");
  prob(p_unknown_country, "p_unknown_country");
  prob(p_onboarding, "p_onboarding");
  prob(p_stream, "p_stream");
  prob(validation_fraction, "validation_fraction");
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw UsageError(std::string("synthetic config: ") + name + " must be >= 0");
  };
  nonneg(zipf_exponent, "zipf_exponent");
  nonneg(demographic_strength, "demographic_strength");
  nonneg(skip_mean, "skip_mean");
  nonneg(ban_mean, "ban_mean");
  nonneg(search_mean, "search_mean");
  nonneg(favorite_mean, "favorite_mean");
  nonneg(history_listens_mean, "history_listens_mean");
  nonneg(truth_extra_mean, "truth_extra_mean");
  nonneg(embedding_noise, "embedding_noise");
  if (!(concentration > 0.0)) throw UsageError("synthetic config: concentration must be > 0");
  if (onboarding_mean < 1.0 || stream_mean < 1.0) {
    throw UsageError("synthetic config: onboarding_mean and stream_mean are conditional counts, >= 1");
  }
  if (history_days < 1 || truth_days < 1) throw UsageError("synthetic config: day windows must be >= 1");
  if (playlists > 0 && playlist_length == 0) throw UsageError("synthetic config: playlist_length must be >= 1");
}

namespace {

constexpr TrackId kTrackBase = 1;
constexpr EntityId kArtistBase = 100'001;
constexpr EntityId kAlbumBase = 200'001;
constexpr EntityId kPlaylistBase = 300'001;
constexpr UserId kWarmBase = 1'000'001;
constexpr UserId kColdBase = 2'000'001;
constexpr std::int64_t kFirstDay = 18'000;

const std::vector<std::string> kCountryCodes{"FR", "DE", "BR", "US", "GB", "MX", "JP", "SE",
                                             "IT", "ES", "CA", "AU", "NL", "PL", "AR", "CO"};

class Generator {
 public:
  explicit Generator(const SyntheticConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  SyntheticData run() {
    build_tracks();
    build_users();
    build_catalog();
    build_playlists();
    build_spaces();
    out_.bundle.name = "synthetic";
    out_.bundle.min_truth = cfg_.min_truth;
    out_.bundle.canonicalize();
    out_.bundle.validate();
    return std::move(out_);
  }

 private:
  struct Track {
    TrackId id;
    std::size_t genre;
    EntityId artist;
    EntityId album;
    double weight;
  };

  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<int>(mean)(rng_);
  }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(rng_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  std::size_t discrete(const std::vector<double>& w) {
    return std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng_);
  }

  void build_tracks() {
    const auto g_count = cfg_.genres;
    for (std::size_t g = 0; g < g_count; ++g) {
      char name[32];
      std::snprintf(name, sizeof name, "g%02zu", g);
      out_.genre_names.emplace_back(name);
      genre_weight_.push_back(1.0 / std::sqrt(double(g + 1)));
    }
    out_.genre_tracks.resize(g_count);
    TrackId next = kTrackBase;
    for (std::size_t g = 0; g < g_count; ++g) {
      const std::size_t n = cfg_.tracks / g_count + (g < cfg_.tracks % g_count ? 1 : 0);
      std::vector<double> weights;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i % cfg_.artists_per_genre;
        const std::size_t album = (i / cfg_.artists_per_genre) % cfg_.albums_per_artist;
        const EntityId artist = kArtistBase + g * cfg_.artists_per_genre + a;
        const EntityId album_id = kAlbumBase + (g * cfg_.artists_per_genre + a) * cfg_.albums_per_artist + album;
        const double w = 1.0 / std::pow(double(i + 1), cfg_.zipf_exponent);
        tracks_.push_back({next, g, artist, album_id, w});
        out_.track_genre[next] = g;
        weights.push_back(w);
        ++next;
      }
      const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& t = tracks_[tracks_.size() - n + i];
        out_.genre_tracks[g].emplace_back(t.id, weights[i] / total);
      }
      genre_sampler_.emplace_back(weights.begin(), weights.end());
      genre_offset_.push_back(tracks_.size() - n);
    }
  }

  const Track& track_in_genre(std::size_t g) { return tracks_[genre_offset_[g] + genre_sampler_[g](rng_)]; }

  const Track& track_from_mixture(const std::vector<double>& theta) { return track_in_genre(discrete(theta)); }

  // A genre the user hardly listens to.
  std::size_t disliked_genre(const std::vector<double>& theta) {
    std::vector<double> w(theta.size());
    for (std::size_t g = 0; g < theta.size(); ++g) w[g] = theta[g] < 1.0 / double(theta.size()) ? 1.0 : 0.0;
    if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) {
      const auto top = std::max_element(theta.begin(), theta.end()) - theta.begin();
      for (std::size_t g = 0; g < w.size(); ++g) w[g] = static_cast<std::ptrdiff_t>(g) == top ? 0.0 : 1.0;
      if (w.size() == 1) w[0] = 1.0;
    }
    return discrete(w);
  }

  std::vector<double> dirichlet(std::size_t n, double alpha) {
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> v(n);
    double total = 0.0;
    for (auto& x : v) total += (x = gamma(rng_));
    if (total <= 0.0) {
      v.assign(n, 1.0 / double(n));
      return v;
    }
    for (auto& x : v) x /= total;
    return v;
  }

  std::vector<double> genre_prior(const Demographics& demo) {
    const auto g_count = cfg_.genres;
    std::vector<double> prior(genre_weight_);
    if (demo.country != kUnknown) {
      const auto c = static_cast<std::size_t>(
          std::find(kCountryCodes.begin(), kCountryCodes.end(), demo.country) - kCountryCodes.begin());
      prior[c % g_count] *= 1.0 + cfg_.demographic_strength;
      prior[(c + 3) % g_count] *= 1.0 + cfg_.demographic_strength;
    }
    const auto a = age_class(demo.age);
    if (a != AgeClass::unknown) prior[(2 * static_cast<std::size_t>(a) + 1) % g_count] *= 1.0 + cfg_.demographic_strength / 2.0;
    return prior;
  }

  std::int64_t at(std::int64_t day) {
    return day * kSecondsPerDay + std::uniform_int_distribution<std::int64_t>(0, kSecondsPerDay - 1)(rng_);
  }

  void registration_events(UserId u, std::int64_t day, const std::vector<double>& theta, std::vector<Event>& out) {
    if (bernoulli(cfg_.p_onboarding)) {
      const int n = 1 + poisson(cfg_.onboarding_mean - 1.0);
      std::set<EntityId> chosen;
      for (int tries = 0; static_cast<int>(chosen.size()) < n && tries < 100 * n; ++tries) {
        chosen.insert(track_from_mixture(theta).artist);
      }
      for (auto artist : chosen) out.push_back({u, at(day), Signal::onboarding, EntityKind::artist, artist});
    }
    if (bernoulli(cfg_.p_stream)) {
      const int n = 1 + poisson(cfg_.stream_mean - 1.0);
      for (int i = 0; i < n; ++i) out.push_back({u, at(day), Signal::stream, EntityKind::track, track_from_mixture(theta).id});
    }
    for (int i = poisson(cfg_.skip_mean); i > 0; --i) {
      out.push_back({u, at(day), Signal::skip, EntityKind::track, track_in_genre(disliked_genre(theta)).id});
    }
    for (int i = poisson(cfg_.ban_mean); i > 0; --i) {
      out.push_back({u, at(day), Signal::ban, EntityKind::artist, track_in_genre(disliked_genre(theta)).artist});
    }
    for (int i = poisson(cfg_.search_mean); i > 0; --i) {
      const auto& t = track_from_mixture(theta);
      if (bernoulli(0.5)) out.push_back({u, at(day), Signal::search, EntityKind::artist, t.artist});
      else out.push_back({u, at(day), Signal::search, EntityKind::track, t.id});
    }
    for (int i = poisson(cfg_.favorite_mean); i > 0; --i) {
      const auto& t = track_from_mixture(theta);
      if (bernoulli(1.0 / 3.0)) out.push_back({u, at(day), Signal::favorite, EntityKind::album, t.album});
      else out.push_back({u, at(day), Signal::favorite, EntityKind::track, t.id});
    }
  }

  void history_events(UserId u, std::int64_t day, const std::vector<double>& theta, std::vector<Event>& out) {
    std::uniform_int_distribution<std::int64_t> offset(1, cfg_.history_days);
    for (int i = poisson(cfg_.history_listens_mean); i > 0; --i) {
      const auto& t = track_from_mixture(theta);
      const auto d = day + offset(rng_);
      out.push_back({u, at(d), Signal::stream, EntityKind::track, t.id});
      if (bernoulli(0.05)) out.push_back({u, at(d), Signal::favorite, EntityKind::track, t.id});
      if (bernoulli(0.02)) out.push_back({u, at(d), Signal::search, EntityKind::artist, t.artist});
      if (bernoulli(0.1)) out.push_back({u, at(d), Signal::skip, EntityKind::track, track_in_genre(disliked_genre(theta)).id});
    }
  }

  std::set<TrackId> ground_truth(const std::vector<double>& theta) {
    std::size_t support = 0;
    for (std::size_t g = 0; g < theta.size(); ++g) {
      if (theta[g] > 0.0) support += out_.genre_tracks[g].size();
    }
    const std::size_t target = std::min(support, cfg_.min_truth + static_cast<std::size_t>(poisson(cfg_.truth_extra_mean)));
    std::set<TrackId> truth;
    for (std::size_t draws = 0; truth.size() < target && draws < 1000 * (target + 1); ++draws) {
      truth.insert(track_from_mixture(theta).id);
    }
    return truth;
  }

  void build_users() {
    const auto countries = std::min(cfg_.countries, kCountryCodes.size());
    std::vector<Event> warm_events, cold_events;
    auto make_user = [&](UserId id, bool warm) {
      UserRecord rec;
      if (!bernoulli(cfg_.p_unknown_country)) {
        rec.demographics.country = kCountryCodes[std::uniform_int_distribution<std::size_t>(0, countries - 1)(rng_)];
      }
      if (!bernoulli(cfg_.p_unknown_age)) rec.demographics.age = std::uniform_int_distribution<int>(14, 65)(rng_);
      rec.registration_day = kFirstDay + std::uniform_int_distribution<std::int64_t>(0, 364)(rng_);
      const auto primary = discrete(genre_prior(rec.demographics));
      std::vector<double> theta = dirichlet(cfg_.genres, cfg_.concentration);
      for (auto& t : theta) t *= cfg_.noise;
      theta[primary] += 1.0 - cfg_.noise;
      out_.mixtures[id] = theta;
      if (warm) {
        out_.bundle.users.add_warm(id, rec);
        registration_events(id, rec.registration_day, theta, warm_events);
        history_events(id, rec.registration_day, theta, warm_events);
      } else {
        out_.bundle.users.add_cold(id, rec);
        registration_events(id, rec.registration_day, theta, cold_events);
        out_.bundle.truth[id] = ground_truth(theta);
      }
    };
    for (std::size_t i = 0; i < cfg_.warm_users; ++i) make_user(kWarmBase + i, true);
    std::vector<UserId> cold;
    for (std::size_t i = 0; i < cfg_.cold_users; ++i) {
      make_user(kColdBase + i, false);
      cold.push_back(kColdBase + i);
    }
    std::shuffle(cold.begin(), cold.end(), rng_);
    const auto n_val = static_cast<std::size_t>(std::llround(cfg_.validation_fraction * double(cold.size())));
    out_.bundle.validation.assign(cold.begin(), cold.begin() + static_cast<std::ptrdiff_t>(n_val));
    out_.bundle.test.assign(cold.begin() + static_cast<std::ptrdiff_t>(n_val), cold.end());
    out_.bundle.warm_log = InteractionLog(std::move(warm_events));
    out_.bundle.cold_log = InteractionLog(std::move(cold_events));
  }

  void build_catalog() {
    std::map<TrackId, std::size_t> listeners;
    UserId current = 0;
    std::set<TrackId> seen;
    for (const auto& e : out_.bundle.warm_log.events()) {
      if (e.user != current) {
        seen.clear();
        current = e.user;
      }
      if (e.signal == Signal::stream && e.entity == EntityKind::track && seen.insert(e.item).second) ++listeners[e.item];
    }
    std::vector<const Track*> order;
    for (const auto& t : tracks_) order.push_back(&t);
    std::stable_sort(order.begin(), order.end(), [&](const Track* a, const Track* b) {
      const auto la = listeners[a->id], lb = listeners[b->id];
      return la != lb ? la > lb : a->id < b->id;
    });
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto& t = *order[r];
      out_.bundle.catalog.add_track(t.id, {t.artist, t.album, {out_.genre_names[t.genre]}, static_cast<std::uint32_t>(r + 1)});
    }
  }

  void build_playlists() {
    for (std::size_t p = 0; p < cfg_.playlists; ++p) {
      const auto g = discrete(genre_weight_);
      const auto length = std::min(cfg_.playlist_length, tracks_.size());
      std::set<TrackId> members;
      std::vector<TrackId> list;
      for (std::size_t tries = 0; list.size() < length && tries < 100 * length; ++tries) {
        const auto genre = bernoulli(0.1) ? std::uniform_int_distribution<std::size_t>(0, cfg_.genres - 1)(rng_) : g;
        const auto id = track_in_genre(genre).id;
        if (members.insert(id).second) list.push_back(id);
      }
      out_.bundle.catalog.add_playlist(kPlaylistBase + p, std::move(list));
    }
  }

  void build_spaces() {
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto d = cfg_.dim;
    std::vector<std::vector<double>> centers(cfg_.genres, std::vector<double>(d));
    for (auto& c : centers) {
      for (auto& x : c) x = normal(rng_);
    }
    std::map<EntityId, std::vector<double>> artist_offset;
    EmbeddingTable planted(d);
    std::vector<double> row(d);
    for (const auto& t : tracks_) {
      auto [it, inserted] = artist_offset.try_emplace(t.artist, d);
      if (inserted) {
        for (auto& x : it->second) x = 0.5 * normal(rng_);
      }
      for (std::size_t j = 0; j < d; ++j) row[j] = centers[t.genre][j] + it->second[j] + cfg_.embedding_noise * normal(rng_);
      planted.add(t.id, std::span<const double>(row));
    }
    const std::vector<UserId> warm(out_.bundle.users.warm().begin(), out_.bundle.users.warm().end());
    out_.bundle.user_spaces["planted"] = warm_user_embeddings(out_.bundle.warm_log, warm, planted);
    out_.bundle.track_spaces["planted"] = std::move(planted);
  }

  const SyntheticConfig& cfg_;
  std::mt19937_64 rng_;
  SyntheticData out_;
  std::vector<Track> tracks_;
  std::vector<double> genre_weight_;
  std::vector<std::discrete_distribution<std::size_t>> genre_sampler_;
  std::vector<std::size_t> genre_offset_;
};

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  return Generator(cfg).run();
}

std::vector<TrackId> oracle_recommendation(const SyntheticData& data, UserId user, std::size_t k) {
  auto it = data.mixtures.find(user);
  if (it == data.mixtures.end()) throw DataError("no mixture for user " + std::to_string(user));
  std::vector<Scored> scored;
  for (std::size_t g = 0; g < data.genre_tracks.size(); ++g) {
    for (const auto& [id, p] : data.genre_tracks[g]) scored.push_back({id, it->second[g] * p});
  }
  const auto n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), ranks_before);
  std::vector<TrackId> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(scored[i].id);
  return out;
}

}  // namespace coldstart
