#include "coldstart/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "coldstart/affinity.hpp"
#include "coldstart/binary_io.hpp"
#include "coldstart/errors.hpp"
#include "coldstart/fingerprint.hpp"
#include "coldstart/sppmi.hpp"

namespace coldstart {

SpaceData prepare_space(const DatasetBundle& bundle, const std::string& space, const SpaceConfig& cfg) {
  SpaceData out;
  out.name = space;
  const std::vector<UserId> warm(bundle.users.warm().begin(), bundle.users.warm().end());
  if (space == "tt-svd") {
    auto collections = playlist_collections(bundle.catalog);
    if (collections.empty()) {
      for (auto u : warm) {
        std::set<TrackId> tracks;
        for (const auto& e : bundle.warm_log.for_user(u)) {
          if (e.signal == Signal::stream && e.entity == EntityKind::track) tracks.insert(e.item);
        }
        collections.emplace_back(tracks.begin(), tracks.end());
      }
    }
    const auto counts = count_cooccurrences(collections, bundle.catalog);
    const auto sppmi = build_sppmi(counts, cfg.sppmi_shift);
    SvdConfig svd;
    svd.dim = cfg.dim;
    svd.seed = cfg.seed;
    out.tracks = train_svd_embeddings(sppmi, counts.tracks, svd).table;
    out.warm_users = warm_user_embeddings(bundle.warm_log, warm, out.tracks);
  } else if (space == "ut-als") {
    const auto affinity = build_affinity_matrix(bundle.warm_log, bundle.catalog);
    AlsConfig als;
    als.dim = cfg.dim;
    als.seed = cfg.seed;
    als.iterations = cfg.als_iterations;
    als.lambda = cfg.als_lambda;
    als.alpha = cfg.als_alpha;
    als.track_objective = false;
    auto result = train_als(affinity, als);
    out.tracks = std::move(result.tracks);
    out.warm_users = std::move(result.users);
  } else {
    auto it = bundle.track_spaces.find(space);
    if (it == bundle.track_spaces.end()) {
      throw DataError("bundle has no embedding space '" + space + "' (trainable spaces: tt-svd, ut-als)");
    }
    out.tracks = it->second;
    auto uit = bundle.user_spaces.find(space);
    out.warm_users = uit != bundle.user_spaces.end() ? uit->second
                                                     : warm_user_embeddings(bundle.warm_log, warm, out.tracks);
  }
  if (out.warm_users.empty()) throw DataError("space '" + space + "' embeds no warm user");
  return out;
}

FeatureSet build_feature_set(const DatasetBundle& bundle, const SpaceData& space, std::span<const UserId> cold_users,
                             std::size_t min_group_size) {
  FeatureSet f;
  f.spec = ChannelSpec::default_spec(space.tracks.dim());
  f.entities = build_entity_embeddings(space.tracks, bundle.catalog);
  f.groups = fit_group_embeddings(space.warm_users, bundle.users, min_group_size);
  std::vector<UserId> warm;
  f.warm_targets = EmbeddingTable(space.warm_users.dim());
  for (std::size_t p = 0; p < space.warm_users.size(); ++p) {
    const auto id = space.warm_users.ids()[p];
    if (!bundle.users.is_warm(id)) continue;
    warm.push_back(id);
    f.warm_targets.add(id, space.warm_users.row(p));
  }
  f.warm_features =
      build_feature_table(warm, bundle.users, bundle.warm_log, f.entities, f.groups, f.spec, /*slice=*/true);
  f.cold_features =
      build_feature_table(cold_users, bundle.users, bundle.cold_log, f.entities, f.groups, f.spec, /*slice=*/false);
  return f;
}

std::vector<Recommendation> recommend_users(Strategy strategy, std::span<const UserId> users,
                                            const StrategyInputs& in, std::size_t k) {
  auto need = [&](const void* p, const char* what) {
    if (!p) throw UsageError(std::string("strategy ") + std::string(to_string(strategy)) + " needs " + what);
  };
  need(in.popularity, "a popularity table");
  auto row = [](const EmbeddingTable& t, UserId u, const char* what) {
    auto r = t.find(u);
    if (r.empty()) throw DataError(std::string("no ") + what + " for user " + std::to_string(u));
    return r;
  };
  std::vector<Recommendation> out;
  out.reserve(users.size());
  for (auto u : users) {
    switch (strategy) {
      case Strategy::popularity:
        out.push_back(recommend_popularity(u, *in.popularity, k));
        break;
      case Strategy::semi:
        need(in.cold_embeddings, "predicted embeddings");
        need(in.segmentation, "a segmentation");
        out.push_back(recommend_semi_personalized(u, row(*in.cold_embeddings, u, "predicted embedding"),
                                                  *in.segmentation, *in.popularity, k));
        break;
      case Strategy::full:
        need(in.cold_embeddings, "predicted embeddings");
        need(in.tracks, "track embeddings");
        out.push_back(recommend_full_personalized(u, row(*in.cold_embeddings, u, "predicted embedding"), *in.tracks,
                                                  *in.popularity, k));
        break;
      case Strategy::reg_streams:
        need(in.cold_log, "the registration-day log");
        need(in.tracks, "track embeddings");
        out.push_back(recommend_registration_streams(u, in.cold_log->for_user(u), *in.tracks, *in.popularity, k));
        break;
      case Strategy::feat_cluster:
        need(in.cold_features, "cold features");
        need(in.feature_clusters, "feature clusters");
        out.push_back(recommend_feature_cluster(u, row(*in.cold_features, u, "feature vector"),
                                                *in.feature_clusters, *in.popularity, k));
        break;
    }
  }
  return out;
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream out;
  out << "strategies=";
  for (std::size_t i = 0; i < strategies.size(); ++i) out << (i ? "," : "") << to_string(strategies[i]);
  out << "\ntop_k=" << top_k << "\nseeds=" << seeds << "\nbase_seed=" << base_seed << "\nsegments=" << segments
      << "\nfeature_segments=" << feature_segments << "\nsplit=" << split << "\nhidden=";
  for (std::size_t i = 0; i < hidden.size(); ++i) out << (i ? "," : "") << hidden[i];
  out << "\nlearning_rate=" << io::format_double(train.learning_rate) << "\nbatch_size=" << train.batch_size
      << "\nepochs=" << train.epochs << "\nmomentum=" << io::format_double(train.momentum)
      << "\nbn_momentum=" << io::format_double(train.bn_momentum) << "\nmin_group_size=" << min_group_size << "\n";
  return out.str();
}

const StrategyReport& EvalReport::get(Strategy s) const {
  for (const auto& r : strategies) {
    if (r.strategy == s) return r;
  }
  throw UsageError("report has no strategy " + std::string(to_string(s)));
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= double(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / double(values.size() - 1));
  }
  return s;
}

SeedArtifacts run_seed(const DatasetBundle& bundle, const SpaceData& space, const FeatureSet& features,
                       const ExperimentConfig& cfg, std::uint64_t seed, std::span<const UserId> users) {
  SeedArtifacts a;
  a.seed = seed;
  const auto& strategies = cfg.strategies;
  auto wants = [&](Strategy s) { return std::find(strategies.begin(), strategies.end(), s) != strategies.end(); };

  const bool needs_model = wants(Strategy::semi) || wants(Strategy::full);
  if (needs_model) {
    RegressorSpec spec;
    spec.input_dim = features.spec.total_dim();
    spec.hidden = cfg.hidden;
    spec.output_dim = space.tracks.dim();
    auto model = init_model(spec, seed);
    model.channel_spec_version = features.spec.version;
    TrainConfig train = cfg.train;
    train.seed = seed;
    auto result = coldstart::train(std::move(model), to_matrix(features.warm_features), to_matrix(features.warm_targets), train);
    a.model = std::move(result.model);
    a.history = std::move(result.history);
    EmbeddingTable cold(features.cold_features.dim());
    for (auto u : users) {
      auto row = features.cold_features.find(u);
      if (row.empty()) throw DataError("no feature vector for user " + std::to_string(u));
      cold.add(u, row);
    }
    a.cold_embeddings = predict_cold_embeddings(a.model, cold);
  }
  if (wants(Strategy::semi)) {
    a.segmentation = build_segmentation(space.warm_users, {cfg.segments, seed, 100, 1e-4});
    a.segmentation.top_items = segment_top_items(a.segmentation, bundle.warm_log, bundle.catalog, cfg.top_k);
  }
  if (wants(Strategy::feat_cluster)) {
    a.feature_clusters = fit_feature_clusters(features.warm_features, bundle.warm_log, bundle.catalog,
                                              {cfg.feature_segments, seed, 100, 1e-4}, cfg.top_k);
  }
  const auto popularity = build_popularity_table(bundle.catalog, bundle.warm_log);
  StrategyInputs in;
  in.cold_log = &bundle.cold_log;
  in.popularity = &popularity;
  in.tracks = &space.tracks;
  in.cold_embeddings = needs_model ? &a.cold_embeddings : nullptr;
  in.segmentation = wants(Strategy::semi) ? &a.segmentation : nullptr;
  in.cold_features = &features.cold_features;
  in.feature_clusters = wants(Strategy::feat_cluster) ? &a.feature_clusters : nullptr;
  for (auto s : strategies) a.recommendations[s] = recommend_users(s, users, in, cfg.top_k);
  return a;
}

EvalReport run_experiment(const DatasetBundle& bundle, const SpaceData& space, const FeatureSet& features,
                          const ExperimentConfig& cfg, SeedArtifacts* first_seed) {
  if (cfg.seeds < 1) throw UsageError("experiment needs at least one seed");
  if (cfg.top_k < 1) throw UsageError("top-K must be >= 1");
  if (cfg.strategies.empty()) throw UsageError("experiment needs at least one strategy");
  const auto& split = bundle.split(cfg.split);

  EvalReport report;
  report.space = space.name;
  report.split = cfg.split;
  report.top_k = cfg.top_k;
  report.seeds = cfg.seeds;
  report.fingerprint = fingerprint(cfg.to_text() + "space=" + space.name + "\nbundle=" + bundle.name + "\n");

  std::vector<UserId> users;
  for (auto u : split) {
    auto it = bundle.truth.find(u);
    if (it == bundle.truth.end() || it->second.empty()) {
      ++report.excluded;
      continue;
    }
    users.push_back(u);
  }
  if (report.excluded > 0) spdlog::warn("{} users without ground truth excluded from the means", report.excluded);
  report.users = users.size();
  if (users.empty()) throw DataError("split '" + cfg.split + "' has no user with ground truth");

  std::map<Strategy, std::vector<std::vector<UserScores>>> scores;  // strategy -> seed -> user
  for (std::size_t i = 0; i < cfg.seeds; ++i) {
    const auto seed = cfg.base_seed + i;
    auto art = run_seed(bundle, space, features, cfg, seed, users);
    for (auto s : cfg.strategies) {
      std::vector<UserScores> per_user;
      for (const auto& rec : art.recommendations.at(s)) {
        const auto ids = rec.track_ids();
        per_user.push_back(*score_user(ids, bundle.truth.at(rec.user), cfg.top_k));
      }
      scores[s].push_back(std::move(per_user));
    }
    spdlog::info("seed {} done", seed);
    if (i == 0 && first_seed) *first_seed = std::move(art);
  }

  for (auto s : cfg.strategies) {
    StrategyReport r;
    r.strategy = s;
    std::vector<double> p, rc, n;
    for (const auto& seed_scores : scores[s]) {
      UserScores mean;
      for (const auto& us : seed_scores) {
        mean.precision += us.precision;
        mean.recall += us.recall;
        mean.ndcg += us.ndcg;
      }
      const double count = double(seed_scores.size());
      mean.precision /= count;
      mean.recall /= count;
      mean.ndcg /= count;
      r.per_seed.push_back(mean);
      p.push_back(mean.precision);
      rc.push_back(mean.recall);
      n.push_back(mean.ndcg);
    }
    r.precision = summarize(p);
    r.recall = summarize(rc);
    r.ndcg = summarize(n);
    for (std::size_t j = 0; j < users.size(); ++j) {
      UserScores mean;
      for (const auto& seed_scores : scores[s]) {
        mean.precision += seed_scores[j].precision;
        mean.recall += seed_scores[j].recall;
        mean.ndcg += seed_scores[j].ndcg;
      }
      const double count = double(cfg.seeds);
      r.per_user[users[j]] = {mean.precision / count, mean.recall / count, mean.ndcg / count};
    }
    report.strategies.push_back(std::move(r));
  }
  return report;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "space,split,top_k,seeds,users,strategy,precision_mean,precision_std,recall_mean,recall_std,"
                    "ndcg_mean,ndcg_std,fingerprint\n";
  for (const auto& r : report.strategies) {
    out += report.space + ',' + report.split + ',' + std::to_string(report.top_k) + ',' +
           std::to_string(report.seeds) + ',' + std::to_string(report.users) + ',' + std::string(to_string(r.strategy)) +
           ',' + io::format_double(r.precision.mean) + ',' + io::format_double(r.precision.std) + ',' +
           io::format_double(r.recall.mean) + ',' + io::format_double(r.recall.std) + ',' +
           io::format_double(r.ndcg.mean) + ',' + io::format_double(r.ndcg.std) + ',' + report.fingerprint + '\n';
  }
  return out;
}

std::string report_table(const EvalReport& report) {
  auto cell = [](const MetricSummary& m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%6.2f +- %4.2f", 100.0 * m.mean, 100.0 * m.std);
    return std::string(buf);
  };
  const auto k = std::to_string(report.top_k);
  char line[256];
  std::string out = "space " + report.space + ", split " + report.split + ", " + std::to_string(report.users) +
                    " users, " + std::to_string(report.seeds) + " seeds (percent)\n";
  std::snprintf(line, sizeof line, "%-14s %-16s %-16s %-16s\n", "strategy", ("Precision@" + k).c_str(),
                ("Recall@" + k).c_str(), ("NDCG@" + k).c_str());
  out += line;
  for (const auto& r : report.strategies) {
    std::snprintf(line, sizeof line, "%-14s %-16s %-16s %-16s\n", std::string(to_string(r.strategy)).c_str(),
                  cell(r.precision).c_str(), cell(r.recall).c_str(), cell(r.ndcg).c_str());
    out += line;
  }
  return out;
}

std::string per_user_csv(const EvalReport& report) {
  std::string out = "strategy,user,precision,recall,ndcg\n";
  for (const auto& r : report.strategies) {
    for (const auto& [u, s] : r.per_user) {
      out += std::string(to_string(r.strategy)) + ',' + std::to_string(u) + ',' + io::format_double(s.precision) +
             ',' + io::format_double(s.recall) + ',' + io::format_double(s.ndcg) + '\n';
    }
  }
  return out;
}

std::string_view to_string(InteractionDimension d) {
  switch (d) {
    case InteractionDimension::onboarding: return "onboarding";
    case InteractionDimension::streams: return "streams";
    case InteractionDimension::skips: return "skips";
    case InteractionDimension::events: return "events";
  }
  return "?";
}

std::size_t count_interactions(std::span<const Event> events, InteractionDimension d) {
  std::size_t n = 0;
  for (const auto& e : events) {
    switch (d) {
      case InteractionDimension::onboarding: n += e.signal == Signal::onboarding; break;
      case InteractionDimension::streams: n += e.signal == Signal::stream; break;
      case InteractionDimension::skips: n += e.signal == Signal::skip; break;
      case InteractionDimension::events: ++n; break;
    }
  }
  return n;
}

std::string CountBin::label() const {
  if (hi == std::numeric_limits<std::size_t>::max()) return std::to_string(lo) + "+";
  if (lo == hi) return std::to_string(lo);
  return std::to_string(lo) + "-" + std::to_string(hi);
}

std::vector<CountBin> default_bins() {
  return {{0, 0}, {1, 2}, {3, 5}, {6, 10}, {11, std::numeric_limits<std::size_t>::max()}};
}

std::vector<BreakdownRow> breakdown_by_interaction(const std::map<UserId, UserScores>& per_user,
                                                   const InteractionLog& cold_log,
                                                   std::span<const InteractionDimension> dimensions,
                                                   std::span<const CountBin> bins) {
  std::vector<BreakdownRow> rows;
  for (auto d : dimensions) {
    std::vector<double> sums(bins.size(), 0.0);
    std::vector<std::size_t> counts(bins.size(), 0);
    for (const auto& [u, s] : per_user) {
      const auto n = count_interactions(cold_log.for_user(u), d);
      for (std::size_t b = 0; b < bins.size(); ++b) {
        if (n >= bins[b].lo && n <= bins[b].hi) {
          sums[b] += s.precision;
          ++counts[b];
          break;
        }
      }
    }
    for (std::size_t b = 0; b < bins.size(); ++b) {
      BreakdownRow row{d, bins[b], counts[b], std::nullopt};
      if (counts[b] > 0) row.mean_precision = sums[b] / double(counts[b]);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string breakdown_csv(const std::vector<BreakdownRow>& rows, Strategy strategy) {
  std::string out = "strategy,dimension,bin,users,mean_precision\n";
  for (const auto& r : rows) {
    out += std::string(to_string(strategy)) + ',' + std::string(to_string(r.dimension)) + ',' + r.bin.label() + ',' +
           std::to_string(r.users) + ',' + (r.mean_precision ? io::format_double(*r.mean_precision) : std::string()) +
           '\n';
  }
  return out;
}

std::vector<HistogramBucket> popularity_distribution(std::span<const Recommendation> recs, const Catalog& catalog,
                                                     std::uint32_t bucket_size) {
  if (bucket_size == 0) throw UsageError("bucket size must be >= 1");
  const auto m = static_cast<std::uint32_t>(catalog.size());
  std::vector<HistogramBucket> buckets;
  for (std::uint32_t first = 1; first <= m; first += bucket_size) {
    buckets.push_back({first, std::min(m, first + bucket_size - 1), 0, 0.0});
  }
  std::size_t total = 0;
  for (const auto& r : recs) {
    for (const auto& s : r.items) {
      if (!catalog.contains(s.id)) continue;
      const auto rank = catalog.meta(s.id).popularity_rank;
      ++buckets[(rank - 1) / bucket_size].count;
      ++total;
    }
  }
  if (total > 0) {
    for (auto& b : buckets) b.frequency = double(b.count) / double(total);
  }
  return buckets;
}

std::string histogram_csv(const std::vector<HistogramBucket>& buckets, Strategy strategy) {
  std::string out = "strategy,first_rank,last_rank,count,frequency\n";
  for (const auto& b : buckets) {
    out += std::string(to_string(strategy)) + ',' + std::to_string(b.first_rank) + ',' + std::to_string(b.last_rank) +
           ',' + std::to_string(b.count) + ',' + io::format_double(b.frequency) + '\n';
  }
  return out;
}

}  // namespace coldstart
