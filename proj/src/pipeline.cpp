#include "coldstart/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "coldstart/binary_io.hpp"
#include "coldstart/embedding_io.hpp"
#include "coldstart/errors.hpp"
#include "coldstart/fingerprint.hpp"

namespace coldstart {

namespace fs = std::filesystem;
using nlohmann::json;

ExperimentConfig PipelineConfig::experiment() const {
  ExperimentConfig e;
  e.top_k = top_k;
  e.seeds = seeds;
  e.base_seed = seed;
  e.segments = segments;
  e.feature_segments = feature_segments;
  e.split = split;
  e.hidden = hidden;
  e.train = train;
  e.min_group_size = min_group_size;
  return e;
}

std::string fingerprint_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    entries.emplace_back(e.path().lexically_relative(dir).generic_string(), fingerprint_file(e.path()));
  }
  std::sort(entries.begin(), entries.end());
  std::string all;
  for (const auto& [p, f] : entries) all += p + '\t' + f + '\n';
  return fingerprint(all);
}

namespace {

std::string fingerprint_any(const fs::path& p) { return fs::is_directory(p) ? fingerprint_dir(p) : fingerprint_file(p); }

// Path as recorded in manifests: relative to the workspace when inside it.
std::string record_path(const fs::path& out, const fs::path& p) {
  const auto base = fs::absolute(out).lexically_normal();
  const auto abs = fs::absolute(p).lexically_normal();
  auto rel = abs.lexically_relative(base);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.generic_string();
}

fs::path resolve(const fs::path& out, const std::string& recorded) {
  fs::path p(recorded);
  return p.is_absolute() ? p : out / p;
}

class StageManifest {
 public:
  StageManifest(const PipelineConfig& cfg, std::string stage, json config) : out_(cfg.out) {
    j_["stage"] = std::move(stage);
    j_["config"] = std::move(config);
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
  }
  void input(const fs::path& p) { j_["inputs"][record_path(out_, p)] = fingerprint_any(p); }
  void output(const fs::path& p) { j_["outputs"][record_path(out_, p)] = fingerprint_any(p); }
  void write(const fs::path& dir) const { io::write_file(dir / "manifest.json", j_.dump(2) + "\n"); }

 private:
  fs::path out_;
  json j_;
};

json synthetic_json(const SyntheticConfig& s) {
  return {{"genres", s.genres},
          {"warm_users", s.warm_users},
          {"cold_users", s.cold_users},
          {"tracks", s.tracks},
          {"dim", s.dim},
          {"artists_per_genre", s.artists_per_genre},
          {"albums_per_artist", s.albums_per_artist},
          {"playlists", s.playlists},
          {"playlist_length", s.playlist_length},
          {"countries", s.countries},
          {"noise", io::format_double(s.noise)},
          {"concentration", io::format_double(s.concentration)},
          {"zipf_exponent", io::format_double(s.zipf_exponent)},
          {"demographic_strength", io::format_double(s.demographic_strength)},
          {"p_unknown_age", io::format_double(s.p_unknown_age)},
          {"p_unknown_country", io::format_double(s.p_unknown_country)},
          {"p_onboarding", io::format_double(s.p_onboarding)},
          {"onboarding_mean", io::format_double(s.onboarding_mean)},
          {"p_stream", io::format_double(s.p_stream)},
          {"stream_mean", io::format_double(s.stream_mean)},
          {"skip_mean", io::format_double(s.skip_mean)},
          {"ban_mean", io::format_double(s.ban_mean)},
          {"search_mean", io::format_double(s.search_mean)},
          {"favorite_mean", io::format_double(s.favorite_mean)},
          {"history_listens_mean", io::format_double(s.history_listens_mean)},
          {"history_days", s.history_days},
          {"min_truth", s.min_truth},
          {"truth_extra_mean", io::format_double(s.truth_extra_mean)},
          {"truth_days", s.truth_days},
          {"embedding_noise", io::format_double(s.embedding_noise)},
          {"validation_fraction", io::format_double(s.validation_fraction)},
          {"seed", s.seed}};
}

json train_json(const PipelineConfig& cfg) {
  return {{"hidden", cfg.hidden},
          {"learning_rate", io::format_double(cfg.train.learning_rate)},
          {"batch_size", cfg.train.batch_size},
          {"epochs", cfg.train.epochs},
          {"momentum", io::format_double(cfg.train.momentum)},
          {"bn_momentum", io::format_double(cfg.train.bn_momentum)}};
}

DatasetBundle open_bundle(const PipelineConfig& cfg) {
  const auto dir = cfg.bundle_dir();
  if (!fs::exists(dir / "manifest.json")) throw MissingArtifactError((dir / "manifest.json").string(), "gen-data");
  return load_bundle(dir);
}

SpaceData load_space(const PipelineConfig& cfg) {
  const auto dir = cfg.stage_dir("spaces");
  verify_lineage(cfg.out, dir, "train-embeddings");
  return {cfg.space, load_embeddings(dir / "tracks.emb"), load_embeddings(dir / "users.emb")};
}

FeatureSet load_features(const PipelineConfig& cfg, const DatasetBundle& bundle, const SpaceData& space) {
  const auto dir = cfg.stage_dir("features");
  verify_lineage(cfg.out, dir, "build-features");
  FeatureSet f;
  f.spec = ChannelSpec::from_text(io::read_file(dir / "channel_spec.txt"));
  f.groups = GroupEmbeddings::from_text(io::read_file(dir / "groups.txt"));
  f.entities = build_entity_embeddings(space.tracks, bundle.catalog);
  f.warm_features = load_embeddings(dir / "warm_features.emb");
  f.warm_targets = load_embeddings(dir / "warm_targets.emb");
  f.cold_features = load_embeddings(dir / "cold_features.emb");
  if (f.spec.dim != space.tracks.dim()) throw DimensionError("feature spec and space dimensions differ");
  return f;
}

Segmentation load_segments(const PipelineConfig& cfg) {
  const auto dir = cfg.stage_dir("segments");
  verify_lineage(cfg.out, dir, "segment");
  return load_segmentation(dir / "segmentation.seg");
}

fs::path models_dir(const PipelineConfig& cfg) {
  const auto dir = cfg.stage_dir("models");
  verify_lineage(cfg.out, dir, "train-regressor");
  return dir;
}

}  // namespace

void verify_lineage(const fs::path& out, const fs::path& stage_dir, const std::string& producer) {
  const auto path = stage_dir / "manifest.json";
  if (!fs::exists(path)) throw MissingArtifactError(path.string(), producer);
  json m;
  try {
    m = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::parse, path.string() + ": " + e.what());
  }
  for (const char* section : {"inputs", "outputs"}) {
    const json entries = m.value(section, json::object());
    for (const auto& [recorded, fp] : entries.items()) {
      const auto p = resolve(out, recorded);
      if (!fs::exists(p)) {
        throw DataError("lineage broken: " + std::string(section == std::string("inputs") ? "input" : "output") +
                        " '" + recorded + "' of `coldstart " + producer + "` no longer exists");
      }
      if (fingerprint_any(p) != fp.get<std::string>()) {
        throw DataError("lineage mismatch: '" + recorded + "' changed since `coldstart " + producer +
                        "` ran; rerun it");
      }
    }
  }
}

void run_gen_data(const PipelineConfig& cfg) {
  auto scfg = cfg.synthetic;
  scfg.seed = cfg.seed;
  const auto data = generate_synthetic(scfg);
  const auto dir = cfg.bundle_dir();
  save_bundle(data.bundle, dir);
  io::write_file(dir / "generator.json", synthetic_json(scfg).dump(2) + "\n");
  spdlog::info("bundle written to {} ({} tracks, {} warm, {} cold)", dir.string(), data.bundle.catalog.size(),
               data.bundle.users.warm().size(), data.bundle.users.cold().size());
}

void run_train_embeddings(const PipelineConfig& cfg) {
  const auto bundle = open_bundle(cfg);
  auto scfg = cfg.space_config;
  scfg.seed = cfg.seed;
  const auto space = prepare_space(bundle, cfg.space, scfg);
  const auto dir = cfg.stage_dir("spaces");
  save_embeddings(dir / "tracks.emb", space.tracks);
  save_embeddings(dir / "users.emb", space.warm_users);
  StageManifest m(cfg, "train-embeddings",
                  {{"space", cfg.space},
                   {"dim", scfg.dim},
                   {"seed", cfg.seed},
                   {"als_iterations", scfg.als_iterations},
                   {"als_lambda", io::format_double(scfg.als_lambda)},
                   {"als_alpha", io::format_double(scfg.als_alpha)},
                   {"sppmi_shift", io::format_double(scfg.sppmi_shift)}});
  m.input(cfg.bundle_dir());
  m.output(dir / "tracks.emb");
  m.output(dir / "users.emb");
  m.write(dir);
}

void run_segment(const PipelineConfig& cfg) {
  const auto bundle = open_bundle(cfg);
  const auto space = load_space(cfg);
  auto seg = build_segmentation(space.warm_users, {cfg.segments, cfg.seed, 100, 1e-4});
  seg.top_items = segment_top_items(seg, bundle.warm_log, bundle.catalog, cfg.top_k);
  const auto dir = cfg.stage_dir("segments");
  save_segmentation(dir / "segmentation.seg", seg);
  std::string profiles = "segment\tmembers\tcountry\tage\tgenres\n";
  for (std::size_t s = 0; s < seg.k; ++s) {
    const auto p = describe_segment(s, seg, bundle.users, bundle.warm_log, bundle.catalog);
    std::string genres;
    for (std::size_t i = 0; i < p.genres.size(); ++i) genres += (i ? "," : "") + p.genres[i];
    profiles += std::to_string(s) + '\t' + std::to_string(p.members) + '\t' + p.country + '\t' + p.age_class + '\t' +
                genres + '\n';
  }
  io::write_file(dir / "profiles.tsv", profiles);
  StageManifest m(cfg, "segment", {{"space", cfg.space}, {"k", cfg.segments}, {"top_k", cfg.top_k}, {"seed", cfg.seed}});
  m.input(cfg.bundle_dir());
  m.input(cfg.stage_dir("spaces") / "users.emb");
  m.output(dir / "segmentation.seg");
  m.output(dir / "profiles.tsv");
  m.write(dir);
}

void run_build_features(const PipelineConfig& cfg) {
  const auto bundle = open_bundle(cfg);
  const auto space = load_space(cfg);
  std::vector<UserId> cold(bundle.users.cold().begin(), bundle.users.cold().end());
  const auto f = build_feature_set(bundle, space, cold, cfg.min_group_size);
  const auto dir = cfg.stage_dir("features");
  io::write_file(dir / "channel_spec.txt", f.spec.to_text());
  io::write_file(dir / "groups.txt", f.groups.to_text());
  save_embeddings(dir / "warm_features.emb", f.warm_features);
  save_embeddings(dir / "warm_targets.emb", f.warm_targets);
  save_embeddings(dir / "cold_features.emb", f.cold_features);
  StageManifest m(cfg, "build-features", {{"space", cfg.space}, {"min_group_size", cfg.min_group_size}});
  m.input(cfg.bundle_dir());
  m.input(cfg.stage_dir("spaces") / "tracks.emb");
  m.input(cfg.stage_dir("spaces") / "users.emb");
  for (const char* name : {"channel_spec.txt", "groups.txt", "warm_features.emb", "warm_targets.emb", "cold_features.emb"}) {
    m.output(dir / name);
  }
  m.write(dir);
}

void run_train_regressor(const PipelineConfig& cfg) {
  const auto bundle = open_bundle(cfg);
  const auto space = load_space(cfg);
  const auto f = load_features(cfg, bundle, space);
  RegressorSpec spec;
  spec.input_dim = f.spec.total_dim();
  spec.hidden = cfg.hidden;
  spec.output_dim = f.spec.dim;
  auto model = init_model(spec, cfg.seed);
  model.channel_spec_version = f.spec.version;
  auto tc = cfg.train;
  tc.seed = cfg.seed;
  auto result = train(std::move(model), to_matrix(f.warm_features), to_matrix(f.warm_targets), tc);
  const auto cold = predict_cold_embeddings(result.model, f.cold_features);
  const auto dir = cfg.stage_dir("models");
  save_model(dir / "model.csreg", result.model);
  io::write_file(dir / "loss.csv", loss_curve_csv(result.history));
  save_embeddings(dir / "cold_embeddings.emb", cold);
  auto config = train_json(cfg);
  config["space"] = cfg.space;
  config["seed"] = cfg.seed;
  StageManifest m(cfg, "train-regressor", config);
  m.input(cfg.stage_dir("features"));
  m.output(dir / "model.csreg");
  m.output(dir / "loss.csv");
  m.output(dir / "cold_embeddings.emb");
  m.write(dir);
}

void run_recommend(const PipelineConfig& cfg) {
  const auto strategy = parse_strategy(cfg.strategy);
  if (cfg.top_k < 1) throw UsageError("--top-k must be >= 1");
  const auto bundle = open_bundle(cfg);
  const auto& users = bundle.split(cfg.split);
  const auto popularity = build_popularity_table(bundle.catalog, bundle.warm_log);

  StageManifest m(cfg, "recommend",
                  {{"space", cfg.space}, {"strategy", cfg.strategy}, {"top_k", cfg.top_k}, {"split", cfg.split},
                   {"seed", cfg.seed}, {"feature_segments", cfg.feature_segments}});
  m.input(cfg.bundle_dir());

  StrategyInputs in;
  in.popularity = &popularity;
  in.cold_log = &bundle.cold_log;
  std::optional<SpaceData> space;
  std::optional<FeatureSet> features;
  EmbeddingTable cold_embeddings;
  Segmentation seg;
  FeatureClusterModel clusters;
  if (strategy != Strategy::popularity) {
    space = load_space(cfg);
    in.tracks = &space->tracks;
    m.input(cfg.stage_dir("spaces"));
  }
  if (strategy == Strategy::semi || strategy == Strategy::full) {
    const auto dir = models_dir(cfg);
    cold_embeddings = load_embeddings(dir / "cold_embeddings.emb");
    in.cold_embeddings = &cold_embeddings;
    m.input(dir);
  }
  if (strategy == Strategy::semi) {
    seg = load_segments(cfg);
    if (!seg.top_items.empty() && seg.top_items.front().size() < cfg.top_k) {
      spdlog::warn("segment lists hold fewer than {} items; padding from popularity", cfg.top_k);
    }
    in.segmentation = &seg;
    m.input(cfg.stage_dir("segments"));
  }
  if (strategy == Strategy::feat_cluster) {
    features = load_features(cfg, bundle, *space);
    clusters = fit_feature_clusters(features->warm_features, bundle.warm_log, bundle.catalog,
                                    {cfg.feature_segments, cfg.seed, 100, 1e-4}, cfg.top_k);
    in.cold_features = &features->cold_features;
    in.feature_clusters = &clusters;
    m.input(cfg.stage_dir("features"));
  }
  const auto recs = recommend_users(strategy, users, in, cfg.top_k);
  const auto dir = cfg.stage_dir("recs") / cfg.strategy;
  const auto file = dir / "recommendations.tsv";
  io::write_file(file, recommendations_to_text(recs));
  m.output(file);
  m.write(dir);
}

EvalReport run_evaluate(const PipelineConfig& cfg) {
  const auto bundle = open_bundle(cfg);
  const auto space = load_space(cfg);
  const auto features = load_features(cfg, bundle, space);
  const auto ecfg = cfg.experiment();
  SeedArtifacts first;
  auto report = run_experiment(bundle, space, features, ecfg, &first);

  const auto dir = cfg.stage_dir("reports");
  io::write_file(dir / "eval.csv", report_csv(report));
  io::write_file(dir / "table.txt", report_table(report));
  io::write_file(dir / "per_user.csv", per_user_csv(report));
  io::write_file(dir / "loss.csv", loss_curve_csv(first.history));

  const std::vector<InteractionDimension> dims{InteractionDimension::onboarding, InteractionDimension::streams,
                                               InteractionDimension::skips, InteractionDimension::events};
  const auto bins = default_bins();
  std::string breakdown, histogram;
  for (const auto& r : report.strategies) {
    auto b = breakdown_csv(breakdown_by_interaction(r.per_user, bundle.cold_log, dims, bins), r.strategy);
    auto h = histogram_csv(popularity_distribution(first.recommendations.at(r.strategy), bundle.catalog,
                                                   cfg.histogram_bucket),
                           r.strategy);
    if (!breakdown.empty()) b.erase(0, b.find('\n') + 1);
    if (!histogram.empty()) h.erase(0, h.find('\n') + 1);
    breakdown += b;
    histogram += h;
  }
  io::write_file(dir / "breakdown.csv", breakdown);
  io::write_file(dir / "popularity_histogram.csv", histogram);

  StageManifest m(cfg, "evaluate",
                  {{"space", cfg.space}, {"experiment", ecfg.to_text()}, {"histogram_bucket", cfg.histogram_bucket}});
  m.input(cfg.bundle_dir());
  m.input(cfg.stage_dir("spaces"));
  m.input(cfg.stage_dir("features"));
  for (const char* name : {"eval.csv", "table.txt", "per_user.csv", "loss.csv", "breakdown.csv", "popularity_histogram.csv"}) {
    m.output(dir / name);
  }
  m.write(dir);
  return report;
}

std::string run_report(const PipelineConfig& cfg) {
  const auto dir = cfg.stage_dir("reports");
  verify_lineage(cfg.out, dir, "evaluate");
  const auto table = io::read_file(dir / "table.txt");
  std::string md = "# Cold-start evaluation (" + cfg.space + ")\n\n```\n" + table + "```\n\n";
  md += "## Precision by registration-day interactions\n\n";
  md += "| strategy | dimension | bin | users | mean precision (%) |\n|---|---|---|---|---|\n";
  std::istringstream in(io::read_file(dir / "breakdown.csv"));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() < 4) continue;
    std::string value = "absent";
    if (f.size() == 5 && !f[4].empty()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", 100.0 * io::parse_double(f[4]));
      value = buf;
    }
    md += "| " + f[0] + " | " + f[1] + " | " + f[2] + " | " + f[3] + " | " + value + " |\n";
  }
  md += "\nPopularity-rank histogram of recommended tracks: popularity_histogram.csv\n";
  io::write_file(dir / "report.md", md);
  return table;
}

fs::path export_snapshot(const PipelineConfig& cfg) {
  const auto bundle = open_bundle(cfg);
  const auto space = load_space(cfg);
  ServingSnapshot snap;
  {
    const auto fdir = cfg.stage_dir("features");
    verify_lineage(cfg.out, fdir, "build-features");
    snap.spec = ChannelSpec::from_text(io::read_file(fdir / "channel_spec.txt"));
    snap.groups = GroupEmbeddings::from_text(io::read_file(fdir / "groups.txt"));
  }
  snap.model = load_model(models_dir(cfg) / "model.csreg");
  snap.segmentation = load_segments(cfg);
  snap.entities = build_entity_embeddings(space.tracks, bundle.catalog);
  snap.popularity = build_popularity_table(bundle.catalog, bundle.warm_log);
  const auto dir = cfg.stage_dir("snapshot");
  save_snapshot(snap, dir);
  return dir;
}

}  // namespace coldstart
