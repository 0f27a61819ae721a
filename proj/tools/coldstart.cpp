// coldstart: pipeline stages and the inference server.
//
// Exit codes: 0 success, 1 usage, 2 data validation, 3 numerical failure.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "coldstart/errors.hpp"
#include "coldstart/pipeline.hpp"

namespace {

using namespace coldstart;

void setup_logging() {
  spdlog::set_default_logger(spdlog::stderr_color_mt("coldstart"));
  const char* level = std::getenv("COLDSTART_LOG_LEVEL");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

void validate(const PipelineConfig& cfg) {
  parse_strategy(cfg.strategy);
  if (cfg.split != "validation" && cfg.split != "test") throw UsageError("--split must be validation or test");
  if (cfg.space.empty()) throw UsageError("--space must not be empty");
  if (cfg.top_k < 1) throw UsageError("--top-k must be >= 1");
  if (cfg.segments < 1 || cfg.feature_segments < 1) throw UsageError("--k and --feature-k must be >= 1");
  if (cfg.seeds < 1) throw UsageError("--seeds must be >= 1");
  if (cfg.space_config.dim < 1) throw UsageError("--dim must be >= 1");
  if (cfg.histogram_bucket < 1) throw UsageError("--hist-bucket must be >= 1");
  if (!(cfg.train.learning_rate >= 0.0)) throw UsageError("--lr must be >= 0");
  if (cfg.train.batch_size < 1 || cfg.train.epochs < 1) throw UsageError("--batch-size and --epochs must be >= 1");
  cfg.synthetic.validate();
}

std::pair<std::string, int> parse_listen(const std::string& listen) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw UsageError("listen address must be host:port, got '" + listen + "'");
  try {
    return {listen.substr(0, colon), std::stoi(listen.substr(colon + 1))};
  } catch (const std::exception&) {
    throw UsageError("bad port in listen address '" + listen + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  PipelineConfig cfg;
  std::string bundle;
  std::string listen = "127.0.0.1:8080";
  std::string snapshot_dir;
  bool export_only = false;

  CLI::App app{"User cold-start recommendation pipeline"};
  app.set_config("--config", "", "INI/TOML file whose keys mirror the long flags");
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--out", cfg.out, "Workspace directory")->capture_default_str();
  app.add_option("--bundle", bundle, "Dataset bundle directory (default <out>/bundle)");
  app.add_option("--seed", cfg.seed, "Seed for every stochastic stage")->capture_default_str();
  app.add_option("--space", cfg.space, "Embedding space: tt-svd, ut-als or a bundle space")->capture_default_str();
  app.add_option("--k", cfg.segments, "Number of warm-user segments")->capture_default_str();
  app.add_option("--feature-k", cfg.feature_segments, "Segments of the feature-clustering baseline")->capture_default_str();
  app.add_option("--top-k", cfg.top_k, "Tracks per recommendation")->capture_default_str();
  app.add_option("--strategy", cfg.strategy, "semi, full, popularity, reg-streams or feat-cluster")->capture_default_str();
  app.add_option("--seeds", cfg.seeds, "Evaluation iterations")->capture_default_str();
  app.add_option("--split", cfg.split, "Cold split: validation or test")->capture_default_str();
  app.add_option("--dim", cfg.space_config.dim, "Embedding dimension of trained spaces")->capture_default_str();
  app.add_option("--min-group-size", cfg.min_group_size, "Smallest demographic group with its own mean")->capture_default_str();
  app.add_option("--hist-bucket", cfg.histogram_bucket, "Popularity-rank histogram bucket width")->capture_default_str();
  app.add_option("--als-iterations", cfg.space_config.als_iterations)->capture_default_str();
  app.add_option("--als-lambda", cfg.space_config.als_lambda)->capture_default_str();
  app.add_option("--als-alpha", cfg.space_config.als_alpha)->capture_default_str();
  app.add_option("--sppmi-shift", cfg.space_config.sppmi_shift)->capture_default_str();

  app.add_option("--hidden", cfg.hidden, "Hidden layer widths, comma-separated")->delimiter(',')->capture_default_str();
  app.add_option("--lr", cfg.train.learning_rate, "Learning rate")->capture_default_str();
  app.add_option("--batch-size", cfg.train.batch_size)->capture_default_str();
  app.add_option("--epochs", cfg.train.epochs)->capture_default_str();
  app.add_option("--momentum", cfg.train.momentum)->capture_default_str();

  auto& s = cfg.synthetic;
  app.add_option("--genres", s.genres)->capture_default_str();
  app.add_option("--warm-users", s.warm_users)->capture_default_str();
  app.add_option("--cold-users", s.cold_users)->capture_default_str();
  app.add_option("--tracks", s.tracks)->capture_default_str();
  app.add_option("--playlists", s.playlists)->capture_default_str();
  app.add_option("--playlist-length", s.playlist_length)->capture_default_str();
  app.add_option("--planted-dim", s.dim, "Dimension of the generator's planted space")->capture_default_str();
  app.add_option("--noise", s.noise)->capture_default_str();
  app.add_option("--concentration", s.concentration)->capture_default_str();
  app.add_option("--min-truth", s.min_truth)->capture_default_str();
  app.add_option("--history-listens", s.history_listens_mean)->capture_default_str();
  app.add_option("--validation-fraction", s.validation_fraction)->capture_default_str();

  app.add_subcommand("gen-data", "Generate a synthetic planted-preference bundle");
  app.add_subcommand("train-embeddings", "Train or extract a track/warm-user embedding space");
  app.add_subcommand("segment", "Cluster warm users and rank each segment's tracks");
  app.add_subcommand("build-features", "Assemble registration-day feature vectors");
  app.add_subcommand("train-regressor", "Fit the feature-to-embedding network");
  app.add_subcommand("recommend", "Recommend for the cold split with one strategy");
  app.add_subcommand("evaluate", "Multi-seed offline evaluation of all strategies");
  app.add_subcommand("report", "Render the evaluation as markdown");
  auto* serve = app.add_subcommand("serve", "Serve embeddings and recommendations over HTTP");
  serve->add_option("--listen", listen, "host:port")->envname("COLDSTART_LISTEN")->capture_default_str();
  auto* snap_opt = serve->add_option("--snapshot", snapshot_dir, "Serve this snapshot directory")
                       ->envname("COLDSTART_SNAPSHOT_DIR");
  serve->add_flag("--export-only", export_only, "Write the snapshot from the workspace and exit")->excludes(snap_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (!bundle.empty()) cfg.bundle = bundle;
  cfg.synthetic.dim = app.count("--planted-dim") ? cfg.synthetic.dim : cfg.space_config.dim;

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    validate(cfg);
    if (cmd == "gen-data") {
      run_gen_data(cfg);
    } else if (cmd == "train-embeddings") {
      run_train_embeddings(cfg);
    } else if (cmd == "segment") {
      run_segment(cfg);
    } else if (cmd == "build-features") {
      run_build_features(cfg);
    } else if (cmd == "train-regressor") {
      run_train_regressor(cfg);
    } else if (cmd == "recommend") {
      run_recommend(cfg);
    } else if (cmd == "evaluate") {
      std::cout << report_table(run_evaluate(cfg));
    } else if (cmd == "report") {
      std::cout << run_report(cfg);
    } else if (cmd == "serve") {
      const auto [host, port] = parse_listen(listen);
      std::filesystem::path dir = snapshot_dir;
      if (dir.empty()) dir = export_snapshot(cfg);
      if (export_only) {
        std::cout << dir.string() << "\n";
        return 0;
      }
      InferenceService service;
      service.set_default_snapshot_dir(dir);
      service.publish(std::make_shared<const ServingSnapshot>(load_snapshot(dir)));
      HttpServer server(service);
      spdlog::info("serving snapshot {} on {}:{}", service.snapshot()->version, host, port);
      server.listen(host, port);
    }
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
