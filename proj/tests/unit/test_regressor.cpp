#include <doctest.h>

#include <random>

#include "../oracles.hpp"
#include "coldstart/errors.hpp"
#include "coldstart/regressor.hpp"
#include "support.hpp"

using namespace coldstart;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(42);
  struct Case {
    std::vector<std::size_t> hidden;
    bool bn;
    BatchNormPlacement placement;
  };
  const Case cases[] = {{{6, 5}, true, BatchNormPlacement::after_activation},
                        {{4}, true, BatchNormPlacement::before_activation},
                        {{7, 3, 4}, true, BatchNormPlacement::after_activation},
                        {{5, 5}, false, BatchNormPlacement::after_activation}};
  for (const auto& c : cases) {
    RegressorSpec spec;
    spec.input_dim = 4;
    spec.hidden = c.hidden;
    spec.output_dim = 3;
    spec.batch_norm = c.bn;
    spec.placement = c.placement;
    auto model = init_model(spec, rng());
    for (auto& n : model.norms) {
      n.gamma = Eigen::VectorXd::Random(n.gamma.size()).array() + 1.5;
      n.beta = Eigen::VectorXd::Random(n.beta.size());
    }
    const auto x = random_matrix(5, 4, rng);
    const auto y = random_matrix(5, 3, rng);
    CHECK(oracle::max_gradient_error(model, x, y) < 1e-4);
  }
}

TEST_CASE("forward modes and single-sample prediction") {
  std::mt19937_64 rng(1);
  RegressorSpec spec{6, {8, 4}, 3};
  auto model = init_model(spec, 7);
  CHECK(model.parameter_count() == (6 * 8 + 8) + (8 * 4 + 4) + (4 * 3 + 3) + 2 * (8 + 4));
  const auto x = random_matrix(10, 6, rng);
  // Train mode centres every batch-norm output, infer mode uses running stats.
  CHECK_FALSE(forward(model, x, Mode::train).isApprox(forward(model, x, Mode::infer)));
  const auto inferred = forward(model, x, Mode::infer);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    std::vector<float> row(6);
    for (int j = 0; j < 6; ++j) row[j] = static_cast<float>(x(r, j));
    const auto p = predict_one(model, row);
    Eigen::MatrixXd xr(1, 6);
    for (int j = 0; j < 6; ++j) xr(0, j) = row[j];
    const auto ref = forward(model, xr, Mode::infer);
    for (int j = 0; j < 3; ++j) CHECK(p[j] == static_cast<float>(ref(0, j)));
  }
  std::vector<float> bad(5);
  CHECK_THROWS_AS(predict_one(model, bad), DimensionError);
}

TEST_CASE("training lowers the loss and is deterministic") {
  std::mt19937_64 rng(3);
  const auto x = random_matrix(200, 5, rng);
  const Eigen::MatrixXd w = random_matrix(5, 2, rng);
  const Eigen::MatrixXd y = (x * w).array().tanh();
  RegressorSpec spec{5, {16, 8}, 2};
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 32;
  cfg.epochs = 30;
  cfg.momentum = 0.9;
  cfg.seed = 11;
  const auto a = train(init_model(spec, 5), x, y, cfg);
  const auto b = train(init_model(spec, 5), x, y, cfg);
  REQUIRE(a.history.size() == 30);
  CHECK(a.history.back().train_mse < 0.5 * a.history.front().train_mse);
  CHECK(a.model.trained);
  CHECK(serialize_model(a.model) == serialize_model(b.model));
  CHECK(mean_squared_error(a.model, x, y, Mode::infer) < mean_squared_error(init_model(spec, 5), x, y, Mode::infer));

  TrainConfig wild = cfg;
  wild.learning_rate = 1e12;
  wild.momentum = 0;
  CHECK_THROWS_AS(train(init_model(spec, 5), x * 1e6, y, wild), NumericalError);
}

TEST_CASE("model container roundtrip and corruption") {
  RegressorSpec spec{4, {3}, 2};
  auto model = init_model(spec, 2);
  model.trained = true;
  model.epochs_trained = 3;
  model.metrics["final_train_mse"] = 0.25;
  model.round_to_float();
  const auto bytes = serialize_model(model);
  const auto back = deserialize_model(bytes);
  CHECK(serialize_model(back) == bytes);
  CHECK(back.spec == model.spec);
  CHECK(back.layers[0].weight == model.layers[0].weight);
  CHECK(back.norms[0].running_var == model.norms[0].running_var);
  CHECK(back.metrics.at("final_train_mse") == 0.25);

  auto kind_of = [](const std::string& b) {
    try {
      deserialize_model(b);
    } catch (const FormatError& e) {
      return e.kind();
    }
    FAIL("no error");
    return FormatError::Kind::parse;
  };
  CHECK(kind_of("XXREG1" + bytes.substr(6)) == FormatError::Kind::bad_magic);
  CHECK(kind_of(bytes.substr(0, bytes.size() - 2)) == FormatError::Kind::truncated);
  CHECK(kind_of(bytes + "xxxx") == FormatError::Kind::shape_mismatch);

  test::TempDir dir("model");
  save_model(dir.path() / "m.csreg", model);
  CHECK(serialize_model(load_model(dir.path() / "m.csreg")) == bytes);
}

TEST_CASE("cold embeddings require a trained model") {
  RegressorSpec spec{2, {3}, 2};
  const auto model = init_model(spec, 0);
  EmbeddingTable features(2);
  const float r[] = {1, 2};
  features.add(9, std::span<const float>(r));
  CHECK_THROWS_AS(predict_cold_embeddings(model, features), UsageError);
  auto trained = model;
  trained.trained = true;
  const auto out = predict_cold_embeddings(trained, features);
  CHECK(out.ids() == std::vector<EntityId>{9});
  CHECK(out.dim() == 2);
}

TEST_CASE("loss curve CSV") {
  const std::vector<EpochLoss> h{{1, 0.5, std::nullopt}, {2, 0.25, 0.3}};
  const auto csv = loss_curve_csv(h);
  CHECK(csv.find("epoch") == 0);
  CHECK(csv.find("2,0.25,0.3") != std::string::npos);
}
