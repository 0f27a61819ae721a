#include "coldstart/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "coldstart/binary_io.hpp"
#include "coldstart/errors.hpp"

namespace coldstart {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LayerCache {
  MatrixXd input;
  MatrixXd pre;   // affine output
  MatrixXd xhat;  // normalized values
  MatrixXd gated; // value fed to the rectifier (pre or BN output)
  VectorXd mean;
  VectorXd var;   // biased batch variance
  VectorXd inv_std;
  bool batch_stats = false;
};

MatrixXd relu(const MatrixXd& m) { return m.cwiseMax(0.0); }

MatrixXd relu_mask(const MatrixXd& m) { return (m.array() > 0.0).cast<double>().matrix(); }

// Batch-norm forward over the columns of `v`; fills the cache statistics.
MatrixXd batch_norm(const BatchNormLayer& bn, const MatrixXd& v, bool batch_stats, double eps, LayerCache& c) {
  c.batch_stats = batch_stats;
  if (batch_stats) {
    c.mean = v.colwise().mean().transpose();
    MatrixXd centered = v.rowwise() - c.mean.transpose();
    c.var = centered.array().square().colwise().mean().transpose();
  } else {
    c.mean = bn.running_mean;
    c.var = bn.running_var;
  }
  c.inv_std = (c.var.array() + eps).rsqrt().matrix();
  c.xhat = (v.rowwise() - c.mean.transpose()).array().rowwise() * c.inv_std.transpose().array();
  MatrixXd out = (c.xhat.array().rowwise() * bn.gamma.transpose().array()).matrix();
  out.rowwise() += bn.beta.transpose();
  return out;
}

MatrixXd batch_norm_backward(const MatrixXd& dxhat, const LayerCache& c) {
  if (!c.batch_stats) return dxhat.array().rowwise() * c.inv_std.transpose().array();
  const double b = static_cast<double>(dxhat.rows());
  const Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
  const Eigen::RowVectorXd sum_dx = dxhat.cwiseProduct(c.xhat).colwise().sum();
  MatrixXd out = (b * dxhat).rowwise() - sum_d;
  out -= (c.xhat.array().rowwise() * sum_dx.array()).matrix();
  return (out.array().rowwise() * (c.inv_std.transpose().array() / b)).matrix();
}

MatrixXd forward_impl(const RegressorModel& model, const MatrixXd& x, Mode mode, std::vector<LayerCache>* caches) {
  if (static_cast<std::size_t>(x.cols()) != model.spec.input_dim) {
    throw DimensionError("input has " + std::to_string(x.cols()) + " features, model expects " +
                         std::to_string(model.spec.input_dim));
  }
  const auto& spec = model.spec;
  const bool batch_stats = mode == Mode::train && x.rows() > 1;
  std::vector<LayerCache> local;
  auto& cs = caches ? *caches : local;
  cs.assign(model.layers.size(), {});
  MatrixXd a = x;
  for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) {
    auto& c = cs[l];
    const auto& layer = model.layers[l];
    MatrixXd z = a * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (caches) {
      c.input = a;
      c.pre = z;
    }
    if (!spec.batch_norm) {
      a = relu(z);
      continue;
    }
    if (spec.placement == BatchNormPlacement::after_activation) {
      MatrixXd r = relu(z);
      a = batch_norm(model.norms[l], r, batch_stats, spec.bn_epsilon, c);
    } else {
      MatrixXd u = batch_norm(model.norms[l], z, batch_stats, spec.bn_epsilon, c);
      if (caches) c.gated = u;
      a = relu(u);
    }
  }
  const auto& out_layer = model.layers.back();
  if (caches) cs.back().input = a;
  MatrixXd y = a * out_layer.weight.transpose();
  y.rowwise() += out_layer.bias.transpose();
  return y;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string(what) + " is not finite; the learning rate is likely too high");
  }
}

Gradients zero_like(const RegressorModel& m) {
  Gradients g;
  for (const auto& l : m.layers) {
    g.layers.push_back({MatrixXd::Zero(l.weight.rows(), l.weight.cols()), VectorXd::Zero(l.bias.size())});
  }
  for (const auto& n : m.norms) {
    g.norms.push_back({VectorXd::Zero(n.gamma.size()), VectorXd::Zero(n.beta.size()), {}, {}});
  }
  return g;
}

float to_float(double v) { return static_cast<float>(v); }

}  // namespace

void RegressorSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw UsageError("regressor input and output dims must be >= 1");
  for (auto h : hidden) {
    if (h == 0) throw UsageError("regressor hidden dims must be >= 1");
  }
  if (!(bn_epsilon > 0.0)) throw UsageError("batch-norm epsilon must be positive");
}

std::size_t RegressorModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  for (const auto& b : norms) n += static_cast<std::size_t>(b.gamma.size() + b.beta.size());
  return n;
}

void RegressorModel::round_to_float() {
  auto r = [](auto& m) { m = m.unaryExpr([](double v) { return double(float(v)); }); };
  for (auto& l : layers) {
    r(l.weight);
    r(l.bias);
  }
  for (auto& b : norms) {
    r(b.gamma);
    r(b.beta);
    r(b.running_mean);
    r(b.running_var);
  }
}

RegressorModel init_model(const RegressorSpec& spec, std::uint64_t seed) {
  spec.validate();
  RegressorModel m;
  m.spec = spec;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  std::size_t fan_in = spec.input_dim;
  auto add_layer = [&](std::size_t out) {
    const double bound = std::sqrt(6.0 / double(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer l{MatrixXd(out, fan_in), VectorXd::Zero(static_cast<Eigen::Index>(out))};
    // Row-major draw order, matching the serialized layout.
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = u(rng);
    }
    m.layers.push_back(std::move(l));
    fan_in = out;
  };
  for (auto h : spec.hidden) {
    add_layer(h);
    if (spec.batch_norm) {
      const auto n = static_cast<Eigen::Index>(h);
      m.norms.push_back({VectorXd::Ones(n), VectorXd::Zero(n), VectorXd::Zero(n), VectorXd::Ones(n)});
    }
  }
  add_layer(spec.output_dim);
  m.round_to_float();
  return m;
}

Eigen::MatrixXd forward(const RegressorModel& model, const Eigen::MatrixXd& x, Mode mode) {
  return forward_impl(model, x, mode, nullptr);
}

Vector predict_one(const RegressorModel& model, std::span<const float> x) {
  MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
  MatrixXd y = forward_impl(model, row, Mode::infer, nullptr);
  Vector out(static_cast<std::size_t>(y.cols()));
  for (Eigen::Index j = 0; j < y.cols(); ++j) out[static_cast<std::size_t>(j)] = to_float(y(0, j));
  return out;
}

namespace {

// Batch statistics of the pass are left in `caches`.
double loss_impl(const RegressorModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Gradients* grads,
                 std::vector<LayerCache>& caches) {
  if (x.rows() != y.rows()) throw DimensionError("feature and target rows differ");
  if (static_cast<std::size_t>(y.cols()) != model.spec.output_dim) throw DimensionError("target dim mismatch");
  const MatrixXd pred = forward_impl(model, x, Mode::train, &caches);
  const MatrixXd diff = pred - y;
  const double denom = double(diff.size());
  const double loss = diff.squaredNorm() / denom;
  if (!grads) return loss;

  *grads = zero_like(model);
  const auto& spec = model.spec;
  MatrixXd d = (2.0 / denom) * diff;  // d loss / d output
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const auto& c = caches[l];
    MatrixXd dz;
    if (l + 1 == model.layers.size()) {
      dz = d;
    } else if (!spec.batch_norm) {
      dz = d.cwiseProduct(relu_mask(c.pre));
    } else if (spec.placement == BatchNormPlacement::after_activation) {
      const auto& bn = model.norms[l];
      grads->norms[l].gamma = d.cwiseProduct(c.xhat).colwise().sum().transpose();
      grads->norms[l].beta = d.colwise().sum().transpose();
      MatrixXd dxhat = d.array().rowwise() * bn.gamma.transpose().array();
      dz = batch_norm_backward(dxhat, c).cwiseProduct(relu_mask(c.pre));
    } else {
      const auto& bn = model.norms[l];
      MatrixXd du = d.cwiseProduct(relu_mask(c.gated));
      grads->norms[l].gamma = du.cwiseProduct(c.xhat).colwise().sum().transpose();
      grads->norms[l].beta = du.colwise().sum().transpose();
      MatrixXd dxhat = du.array().rowwise() * bn.gamma.transpose().array();
      dz = batch_norm_backward(dxhat, c);
    }
    grads->layers[l].weight = dz.transpose() * c.input;
    grads->layers[l].bias = dz.colwise().sum().transpose();
    if (l > 0) d = dz * model.layers[l].weight;
  }
  return loss;
}

}  // namespace

double loss_and_gradients(const RegressorModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                          Gradients* grads) {
  std::vector<LayerCache> caches;
  return loss_impl(model, x, y, grads, caches);
}

double mean_squared_error(const RegressorModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                          Mode mode) {
  const MatrixXd pred = forward(model, x, mode);
  return (pred - y).squaredNorm() / double(pred.size());
}

TrainResult train(RegressorModel model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const TrainConfig& cfg,
                  const Eigen::MatrixXd* val_x, const Eigen::MatrixXd* val_y) {
  if (!(cfg.learning_rate >= 0.0)) throw UsageError("learning rate must be >= 0");
  if (cfg.batch_size < 1) throw UsageError("batch size must be >= 1");
  if (cfg.epochs < 1) throw UsageError("epochs must be >= 1");
  if (x.rows() < 1) throw DataError("training needs at least one sample");
  if (x.rows() != y.rows()) throw DimensionError("feature and target rows differ");
  if ((val_x == nullptr) != (val_y == nullptr)) throw UsageError("validation features and targets go together");

  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  Gradients velocity = zero_like(model);
  Gradients grads;
  std::vector<LayerCache> caches;
  TrainResult result;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const auto b = static_cast<Eigen::Index>(end - start);
      MatrixXd bx(b, x.cols()), by(b, y.cols());
      for (Eigen::Index i = 0; i < b; ++i) {
        bx.row(i) = x.row(order[start + static_cast<std::size_t>(i)]);
        by.row(i) = y.row(order[start + static_cast<std::size_t>(i)]);
      }
      const double loss = loss_impl(model, bx, by, &grads, caches);
      check_finite(loss, "training loss");
      loss_sum += loss;
      ++batches;

      // Running statistics follow the batch statistics of this step.
      if (model.spec.batch_norm && b > 1) {
        for (std::size_t l = 0; l < model.norms.size(); ++l) {
          auto& bn = model.norms[l];
          const double unbias = double(b) / double(b - 1);
          bn.running_mean = cfg.bn_momentum * bn.running_mean + (1.0 - cfg.bn_momentum) * caches[l].mean;
          bn.running_var = cfg.bn_momentum * bn.running_var + (1.0 - cfg.bn_momentum) * unbias * caches[l].var;
        }
      }

      auto step = [&](auto& param, auto& vel, const auto& g) {
        vel = cfg.momentum * vel - cfg.learning_rate * g;
        param += vel;
      };
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        step(model.layers[l].weight, velocity.layers[l].weight, grads.layers[l].weight);
        step(model.layers[l].bias, velocity.layers[l].bias, grads.layers[l].bias);
      }
      for (std::size_t l = 0; l < model.norms.size(); ++l) {
        step(model.norms[l].gamma, velocity.norms[l].gamma, grads.norms[l].gamma);
        step(model.norms[l].beta, velocity.norms[l].beta, grads.norms[l].beta);
      }
    }
    EpochLoss e{epoch, loss_sum / double(batches), std::nullopt};
    if (val_x) {
      e.val_mse = mean_squared_error(model, *val_x, *val_y, Mode::infer);
      check_finite(*e.val_mse, "validation loss");
    }
    result.history.push_back(e);
  }
  model.round_to_float();
  model.trained = true;
  model.epochs_trained += cfg.epochs;
  if (!result.history.empty()) model.metrics["final_train_mse"] = result.history.back().train_mse;
  result.model = std::move(model);
  return result;
}

EmbeddingTable predict_cold_embeddings(const RegressorModel& model, const EmbeddingTable& features) {
  if (!model.trained) throw UsageError("model has not been trained");
  if (features.dim() != model.spec.input_dim) {
    throw DimensionError("feature dimension " + std::to_string(features.dim()) + " does not match model input " +
                         std::to_string(model.spec.input_dim));
  }
  EmbeddingTable out(model.spec.output_dim);
  for (std::size_t p = 0; p < features.size(); ++p) {
    auto v = predict_one(model, features.row(p));
    out.add(features.ids()[p], std::span<const float>(v));
  }
  return out;
}

Eigen::MatrixXd to_matrix(const EmbeddingTable& table) {
  MatrixXd m(static_cast<Eigen::Index>(table.size()), static_cast<Eigen::Index>(table.dim()));
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto row = table.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  }
  return m;
}

std::string loss_curve_csv(const std::vector<EpochLoss>& history) {
  std::string out = "epoch,train_mse,val_mse\n";
  for (const auto& e : history) {
    out += std::to_string(e.epoch) + "," + io::format_double(e.train_mse) + "," +
           (e.val_mse ? io::format_double(*e.val_mse) : std::string()) + "\n";
  }
  return out;
}

// ---- serialization ----

namespace {

constexpr std::string_view kModelMagic = "CSREG1";
constexpr int kModelFormat = 1;

void write_block(std::ostream& out, const MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) io::write_f32(out, to_float(m(i, j)));
  }
}

void write_block(std::ostream& out, const VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) io::write_f32(out, to_float(v(i)));
}

void read_block(std::istream& in, MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = io::read_f32(in);
  }
}

void read_block(std::istream& in, VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = io::read_f32(in);
}

}  // namespace

std::string serialize_model(const RegressorModel& model) {
  std::ostringstream out(std::ios::binary);
  const auto& s = model.spec;
  out << kModelMagic << '\n';
  out << "format " << kModelFormat << '\n';
  out << "input_dim " << s.input_dim << '\n';
  out << "hidden ";
  for (std::size_t i = 0; i < s.hidden.size(); ++i) out << (i ? "," : "") << s.hidden[i];
  out << '\n';
  out << "output_dim " << s.output_dim << '\n';
  out << "batch_norm " << (s.batch_norm ? 1 : 0) << '\n';
  out << "placement " << (s.placement == BatchNormPlacement::after_activation ? "after_activation" : "before_activation")
      << '\n';
  out << "bn_epsilon " << io::format_double(s.bn_epsilon) << '\n';
  out << "channel_spec_version " << model.channel_spec_version << '\n';
  out << "seed " << model.seed << '\n';
  out << "epochs " << model.epochs_trained << '\n';
  out << "trained " << (model.trained ? 1 : 0) << '\n';
  for (const auto& [k, v] : model.metrics) out << "metric " << k << ' ' << io::format_double(v) << '\n';
  out << "end\n";
  for (const auto& l : model.layers) {
    write_block(out, l.weight);
    write_block(out, l.bias);
  }
  for (const auto& b : model.norms) {
    write_block(out, b.gamma);
    write_block(out, b.beta);
    write_block(out, b.running_mean);
    write_block(out, b.running_var);
  }
  return out.str();
}

RegressorModel deserialize_model(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  std::string line;
  if (!std::getline(in, line) || line != kModelMagic) {
    throw FormatError(FormatError::Kind::bad_magic, "not a regressor model file");
  }
  RegressorModel m;
  RegressorSpec& s = m.spec;
  s.hidden.clear();
  bool ended = false;
  int format = -1;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string key, value;
    ls >> key >> value;
    if (key == "format") {
      format = static_cast<int>(io::parse_i64(value));
    } else if (key == "input_dim") {
      s.input_dim = io::parse_u64(value);
    } else if (key == "hidden") {
      std::string_view rest = value;
      while (!rest.empty()) {
        auto comma = rest.find(',');
        s.hidden.push_back(io::parse_u64(rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
    } else if (key == "output_dim") {
      s.output_dim = io::parse_u64(value);
    } else if (key == "batch_norm") {
      s.batch_norm = value == "1";
    } else if (key == "placement") {
      if (value == "after_activation") s.placement = BatchNormPlacement::after_activation;
      else if (value == "before_activation") s.placement = BatchNormPlacement::before_activation;
      else throw FormatError(FormatError::Kind::parse, "unknown batch-norm placement '" + value + "'");
    } else if (key == "bn_epsilon") {
      s.bn_epsilon = io::parse_double(value);
    } else if (key == "channel_spec_version") {
      m.channel_spec_version = static_cast<std::uint32_t>(io::parse_u64(value));
    } else if (key == "seed") {
      m.seed = io::parse_u64(value);
    } else if (key == "epochs") {
      m.epochs_trained = static_cast<int>(io::parse_i64(value));
    } else if (key == "trained") {
      m.trained = value == "1";
    } else if (key == "metric") {
      std::string number;
      ls >> number;
      m.metrics[value] = io::parse_double(number);
    } else {
      throw FormatError(FormatError::Kind::parse, "unknown model header line '" + line + "'");
    }
  }
  if (!ended) throw FormatError(FormatError::Kind::truncated, "model header is truncated");
  if (format != kModelFormat) {
    throw FormatError(FormatError::Kind::version_mismatch, "unsupported model format " + std::to_string(format));
  }
  try {
    s.validate();
  } catch (const UsageError& e) {
    throw FormatError(FormatError::Kind::shape_mismatch, e.what());
  }

  std::size_t expected = 0;
  {
    std::size_t fan_in = s.input_dim;
    for (auto h : s.hidden) {
      expected += h * fan_in + h + (s.batch_norm ? 4 * h : 0);
      fan_in = h;
    }
    expected += s.output_dim * fan_in + s.output_dim;
  }
  const auto header_end = static_cast<std::size_t>(in.tellg());
  const std::size_t block = bytes.size() - header_end;
  if (block < expected * 4) {
    throw FormatError(FormatError::Kind::truncated, "parameter block is truncated: " + std::to_string(block) +
                                                        " of " + std::to_string(expected * 4) + " bytes");
  }
  if (block > expected * 4) {
    throw FormatError(FormatError::Kind::shape_mismatch, "parameter block holds " + std::to_string(block) +
                                                             " bytes, header spec needs " + std::to_string(expected * 4));
  }

  std::size_t fan_in = s.input_dim;
  for (auto h : s.hidden) {
    DenseLayer l{MatrixXd(h, fan_in), VectorXd(static_cast<Eigen::Index>(h))};
    m.layers.push_back(std::move(l));
    fan_in = h;
  }
  m.layers.push_back({MatrixXd(s.output_dim, fan_in), VectorXd(static_cast<Eigen::Index>(s.output_dim))});
  for (auto& l : m.layers) {
    read_block(in, l.weight);
    read_block(in, l.bias);
  }
  if (s.batch_norm) {
    for (auto h : s.hidden) {
      const auto n = static_cast<Eigen::Index>(h);
      BatchNormLayer b{VectorXd(n), VectorXd(n), VectorXd(n), VectorXd(n)};
      read_block(in, b.gamma);
      read_block(in, b.beta);
      read_block(in, b.running_mean);
      read_block(in, b.running_var);
      if ((b.running_var.array() < 0.0).any()) {
        throw FormatError(FormatError::Kind::parse, "negative running variance in model file");
      }
      m.norms.push_back(std::move(b));
    }
  }
  return m;
}

void save_model(const std::filesystem::path& path, const RegressorModel& model) {
  io::write_file(path, serialize_model(model));
}

RegressorModel load_model(const std::filesystem::path& path) { return deserialize_model(io::read_file(path)); }

}  // namespace coldstart
