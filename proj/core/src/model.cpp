#include "fliplog/model.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fliplog/errors.hpp"
#include "fliplog/ops.hpp"
#include "fliplog/rng.hpp"

namespace fliplog {

namespace {

constexpr int kImageSide = 28;
constexpr int kCheckpointVersion = 1;

void validate_config(const CaeConfig& cfg) {
  if (cfg.latent_dim < 1) {
    throw ContractError("latent_dim must be >= 1, got " +
                        std::to_string(cfg.latent_dim));
  }
  if (cfg.kernel < 1 || cfg.kernel % 2 == 0) {
    throw ContractError("kernel must be odd and >= 1, got " +
                        std::to_string(cfg.kernel));
  }
  if (cfg.encoder_channels.empty()) {
    throw ContractError("encoder_channels must be non-empty");
  }
  for (int c : cfg.encoder_channels) {
    if (c < 1) throw ContractError("encoder channel counts must be >= 1");
  }
}

Tensor kaiming_uniform(Shape shape, std::int64_t fan_in, Xoshiro256ss& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor t(std::move(shape), /*requires_grad=*/true);
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

CaeModel::Plan CaeModel::make_plan(const CaeConfig& cfg) {
  validate_config(cfg);
  Plan plan;
  int size = kImageSide;
  int in_ch = 1;
  for (int out_ch : cfg.encoder_channels) {
    plan.enc_in.push_back(in_ch);
    plan.enc_out.push_back(out_ch);
    size = (size + 2 - cfg.kernel) / 2 + 1;  // stride 2, padding 1
    if (size < 1) throw ContractError("encoder shrinks the image away");
    plan.enc_size.push_back(size);
    in_ch = out_ch;
  }
  plan.bottom = size;
  plan.flat = static_cast<std::int64_t>(in_ch) * size * size;

  // Mirror the encoder; output padding makes each upsample land exactly on
  // the matching encoder size.
  int cur = size;
  for (std::size_t i = cfg.encoder_channels.size(); i-- > 0;) {
    const int target = i == 0 ? kImageSide : plan.enc_size[i - 1];
    const int base = (cur - 1) * 2 - 2 + cfg.kernel;
    const int opad = target - base;
    if (opad < 0 || opad > 1) {
      throw ContractError("decoder cannot reach size " + std::to_string(target) +
                          " from " + std::to_string(cur));
    }
    plan.dec_in.push_back(cfg.encoder_channels[i]);
    plan.dec_out.push_back(i == 0 ? 1 : cfg.encoder_channels[i - 1]);
    plan.dec_opad.push_back(opad);
    cur = target;
  }
  return plan;
}

CaeModel CaeModel::build(const CaeConfig& config, std::uint64_t seed) {
  CaeModel model;
  model.cfg_ = config;
  model.plan_ = make_plan(config);
  const Plan& plan = model.plan_;
  const int k = config.kernel;
  Xoshiro256ss rng(seed);

  auto push = [&model](const std::string& name, Tensor tensor) {
    model.names_.push_back(name);
    model.params_.push_back(std::move(tensor));
  };

  for (std::size_t i = 0; i < plan.enc_in.size(); ++i) {
    const std::int64_t fan_in = static_cast<std::int64_t>(plan.enc_in[i]) * k * k;
    push("enc" + std::to_string(i) + ".w",
         kaiming_uniform({plan.enc_out[i], plan.enc_in[i], k, k}, fan_in, rng));
    push("enc" + std::to_string(i) + ".b",
         Tensor::zeros({plan.enc_out[i]}, /*requires_grad=*/true));
  }
  push("latent.w", kaiming_uniform({plan.flat, config.latent_dim}, plan.flat, rng));
  push("latent.b", Tensor::zeros({config.latent_dim}, true));
  push("expand.w",
       kaiming_uniform({config.latent_dim, plan.flat}, config.latent_dim, rng));
  push("expand.b", Tensor::zeros({plan.flat}, true));
  for (std::size_t i = 0; i < plan.dec_in.size(); ++i) {
    const std::int64_t fan_in = static_cast<std::int64_t>(plan.dec_in[i]) * k * k;
    push("dec" + std::to_string(i) + ".w",
         kaiming_uniform({plan.dec_in[i], plan.dec_out[i], k, k}, fan_in, rng));
    push("dec" + std::to_string(i) + ".b",
         Tensor::zeros({plan.dec_out[i]}, true));
  }
  return model;
}

Tensor CaeModel::forward(const Tensor& batch) const {
  if (batch.rank() != 4 || batch.shape()[1] != 1 ||
      batch.shape()[2] != kImageSide || batch.shape()[3] != kImageSide) {
    throw ShapeError("CAE forward expects [N,1,28,28], got " +
                     shape_str(batch.shape()));
  }
  const std::int64_t n = batch.shape()[0];
  std::size_t p = 0;
  auto next = [&]() -> const Tensor& { return params_[p++]; };

  Tensor x = batch;
  for (std::size_t i = 0; i < plan_.enc_in.size(); ++i) {
    const Tensor& w = next();
    const Tensor& b = next();
    x = relu(add_channel_bias(conv2d(x, w, 2, 1), b));
  }
  x = reshape(x, {n, plan_.flat});
  {
    // Linear bottleneck: a ReLU here throws away half the code space.
    const Tensor& w = next();
    const Tensor& b = next();
    x = add_rowvec(matmul(x, w), b);
  }
  {
    const Tensor& w = next();
    const Tensor& b = next();
    x = relu(add_rowvec(matmul(x, w), b));
  }
  x = reshape(x, {n, static_cast<std::int64_t>(plan_.dec_in[0]), plan_.bottom,
                  plan_.bottom});
  for (std::size_t i = 0; i < plan_.dec_in.size(); ++i) {
    const Tensor& w = next();
    const Tensor& b = next();
    x = add_channel_bias(conv2d_transpose(x, w, 2, 1, plan_.dec_opad[i]), b);
    x = (i + 1 == plan_.dec_in.size()) ? sigmoid(x) : relu(x);
  }
  return x;
}

std::int64_t CaeModel::parameter_count() const {
  std::int64_t n = 0;
  for (const Tensor& p : params_) n += p.numel();
  return n;
}

std::int64_t CaeModel::expected_parameter_count(const CaeConfig& config) {
  const Plan plan = make_plan(config);
  const std::int64_t kk = static_cast<std::int64_t>(config.kernel) * config.kernel;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < plan.enc_in.size(); ++i) {
    n += static_cast<std::int64_t>(plan.enc_out[i]) * plan.enc_in[i] * kk +
         plan.enc_out[i];
  }
  n += plan.flat * config.latent_dim + config.latent_dim;  // latent dense
  n += static_cast<std::int64_t>(config.latent_dim) * plan.flat + plan.flat;
  for (std::size_t i = 0; i < plan.dec_in.size(); ++i) {
    n += static_cast<std::int64_t>(plan.dec_in[i]) * plan.dec_out[i] * kk +
         plan.dec_out[i];
  }
  return n;
}

void CaeModel::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void CaeModel::save(const std::string& path) const {
  nlohmann::json doc;
  doc["format_version"] = kCheckpointVersion;
  doc["config"] = {{"encoder_channels", cfg_.encoder_channels},
                   {"kernel", cfg_.kernel},
                   {"latent_dim", cfg_.latent_dim}};
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto values = params_[i].data();
    tensors.push_back({{"name", names_[i]},
                       {"shape", params_[i].shape()},
                       {"data", std::vector<double>(values.begin(), values.end())}});
  }
  doc["tensors"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << doc.dump();
}

CaeModel CaeModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + "': invalid checkpoint JSON: " + e.what());
  }
  if (!doc.contains("format_version") ||
      doc["format_version"].get<int>() != kCheckpointVersion) {
    throw FormatError("'" + path + "': unsupported checkpoint version");
  }
  CaeConfig cfg;
  cfg.encoder_channels = doc["config"]["encoder_channels"].get<std::vector<int>>();
  cfg.kernel = doc["config"]["kernel"].get<int>();
  cfg.latent_dim = doc["config"]["latent_dim"].get<int>();
  CaeModel model = build(cfg, /*seed=*/0);
  const auto& tensors = doc["tensors"];
  if (tensors.size() != model.params_.size()) {
    throw FormatError("'" + path + "': expected " +
                      std::to_string(model.params_.size()) + " tensors, found " +
                      std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < model.params_.size(); ++i) {
    const auto& entry = tensors[i];
    if (entry["name"].get<std::string>() != model.names_[i]) {
      throw FormatError("'" + path + "': tensor " + std::to_string(i) +
                        " is '" + entry["name"].get<std::string>() +
                        "', expected '" + model.names_[i] + "'");
    }
    const Shape shape = entry["shape"].get<Shape>();
    if (shape != model.params_[i].shape()) {
      throw FormatError("'" + path + "': shape mismatch for " + model.names_[i]);
    }
    const auto values = entry["data"].get<std::vector<double>>();
    if (values.size() != static_cast<std::size_t>(model.params_[i].numel())) {
      throw FormatError("'" + path + "': data size mismatch for " +
                        model.names_[i]);
    }
    auto dst = model.params_[i].data();
    std::copy(values.begin(), values.end(), dst.begin());
  }
  return model;
}

}  // namespace fliplog
