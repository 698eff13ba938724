#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fliplog/tensor.hpp"

namespace fliplog {

/// Convolutional auto-encoder architecture. Encoder channels expand
/// 1 -> 16 -> 32 -> 64 with stride-2 kernel-3 convolutions; the decoder
/// mirrors them with transpose convolutions and a sigmoid head, which pins
/// reconstructions inside (0,1) so the log-scaled losses stay finite.
struct CaeConfig {
  std::vector<int> encoder_channels{16, 32, 64};
  int kernel = 3;
  int latent_dim = 16;
};

class CaeModel {
 public:
  /// Deterministic construction: Kaiming-uniform fan-in weights and zero
  /// biases drawn from xoshiro256**(seed) in registration order.
  static CaeModel build(const CaeConfig& config, std::uint64_t seed);

  /// Reconstruction of a [N,1,28,28] batch; output has the same shape with
  /// values strictly in (0,1). Gradient-trackable.
  Tensor forward(const Tensor& batch) const;

  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  const CaeConfig& config() const { return cfg_; }

  std::int64_t parameter_count() const;
  /// Parameter count implied by the layer plan alone.
  static std::int64_t expected_parameter_count(const CaeConfig& config);

  void zero_grad();

  /// Versioned JSON checkpoint of named parameter tensors.
  void save(const std::string& path) const;
  static CaeModel load(const std::string& path);

 private:
  CaeModel() = default;

  // Layer plan, fixed by the config:
  //   encoder: conv stride 2, padding 1, spatial 28 -> 14 -> 7 -> 4
  //   bottleneck: flatten (64*4*4 = 1024) -> dense latent -> dense 1024
  //   decoder: transpose convs stride 2, padding 1, output padding {0,1,1}
  //            so the chain 4 -> 7 -> 14 -> 28 is exact
  struct Plan {
    std::vector<int> enc_in, enc_out, enc_size;   // per conv layer
    std::vector<int> dec_in, dec_out, dec_opad;   // per transpose conv layer
    std::int64_t flat = 0;                        // flattened bottleneck width
    int bottom = 0;                               // spatial size at the bottom
  };
  static Plan make_plan(const CaeConfig& config);

  CaeConfig cfg_;
  Plan plan_;
  std::vector<Tensor> params_;
  std::vector<std::string> names_;
};

}  // namespace fliplog
