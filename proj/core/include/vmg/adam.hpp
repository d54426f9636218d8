#pragma once

#include <cstdint>
#include <string_view>

#include "vmg/nn.hpp"

namespace vmg::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  MlpGrads first_moment;
  MlpGrads second_moment;
  std::int64_t step_count = 0;

  static AdamState init(const Mlp& net, AdamConfig config = {});
  friend bool operator==(const AdamState& a, const AdamState& b);
};

/// Throws NumericFault naming the first non-finite parameter group, e.g. "enc_s.layer1.bias".
void check_finite(const MlpGrads& grads, std::string_view net_name);

/// One bias-corrected Adam update. Validates `grads` before touching `params`.
void adam_step(Mlp& params, const MlpGrads& grads, AdamState& state, std::string_view net_name = "net");

}  // namespace vmg::nn
