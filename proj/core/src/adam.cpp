#include "vmg/adam.hpp"

#include <cmath>
#include <string>

#include "vmg/errors.hpp"

namespace vmg::nn {

AdamState AdamState::init(const Mlp& net, AdamConfig config) {
  if (!(config.learning_rate > 0.0)) throw InvalidArgument("adam: learning_rate must be > 0");
  return AdamState{config, MlpGrads::zeros_like(net), MlpGrads::zeros_like(net), 0};
}

bool operator==(const AdamState& a, const AdamState& b) {
  auto eq = [](const MlpGrads& x, const MlpGrads& y) { return x.weight == y.weight && x.bias == y.bias; };
  return a.step_count == b.step_count && a.config.learning_rate == b.config.learning_rate &&
         a.config.beta1 == b.config.beta1 && a.config.beta2 == b.config.beta2 && a.config.epsilon == b.config.epsilon &&
         eq(a.first_moment, b.first_moment) && eq(a.second_moment, b.second_moment);
}

void check_finite(const MlpGrads& grads, std::string_view net_name) {
  for (std::size_t i = 0; i < grads.weight.size(); ++i) {
    if (!grads.weight[i].allFinite()) {
      throw NumericFault("non-finite gradient in " + std::string(net_name) + ".layer" + std::to_string(i) + ".weight");
    }
    if (!grads.bias[i].allFinite()) {
      throw NumericFault("non-finite gradient in " + std::string(net_name) + ".layer" + std::to_string(i) + ".bias");
    }
  }
}

void adam_step(Mlp& params, const MlpGrads& grads, AdamState& state, std::string_view net_name) {
  const auto layers = params.layers();
  if (grads.weight.size() != layers.size() || state.first_moment.weight.size() != layers.size()) {
    throw InvalidArgument("adam: gradient/state shape does not match parameters");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (grads.weight[i].rows() != layers[i].weight.rows() || grads.weight[i].cols() != layers[i].weight.cols() ||
        grads.bias[i].size() != layers[i].bias.size()) {
      throw InvalidArgument("adam: gradient shape mismatch at layer " + std::to_string(i));
    }
  }
  if (!(state.config.learning_rate > 0.0)) throw InvalidArgument("adam: learning_rate must be > 0");
  check_finite(grads, net_name);

  const auto& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    p.array() -= c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].weight, grads.weight[i], state.first_moment.weight[i], state.second_moment.weight[i]);
    update(layers[i].bias, grads.bias[i], state.first_moment.bias[i], state.second_moment.bias[i]);
  }
}

}  // namespace vmg::nn
