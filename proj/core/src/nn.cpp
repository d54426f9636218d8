#include "vmg/nn.hpp"

#include <cmath>

#include "vmg/errors.hpp"

namespace vmg::nn {
namespace {

void apply_activation(Matrix& m, Activation a) {
  if (a == Activation::relu) m = m.cwiseMax(0.0);
}

std::vector<std::size_t> standard_widths(std::size_t in, std::size_t out) {
  return {in, kHiddenWidth, kHiddenWidth, out};
}

}  // namespace

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidArgument("mlp: at least one layer required");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weight.rows()) {
      throw InvalidArgument("mlp: layer " + std::to_string(i) + " bias size does not match weight rows");
    }
    if (i > 0 && layers_[i - 1].weight.rows() != l.weight.cols()) {
      throw InvalidArgument("mlp: layer " + std::to_string(i) + " input dim does not chain");
    }
  }
}

Mlp Mlp::with_widths(std::span<const std::size_t> widths, std::mt19937_64& rng) {
  if (widths.size() < 2) throw InvalidArgument("mlp: need at least input and output width");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(widths[i]);
    const auto out = static_cast<Eigen::Index>(widths[i + 1]);
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(out, in);
    layer.bias.resize(out);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    }
    for (Eigen::Index r = 0; r < out; ++r) layer.bias(r) = dist(rng);
    layer.activation = (i + 2 < widths.size()) ? Activation::relu : Activation::identity;
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

Mlp Mlp::standard(std::size_t input_dim, std::size_t output_dim, std::mt19937_64& rng) {
  const auto w = standard_widths(input_dim, output_dim);
  return with_widths(w, rng);
}

Mlp Mlp::zeros(std::span<const std::size_t> widths) {
  if (widths.size() < 2) throw InvalidArgument("mlp: need at least input and output width");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    DenseLayer layer;
    layer.weight = Matrix::Zero(static_cast<Eigen::Index>(widths[i + 1]), static_cast<Eigen::Index>(widths[i]));
    layer.bias = Vector::Zero(static_cast<Eigen::Index>(widths[i + 1]));
    layer.activation = (i + 2 < widths.size()) ? Activation::relu : Activation::identity;
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

Vector Mlp::forward(const Vector& input) const {
  if (static_cast<std::size_t>(input.size()) != input_dim()) {
    throw InvalidArgument("mlp_forward: input has " + std::to_string(input.size()) + " entries, expected " +
                          std::to_string(input_dim()));
  }
  Matrix x = input.transpose();
  return forward_batch(x).row(0).transpose();
}

Matrix Mlp::forward_batch(const Matrix& inputs) const {
  if (static_cast<std::size_t>(inputs.cols()) != input_dim()) {
    throw InvalidArgument("mlp_forward: input has " + std::to_string(inputs.cols()) + " columns, expected " +
                          std::to_string(input_dim()));
  }
  Matrix x = inputs;
  for (const auto& l : layers_) {
    Matrix y = x * l.weight.transpose();
    y.rowwise() += l.bias.transpose();
    apply_activation(y, l.activation);
    x = std::move(y);
  }
  return x;
}

std::size_t Mlp::input_dim() const { return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols()); }
std::size_t Mlp::output_dim() const { return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows()); }

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool Mlp::is_standard() const {
  if (layers_.size() != kLayerCount) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const bool hidden = i + 1 < layers_.size();
    if (hidden && (static_cast<std::size_t>(layers_[i].weight.rows()) != kHiddenWidth ||
                   layers_[i].activation != Activation::relu)) {
      return false;
    }
    if (!hidden && layers_[i].activation != Activation::identity) return false;
  }
  return true;
}

void Mlp::for_each_parameter(const std::function<void(double&)>& fn) {
  for (auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) fn(l.weight.data()[i]);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) fn(l.bias.data()[i]);
  }
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const auto& x = a.layers_[i];
    const auto& y = b.layers_[i];
    if (x.activation != y.activation || x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols() ||
        x.weight != y.weight || x.bias != y.bias) {
      return false;
    }
  }
  return true;
}

MlpGrads MlpGrads::zeros_like(const Mlp& net) {
  MlpGrads g;
  for (const auto& l : net.layers()) {
    g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vector::Zero(l.bias.size()));
  }
  return g;
}

void MlpGrads::set_zero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
}

void MlpGrads::for_each(const std::function<void(double)>& fn) const {
  for (std::size_t i = 0; i < weight.size(); ++i) {
    for (Eigen::Index k = 0; k < weight[i].size(); ++k) fn(weight[i].data()[k]);
    for (Eigen::Index k = 0; k < bias[i].size(); ++k) fn(bias[i].data()[k]);
  }
}

}  // namespace vmg::nn
