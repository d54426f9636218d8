#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace vmg::nn {

// Row-major so that a batch is one sample per row and weights are (out x in).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr std::size_t kHiddenWidth = 256;
inline constexpr std::size_t kLayerCount = 3;

enum class Activation : std::uint8_t { identity = 0, relu = 1 };

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::identity;
};

/// Multi-layer perceptron: a chain of affine layers, each followed by its activation.
///
/// The engine accepts any chain of widths; the models built on top of it use
/// `Mlp::standard` (three layers, 256 hidden units, ReLU hidden, identity output).
class Mlp {
 public:
  Mlp() = default;
  /// Throws InvalidArgument if consecutive layer shapes do not chain.
  explicit Mlp(std::vector<DenseLayer> layers);

  /// Uniform init in +-sqrt(1/fan_in), seeded.
  static Mlp standard(std::size_t input_dim, std::size_t output_dim, std::mt19937_64& rng);
  static Mlp with_widths(std::span<const std::size_t> widths, std::mt19937_64& rng);
  static Mlp zeros(std::span<const std::size_t> widths);

  Vector forward(const Vector& input) const;
  Matrix forward_batch(const Matrix& inputs) const;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  bool is_standard() const;

  std::span<const DenseLayer> layers() const { return layers_; }
  std::span<DenseLayer> layers() { return layers_; }

  /// Visits every scalar parameter in a fixed order (layer, weight row-major, then bias).
  void for_each_parameter(const std::function<void(double&)>& fn);

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  std::vector<DenseLayer> layers_;
};

/// Parameter-shaped accumulator used for gradients and Adam moments.
struct MlpGrads {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  static MlpGrads zeros_like(const Mlp& net);
  void set_zero();
  void for_each(const std::function<void(double)>& fn) const;
};

}  // namespace vmg::nn
