#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "vmg/nn.hpp"

namespace vmg::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode gradient tape over batched matrix values.
///
/// Every operation evaluates eagerly and records how to push its output
/// gradient back to its inputs. `backward` on a 1x1 value propagates through
/// the whole record and accumulates parameter gradients into the MlpGrads
/// passed to `mlp`. A tape is single-use: record one forward pass, call
/// `backward` once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);

  /// Records a full MLP forward pass. `grads` may be null for a frozen network.
  Var mlp(const Mlp& net, MlpGrads* grads, Var input);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var concat_cols(Var a, Var b);
  Var relu(Var a);
  Var affine(Var a, double scale, double shift);

  Var row_sq_norm(Var a);               // n x 1
  Var row_norm(Var a);                  // n x 1, zero subgradient at the origin
  Var pairwise_sq_dist(Var a, Var b);   // rows(a) x rows(b)
  Var diagonal(Var a);                  // n x 1 from an n x n value
  Var mean(Var a);                      // 1 x 1
  Var offdiag_mean(Var a);              // 1 x 1 mean over i != j of an n x n value

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Throws InvalidArgument unless `loss` is 1x1.
  void backward(Var loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> back;
  };

  Var push(Matrix value, std::function<void()> back);
  Matrix& grad(std::size_t id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
  bool used_ = false;
};

}  // namespace vmg::nn
