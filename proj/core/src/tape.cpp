#include "vmg/tape.hpp"

#include <string>

#include "vmg/errors.hpp"

namespace vmg::nn {
namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
  }
}

}  // namespace

Var Tape::push(Matrix value, std::function<void()> back) {
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(back)});
  return Var{nodes_.size() - 1};
}

double Tape::scalar(Var v) const {
  const auto& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw InvalidArgument("tape: value is not a scalar");
  return m(0, 0);
}

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::mlp(const Mlp& net, MlpGrads* grads, Var input) {
  if (static_cast<std::size_t>(value(input).cols()) != net.input_dim()) {
    throw InvalidArgument("mlp_forward: input has " + std::to_string(value(input).cols()) + " columns, expected " +
                          std::to_string(net.input_dim()));
  }
  Var x = input;
  const auto layers = net.layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const DenseLayer* layer = &layers[li];
    Matrix y = value(x) * layer->weight.transpose();
    y.rowwise() += layer->bias.transpose();
    const std::size_t in_id = x.id;
    const std::size_t out_id = nodes_.size();
    x = push(std::move(y), [this, layer, grads, li, in_id, out_id] {
      const Matrix& dy = nodes_[out_id].grad;
      if (grads != nullptr) {
        grads->weight[li].noalias() += dy.transpose() * nodes_[in_id].value;
        grads->bias[li] += dy.colwise().sum().transpose();
      }
      nodes_[in_id].grad.noalias() += dy * layer->weight;
    });
    if (layer->activation == Activation::relu) x = relu(x);
  }
  return x;
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  const std::size_t out = nodes_.size();
  return push(value(a) + value(b), [this, a, b, out] {
    grad(a.id) += grad(out);
    grad(b.id) += grad(out);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  const std::size_t out = nodes_.size();
  return push(value(a) - value(b), [this, a, b, out] {
    grad(a.id) += grad(out);
    grad(b.id) -= grad(out);
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const auto& va = value(a);
  const auto& vb = value(b);
  if (va.rows() != vb.rows()) throw InvalidArgument("concat: row count mismatch");
  Matrix c(va.rows(), va.cols() + vb.cols());
  c << va, vb;
  const std::size_t out = nodes_.size();
  const auto ca = va.cols();
  const auto cb = vb.cols();
  return push(std::move(c), [this, a, b, out, ca, cb] {
    grad(a.id) += grad(out).leftCols(ca);
    grad(b.id) += grad(out).rightCols(cb);
  });
}

Var Tape::relu(Var a) {
  const std::size_t out = nodes_.size();
  return push(value(a).cwiseMax(0.0), [this, a, out] {
    const Matrix& x = nodes_[a.id].value;
    grad(a.id) += (x.array() > 0.0).select(grad(out), 0.0);
  });
}

Var Tape::affine(Var a, double scale, double shift) {
  const std::size_t out = nodes_.size();
  Matrix y = (value(a).array() * scale + shift).matrix();
  return push(std::move(y), [this, a, out, scale] { grad(a.id) += scale * grad(out); });
}

Var Tape::row_sq_norm(Var a) {
  const std::size_t out = nodes_.size();
  Matrix y = value(a).rowwise().squaredNorm();
  return push(std::move(y), [this, a, out] {
    const Matrix& x = nodes_[a.id].value;
    grad(a.id) += 2.0 * (x.array().colwise() * grad(out).col(0).array()).matrix();
  });
}

Var Tape::row_norm(Var a) {
  const std::size_t out = nodes_.size();
  Matrix y = value(a).rowwise().norm();
  return push(std::move(y), [this, a, out] {
    const Matrix& x = nodes_[a.id].value;
    const Matrix& n = nodes_[out].value;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (n(r, 0) > 0.0) grad(a.id).row(r) += (grad(out)(r, 0) / n(r, 0)) * x.row(r);
    }
  });
}

Var Tape::pairwise_sq_dist(Var a, Var b) {
  const auto& va = value(a);
  const auto& vb = value(b);
  if (va.cols() != vb.cols()) throw InvalidArgument("pairwise_sq_dist: feature dim mismatch");
  Matrix d(va.rows(), vb.rows());
  for (Eigen::Index i = 0; i < va.rows(); ++i) {
    for (Eigen::Index j = 0; j < vb.rows(); ++j) d(i, j) = (va.row(i) - vb.row(j)).squaredNorm();
  }
  const std::size_t out = nodes_.size();
  return push(std::move(d), [this, a, b, out] {
    const Matrix& x = nodes_[a.id].value;
    const Matrix& y = nodes_[b.id].value;
    const Matrix& g = nodes_[out].grad;
    // d/dx_i = 2 sum_j g_ij (x_i - y_j);  d/dy_j = -2 sum_i g_ij (x_i - y_j)
    const Eigen::VectorXd row_sum = g.rowwise().sum();
    const Eigen::VectorXd col_sum = g.colwise().sum().transpose();
    Matrix gx = 2.0 * (row_sum.asDiagonal() * x - g * y);
    Matrix gy = 2.0 * (col_sum.asDiagonal() * y - g.transpose() * x);
    grad(a.id) += gx;
    grad(b.id) += gy;
  });
}

Var Tape::diagonal(Var a) {
  const auto& va = value(a);
  if (va.rows() != va.cols()) throw InvalidArgument("diagonal: value is not square");
  Matrix d = va.diagonal();
  const std::size_t out = nodes_.size();
  return push(std::move(d), [this, a, out] { grad(a.id).diagonal() += grad(out).col(0); });
}

Var Tape::mean(Var a) {
  const auto& va = value(a);
  if (va.size() == 0) throw InvalidArgument("mean: empty value");
  Matrix m(1, 1);
  m(0, 0) = va.mean();
  const std::size_t out = nodes_.size();
  const double inv = 1.0 / static_cast<double>(va.size());
  return push(std::move(m), [this, a, out, inv] { grad(a.id).array() += grad(out)(0, 0) * inv; });
}

Var Tape::offdiag_mean(Var a) {
  const auto& va = value(a);
  if (va.rows() != va.cols() || va.rows() < 2) throw InvalidArgument("offdiag_mean: need a square value with n >= 2");
  const auto n = va.rows();
  const double inv = 1.0 / static_cast<double>(n * (n - 1));
  Matrix m(1, 1);
  m(0, 0) = (va.sum() - va.trace()) * inv;
  const std::size_t out = nodes_.size();
  return push(std::move(m), [this, a, out, inv] {
    const double g = grad(out)(0, 0) * inv;
    grad(a.id).array() += g;
    grad(a.id).diagonal().array() -= g;
  });
}

void Tape::backward(Var loss) {
  const auto& l = value(loss);
  if (l.rows() != 1 || l.cols() != 1) {
    throw InvalidArgument("backward: loss must be scalar, got " + std::to_string(l.rows()) + "x" +
                          std::to_string(l.cols()));
  }
  if (used_) throw StateError("backward: tape already consumed");
  used_ = true;
  for (auto& n : nodes_) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back();
  }
}

}  // namespace vmg::nn
