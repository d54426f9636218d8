#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vmg/adam.hpp"
#include "vmg/checkpoint.hpp"
#include "vmg/dataset.hpp"
#include "vmg/nn.hpp"
#include "vmg/tape.hpp"

namespace vmg::metric {

using nn::Matrix;
using nn::Vector;

struct MetricConfig {
  std::size_t metric_dim = 10;
  double margin = 1.0;
  std::size_t epochs = 800;
  std::size_t batch_size = 100;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 50;
};

/// State encoder, action encoder and action decoder sharing one metric space.
struct MetricModel {
  nn::Mlp state_encoder;   // s -> f_s
  nn::Mlp action_encoder;  // [f_s, a] -> delta f
  nn::Mlp action_decoder;  // [f_s, delta f] -> a~
  std::size_t metric_dim = 10;
  double margin = 1.0;

  static MetricModel create(std::size_t state_dim, std::size_t action_dim, std::size_t metric_dim, double margin,
                            std::mt19937_64& rng);
  std::size_t state_dim() const { return state_encoder.input_dim(); }
  std::size_t action_dim() const { return action_decoder.output_dim(); }
  /// Throws InvalidArgument if the three networks do not chain through metric_dim.
  void validate() const;

  friend bool operator==(const MetricModel&, const MetricModel&) = default;
};

struct MetricGrads {
  nn::MlpGrads state_encoder, action_encoder, action_decoder;
  static MetricGrads zeros_like(const MetricModel& model);
};

struct TransitionBatch {
  Matrix states;
  Matrix actions;
  Matrix next_states;

  static TransitionBatch from(std::span<const data::Transition> transitions);
  std::size_t size() const { return static_cast<std::size_t>(states.rows()); }
};

Vector encode_state(const MetricModel& model, const Vector& state);
Matrix encode_states(const MetricModel& model, const Matrix& states);
/// f_s + Enc_a(f_s, a).
Vector predict_next_feature(const MetricModel& model, const Vector& state, const Vector& action);

/// Contrastive head: row i of `predicted` is pulled to row i of `target` and
/// pushed (hinged at `margin` in squared distance) from every other row of `target`.
nn::Var contrastive_loss(nn::Tape& tape, nn::Var predicted, nn::Var target, double margin);

/// Action head: squared reconstruction error plus max(|delta f| - margin, 0), batch-averaged.
nn::Var action_loss(nn::Tape& tape, nn::Var decoded, nn::Var action, nn::Var transition, double margin);

struct MetricLoss {
  nn::Var contrastive;
  nn::Var action;
  nn::Var total;
};

/// Records the full metric objective for one batch. `grads` may be null.
MetricLoss record_metric_loss(nn::Tape& tape, const MetricModel& model, MetricGrads* grads,
                              const TransitionBatch& batch);

struct LossValues {
  double contrastive = 0.0;
  double action = 0.0;
  double total = 0.0;
};
LossValues metric_loss(const MetricModel& model, const TransitionBatch& batch);

struct EpochLoss {
  std::size_t epoch = 0;
  double contrastive = 0.0;
  double action = 0.0;
  double total = 0.0;
};

struct MetricTrainResult {
  MetricModel model;
  std::vector<EpochLoss> curve;
  std::vector<std::pair<std::size_t, std::string>> checkpoints;  // (epoch, path)
  std::size_t steps = 0;
};

/// Adam on L_c + L_a. Initializes the model from `config.seed` and keeps
/// drawing batches from the same generator, so a seed fully determines the run.
/// Checkpoints are written every `checkpoint_every` epochs and after the final
/// epoch when `checkpoint_dir` is set.
MetricTrainResult train_metric(const data::Dataset& dataset, const MetricConfig& config,
                               const std::optional<std::string>& checkpoint_dir = std::nullopt);

nn::Checkpoint to_checkpoint(const MetricModel& model);
MetricModel from_checkpoint(const nn::Checkpoint& ckpt);
void save_model(const MetricModel& model, const std::string& path);
MetricModel load_model(const std::string& path);
/// SHA-256 of the parameter-only checkpoint encoding.
std::string model_hash(const MetricModel& model);

std::size_t steps_per_epoch(std::size_t transitions, std::size_t batch_size);

}  // namespace vmg::metric
