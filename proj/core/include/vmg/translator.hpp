#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vmg/checkpoint.hpp"
#include "vmg/dataset.hpp"
#include "vmg/nn.hpp"
#include "vmg/tape.hpp"

namespace vmg::translator {

using nn::Matrix;
using nn::Vector;

struct TranslatorConfig {
  std::size_t horizon = 10;  // K
  std::size_t epochs = 800;
  std::size_t batch_size = 100;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 50;
};

/// Goal-conditioned action regressor: [s, s_target] -> a.
struct TranslatorModel {
  nn::Mlp net;
  std::size_t horizon = 10;

  static TranslatorModel create(std::size_t state_dim, std::size_t action_dim, std::size_t horizon,
                                std::mt19937_64& rng);
  std::size_t state_dim() const { return net.input_dim() / 2; }
  std::size_t action_dim() const { return net.output_dim(); }

  friend bool operator==(const TranslatorModel&, const TranslatorModel&) = default;
};

struct PairBatch {
  Matrix states;
  Matrix targets;
  Matrix actions;

  static PairBatch from(std::span<const data::TranslatorPair> pairs);
  std::size_t size() const { return static_cast<std::size_t>(states.rows()); }
};

/// Batch mean of |Tran(s, s_target) - a|^2. `grads` may be null.
nn::Var record_translator_loss(nn::Tape& tape, const TranslatorModel& model, nn::MlpGrads* grads,
                               const PairBatch& batch);
double translator_loss(const TranslatorModel& model, const PairBatch& batch);

/// Draws `batch_size` (s_t, s_t+k, a_t) pairs: a uniform transition, then k per
/// sample_translator_pair. Never touches rewards.
std::vector<data::TranslatorPair> sample_pair_batch(const data::Dataset& dataset, std::size_t batch_size,
                                                    std::size_t horizon, std::mt19937_64& rng);

Vector translate(const TranslatorModel& model, const Vector& current_state, const Vector& target_state);

struct EpochLoss {
  std::size_t epoch = 0;
  double loss = 0.0;
};

struct TranslatorTrainResult {
  TranslatorModel model;
  std::vector<EpochLoss> curve;
  std::vector<std::pair<std::size_t, std::string>> checkpoints;
  std::size_t steps = 0;
};

TranslatorTrainResult train_translator(const data::Dataset& dataset, const TranslatorConfig& config,
                                       const std::optional<std::string>& checkpoint_dir = std::nullopt);

nn::Checkpoint to_checkpoint(const TranslatorModel& model);
TranslatorModel from_checkpoint(const nn::Checkpoint& ckpt);
void save_model(const TranslatorModel& model, const std::string& path);
TranslatorModel load_model(const std::string& path);
std::string model_hash(const TranslatorModel& model);

}  // namespace vmg::translator
