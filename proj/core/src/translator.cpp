#include "vmg/translator.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "vmg/adam.hpp"
#include "vmg/errors.hpp"
#include "vmg/hash.hpp"
#include "vmg/metric.hpp"

namespace vmg::translator {

TranslatorModel TranslatorModel::create(std::size_t state_dim, std::size_t action_dim, std::size_t horizon,
                                        std::mt19937_64& rng) {
  if (horizon == 0) throw InvalidArgument("translator: horizon K must be >= 1");
  return {nn::Mlp::standard(2 * state_dim, action_dim, rng), horizon};
}

PairBatch PairBatch::from(std::span<const data::TranslatorPair> pairs) {
  if (pairs.empty()) throw InvalidArgument("empty translator batch");
  const auto n = static_cast<Eigen::Index>(pairs.size());
  const auto sd = pairs[0].state.size();
  const auto ad = pairs[0].action.size();
  PairBatch b{Matrix(n, sd), Matrix(n, sd), Matrix(n, ad)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    b.states.row(i) = p.state.transpose();
    b.targets.row(i) = p.target_state.transpose();
    b.actions.row(i) = p.action.transpose();
  }
  return b;
}

nn::Var record_translator_loss(nn::Tape& tape, const TranslatorModel& model, nn::MlpGrads* grads,
                               const PairBatch& batch) {
  const auto s = tape.constant(batch.states);
  const auto g = tape.constant(batch.targets);
  const auto a = tape.constant(batch.actions);
  const auto pred = tape.mlp(model.net, grads, tape.concat_cols(s, g));
  return tape.mean(tape.row_sq_norm(tape.sub(pred, a)));
}

double translator_loss(const TranslatorModel& model, const PairBatch& batch) {
  nn::Tape tape;
  return tape.scalar(record_translator_loss(tape, model, nullptr, batch));
}

std::vector<data::TranslatorPair> sample_pair_batch(const data::Dataset& dataset, std::size_t batch_size,
                                                    std::size_t horizon, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, dataset.transition_count() - 1);
  std::vector<data::TranslatorPair> pairs;
  pairs.reserve(batch_size);
  while (pairs.size() < batch_size) {
    const auto loc = dataset.locate(pick(rng));
    if (auto p = data::sample_translator_pair(dataset.episodes()[loc.episode], loc.step, horizon, rng)) {
      pairs.push_back(std::move(*p));
    }
  }
  return pairs;
}

Vector translate(const TranslatorModel& model, const Vector& current_state, const Vector& target_state) {
  if (static_cast<std::size_t>(current_state.size()) != model.state_dim() ||
      static_cast<std::size_t>(target_state.size()) != model.state_dim()) {
    throw InvalidArgument("translate: states must have " + std::to_string(model.state_dim()) + " entries");
  }
  Vector in(2 * current_state.size());
  in << current_state, target_state;
  return model.net.forward(in);
}

TranslatorTrainResult train_translator(const data::Dataset& dataset, const TranslatorConfig& config,
                                       const std::optional<std::string>& checkpoint_dir) {
  if (config.epochs == 0) throw InvalidArgument("train_translator: epochs must be >= 1");
  std::mt19937_64 rng(config.seed);
  TranslatorTrainResult result;
  result.model = TranslatorModel::create(dataset.state_dim(), dataset.action_dim(), config.horizon, rng);
  auto& model = result.model;
  auto adam = nn::AdamState::init(model.net, nn::AdamConfig{config.learning_rate});
  auto grads = nn::MlpGrads::zeros_like(model.net);
  const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);
  const std::size_t steps = metric::steps_per_epoch(dataset.transition_count(), batch_size);
  std::string last_checkpoint;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double acc = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      const auto batch = PairBatch::from(sample_pair_batch(dataset, batch_size, config.horizon, rng));
      grads.set_zero();
      nn::Tape tape;
      const auto loss = record_translator_loss(tape, model, &grads, batch);
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) {
        throw TrainingAborted("train_translator: non-finite loss at epoch " + std::to_string(epoch), last_checkpoint);
      }
      tape.backward(loss);
      try {
        nn::adam_step(model.net, grads, adam, "tran");
      } catch (const NumericFault& e) {
        throw TrainingAborted(e.what(), last_checkpoint);
      }
      acc += value;
      ++result.steps;
    }
    result.curve.push_back({epoch, acc / static_cast<double>(steps)});
    const bool cadence = config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0;
    if (checkpoint_dir && (cadence || epoch == config.epochs)) {
      auto ckpt = to_checkpoint(model);
      ckpt.nets[0].adam = adam;
      std::ostringstream name;
      name << "translator_epoch_" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
      last_checkpoint = (std::filesystem::path(*checkpoint_dir) / name.str()).string();
      nn::save_checkpoint(ckpt, last_checkpoint);
      result.checkpoints.emplace_back(epoch, last_checkpoint);
    }
  }
  return result;
}

nn::Checkpoint to_checkpoint(const TranslatorModel& model) {
  nlohmann::json meta = {{"horizon", model.horizon}};
  return nn::Checkpoint{"translator", meta.dump(), {{"tran", model.net, std::nullopt}}};
}

TranslatorModel from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.kind != "translator") throw SchemaError("checkpoint kind is '" + ckpt.kind + "', expected 'translator'");
  const auto meta = nlohmann::json::parse(ckpt.metadata_json);
  TranslatorModel m{ckpt.net("tran").net, meta.at("horizon").get<std::size_t>()};
  if (m.net.input_dim() % 2 != 0) throw SchemaError("translator input width must be even");
  return m;
}

void save_model(const TranslatorModel& model, const std::string& path) {
  nn::save_checkpoint(to_checkpoint(model), path);
}

TranslatorModel load_model(const std::string& path) { return from_checkpoint(nn::load_checkpoint(path)); }

std::string model_hash(const TranslatorModel& model) {
  const auto bytes = nn::encode_checkpoint(to_checkpoint(model));
  return sha256_hex(std::as_bytes(std::span(bytes.data(), bytes.size())));
}

}  // namespace vmg::translator
