#include "vmg/metric.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "vmg/errors.hpp"
#include "vmg/hash.hpp"

namespace vmg::metric {

MetricModel MetricModel::create(std::size_t state_dim, std::size_t action_dim, std::size_t metric_dim, double margin,
                                std::mt19937_64& rng) {
  if (state_dim == 0 || action_dim == 0 || metric_dim == 0) throw InvalidArgument("metric model: zero dimension");
  if (!(margin > 0.0)) throw InvalidArgument("metric model: margin must be > 0");
  MetricModel m;
  m.state_encoder = nn::Mlp::standard(state_dim, metric_dim, rng);
  m.action_encoder = nn::Mlp::standard(metric_dim + action_dim, metric_dim, rng);
  m.action_decoder = nn::Mlp::standard(2 * metric_dim, action_dim, rng);
  m.metric_dim = metric_dim;
  m.margin = margin;
  return m;
}

void MetricModel::validate() const {
  const auto d = metric_dim;
  if (state_encoder.output_dim() != d || action_encoder.output_dim() != d ||
      action_encoder.input_dim() != d + action_dim() || action_decoder.input_dim() != 2 * d) {
    throw InvalidArgument("metric model: networks do not chain through metric_dim " + std::to_string(d));
  }
}

MetricGrads MetricGrads::zeros_like(const MetricModel& model) {
  return {nn::MlpGrads::zeros_like(model.state_encoder), nn::MlpGrads::zeros_like(model.action_encoder),
          nn::MlpGrads::zeros_like(model.action_decoder)};
}

TransitionBatch TransitionBatch::from(std::span<const data::Transition> transitions) {
  if (transitions.empty()) throw InvalidArgument("empty transition batch");
  const auto n = static_cast<Eigen::Index>(transitions.size());
  const auto sd = transitions[0].state.size();
  const auto ad = transitions[0].action.size();
  TransitionBatch b{Matrix(n, sd), Matrix(n, ad), Matrix(n, sd)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = transitions[static_cast<std::size_t>(i)];
    if (t.state.size() != sd || t.action.size() != ad || t.next_state.size() != sd) {
      throw InvalidArgument("transition batch: mixed dimensions");
    }
    b.states.row(i) = t.state.transpose();
    b.actions.row(i) = t.action.transpose();
    b.next_states.row(i) = t.next_state.transpose();
  }
  return b;
}

Vector encode_state(const MetricModel& model, const Vector& state) { return model.state_encoder.forward(state); }

Matrix encode_states(const MetricModel& model, const Matrix& states) {
  return model.state_encoder.forward_batch(states);
}

Vector predict_next_feature(const MetricModel& model, const Vector& state, const Vector& action) {
  if (static_cast<std::size_t>(action.size()) != model.action_dim()) {
    throw InvalidArgument("predict_next_feature: action has " + std::to_string(action.size()) + " entries, expected " +
                          std::to_string(model.action_dim()));
  }
  const Vector f = encode_state(model, state);
  Vector in(f.size() + action.size());
  in << f, action;
  return f + model.action_encoder.forward(in);
}

nn::Var contrastive_loss(nn::Tape& tape, nn::Var predicted, nn::Var target, double margin) {
  if (tape.value(predicted).rows() < 2) throw InvalidArgument("contrastive_loss: batch size must be >= 2");
  const auto d2 = tape.pairwise_sq_dist(predicted, target);
  const auto positive = tape.mean(tape.diagonal(d2));
  // max(m - D^2, 0) over the off-diagonal (negative) pairs.
  const auto hinge = tape.relu(tape.affine(d2, -1.0, margin));
  const auto negative = tape.offdiag_mean(hinge);
  return tape.add(positive, negative);
}

nn::Var action_loss(nn::Tape& tape, nn::Var decoded, nn::Var action, nn::Var transition, double margin) {
  const auto recon = tape.mean(tape.row_sq_norm(tape.sub(decoded, action)));
  const auto length = tape.mean(tape.relu(tape.affine(tape.row_norm(transition), 1.0, -margin)));
  return tape.add(recon, length);
}

MetricLoss record_metric_loss(nn::Tape& tape, const MetricModel& model, MetricGrads* grads,
                              const TransitionBatch& batch) {
  if (batch.size() < 2) throw InvalidArgument("metric loss: batch size must be >= 2");
  const auto s = tape.constant(batch.states);
  const auto a = tape.constant(batch.actions);
  const auto s_next = tape.constant(batch.next_states);
  const auto f_s = tape.mlp(model.state_encoder, grads ? &grads->state_encoder : nullptr, s);
  const auto f_next = tape.mlp(model.state_encoder, grads ? &grads->state_encoder : nullptr, s_next);
  const auto delta = tape.mlp(model.action_encoder, grads ? &grads->action_encoder : nullptr, tape.concat_cols(f_s, a));
  const auto predicted = tape.add(f_s, delta);
  const auto decoded =
      tape.mlp(model.action_decoder, grads ? &grads->action_decoder : nullptr, tape.concat_cols(f_s, delta));
  const auto lc = contrastive_loss(tape, predicted, f_next, model.margin);
  const auto la = action_loss(tape, decoded, a, delta, model.margin);
  return {lc, la, tape.add(lc, la)};
}

LossValues metric_loss(const MetricModel& model, const TransitionBatch& batch) {
  nn::Tape tape;
  const auto l = record_metric_loss(tape, model, nullptr, batch);
  return {tape.scalar(l.contrastive), tape.scalar(l.action), tape.scalar(l.total)};
}

std::size_t steps_per_epoch(std::size_t transitions, std::size_t batch_size) {
  return std::max<std::size_t>(1, (transitions + batch_size - 1) / batch_size);
}

namespace {

std::string checkpoint_path(const std::string& dir, std::size_t epoch) {
  std::ostringstream name;
  name << "metric_epoch_" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
  return (std::filesystem::path(dir) / name.str()).string();
}

}  // namespace

MetricTrainResult train_metric(const data::Dataset& dataset, const MetricConfig& config,
                               const std::optional<std::string>& checkpoint_dir) {
  if (config.epochs == 0) throw InvalidArgument("train_metric: epochs must be >= 1");
  if (!(config.learning_rate > 0.0)) throw InvalidArgument("train_metric: learning_rate must be > 0");
  std::mt19937_64 rng(config.seed);
  MetricTrainResult result;
  result.model = MetricModel::create(dataset.state_dim(), dataset.action_dim(), config.metric_dim, config.margin, rng);
  auto& model = result.model;

  const nn::AdamConfig adam_cfg{config.learning_rate};
  auto adam_s = nn::AdamState::init(model.state_encoder, adam_cfg);
  auto adam_a = nn::AdamState::init(model.action_encoder, adam_cfg);
  auto adam_d = nn::AdamState::init(model.action_decoder, adam_cfg);
  auto grads = MetricGrads::zeros_like(model);

  const std::size_t batch_size = std::max<std::size_t>(2, config.batch_size);
  const std::size_t steps = steps_per_epoch(dataset.transition_count(), batch_size);
  std::string last_checkpoint;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochLoss acc{epoch};
    for (std::size_t step = 0; step < steps; ++step) {
      const auto batch = TransitionBatch::from(data::sample_transition_batch(dataset, batch_size, rng));
      grads.state_encoder.set_zero();
      grads.action_encoder.set_zero();
      grads.action_decoder.set_zero();
      nn::Tape tape;
      const auto loss = record_metric_loss(tape, model, &grads, batch);
      const double total = tape.scalar(loss.total);
      if (!std::isfinite(total)) {
        throw TrainingAborted("train_metric: non-finite loss at epoch " + std::to_string(epoch), last_checkpoint);
      }
      tape.backward(loss.total);
      try {
        nn::check_finite(grads.state_encoder, "enc_s");
        nn::check_finite(grads.action_encoder, "enc_a");
        nn::check_finite(grads.action_decoder, "dec_a");
      } catch (const NumericFault& e) {
        throw TrainingAborted(e.what(), last_checkpoint);
      }
      nn::adam_step(model.state_encoder, grads.state_encoder, adam_s, "enc_s");
      nn::adam_step(model.action_encoder, grads.action_encoder, adam_a, "enc_a");
      nn::adam_step(model.action_decoder, grads.action_decoder, adam_d, "dec_a");
      acc.contrastive += tape.scalar(loss.contrastive);
      acc.action += tape.scalar(loss.action);
      acc.total += total;
      ++result.steps;
    }
    const double inv = 1.0 / static_cast<double>(steps);
    acc.contrastive *= inv;
    acc.action *= inv;
    acc.total *= inv;
    result.curve.push_back(acc);

    const bool cadence = config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0;
    if (checkpoint_dir && (cadence || epoch == config.epochs)) {
      auto ckpt = to_checkpoint(model);
      ckpt.nets[0].adam = adam_s;
      ckpt.nets[1].adam = adam_a;
      ckpt.nets[2].adam = adam_d;
      last_checkpoint = checkpoint_path(*checkpoint_dir, epoch);
      nn::save_checkpoint(ckpt, last_checkpoint);
      result.checkpoints.emplace_back(epoch, last_checkpoint);
    }
  }
  return result;
}

nn::Checkpoint to_checkpoint(const MetricModel& model) {
  nlohmann::json meta = {{"metric_dim", model.metric_dim}, {"margin", model.margin}};
  return nn::Checkpoint{"metric",
                        meta.dump(),
                        {{"enc_s", model.state_encoder, std::nullopt},
                         {"enc_a", model.action_encoder, std::nullopt},
                         {"dec_a", model.action_decoder, std::nullopt}}};
}

MetricModel from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.kind != "metric") throw SchemaError("checkpoint kind is '" + ckpt.kind + "', expected 'metric'");
  const auto meta = nlohmann::json::parse(ckpt.metadata_json);
  MetricModel m;
  m.state_encoder = ckpt.net("enc_s").net;
  m.action_encoder = ckpt.net("enc_a").net;
  m.action_decoder = ckpt.net("dec_a").net;
  m.metric_dim = meta.at("metric_dim").get<std::size_t>();
  m.margin = meta.at("margin").get<double>();
  m.validate();
  return m;
}

void save_model(const MetricModel& model, const std::string& path) { nn::save_checkpoint(to_checkpoint(model), path); }

MetricModel load_model(const std::string& path) { return from_checkpoint(nn::load_checkpoint(path)); }

std::string model_hash(const MetricModel& model) {
  const auto bytes = nn::encode_checkpoint(to_checkpoint(model));
  return sha256_hex(std::as_bytes(std::span(bytes.data(), bytes.size())));
}

}  // namespace vmg::metric
