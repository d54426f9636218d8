#include "vmg/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "vmg/errors.hpp"

namespace vmg::data {

bool operator==(const Transition& a, const Transition& b) {
  auto same = [](const Vector& x, const Vector& y) { return x.size() == y.size() && x == y; };
  return same(a.state, b.state) && same(a.action, b.action) && a.reward == b.reward &&
         same(a.next_state, b.next_state) && a.terminal == b.terminal;
}

Episode::Episode(std::vector<Transition> transitions) : transitions_(std::move(transitions)) {
  if (transitions_.empty()) throw SchemaError("episode has no transitions");
  const auto sd = transitions_.front().state.size();
  const auto ad = transitions_.front().action.size();
  for (std::size_t t = 0; t < transitions_.size(); ++t) {
    const auto& tr = transitions_[t];
    const std::string where = "transition " + std::to_string(t);
    if (tr.state.size() != sd || tr.next_state.size() != sd) throw SchemaError(where + ": state dimension mismatch");
    if (tr.action.size() != ad) throw SchemaError(where + ": action dimension mismatch");
    if (!tr.state.allFinite() || !tr.next_state.allFinite() || !tr.action.allFinite() || !std::isfinite(tr.reward)) {
      throw SchemaError(where + ": non-finite entry");
    }
    if (tr.terminal && t + 1 != transitions_.size()) throw SchemaError(where + ": terminal before last transition");
    if (t + 1 < transitions_.size() && tr.next_state != transitions_[t + 1].state) {
      throw SchemaError(where + ": next_state does not equal the following state (broken chain)");
    }
  }
}

const Vector& Episode::state(std::size_t i) const {
  if (i < transitions_.size()) return transitions_[i].state;
  if (i == transitions_.size()) return transitions_.back().next_state;
  throw InvalidArgument("episode state index out of range");
}

Dataset::Dataset(std::vector<Episode> episodes, std::size_t state_dim, std::size_t action_dim, DatasetMetadata metadata)
    : episodes_(std::move(episodes)), state_dim_(state_dim), action_dim_(action_dim), metadata_(std::move(metadata)) {
  if (episodes_.empty()) throw SchemaError("no episodes");
  offsets_.reserve(episodes_.size() + 1);
  offsets_.push_back(0);
  for (std::size_t e = 0; e < episodes_.size(); ++e) {
    const auto& first = episodes_[e][0];
    if (static_cast<std::size_t>(first.state.size()) != state_dim_ ||
        static_cast<std::size_t>(first.action.size()) != action_dim_) {
      throw SchemaError("episode " + std::to_string(e) + ": dimensions differ from dataset (" +
                        std::to_string(state_dim_) + ", " + std::to_string(action_dim_) + ")");
    }
    offsets_.push_back(offsets_.back() + episodes_[e].size());
  }
}

Dataset::Location Dataset::locate(std::size_t flat_index) const {
  if (flat_index >= transition_count()) throw InvalidArgument("transition index out of range");
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat_index);
  const auto e = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  return {e, flat_index - offsets_[e]};
}

const Transition& Dataset::transition(std::size_t flat_index) const {
  const auto loc = locate(flat_index);
  return episodes_[loc.episode][loc.step];
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.state_dim_ == b.state_dim_ && a.action_dim_ == b.action_dim_ && a.metadata_ == b.metadata_ &&
         a.episodes_ == b.episodes_;
}

std::vector<Transition> sample_transition_batch(const Dataset& dataset, std::size_t batch_size, std::mt19937_64& rng) {
  if (batch_size < 2) throw InvalidArgument("sample_transition_batch: batch_size must be >= 2");
  std::uniform_int_distribution<std::size_t> pick(0, dataset.transition_count() - 1);
  std::vector<Transition> batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(dataset.transition(pick(rng)));
  return batch;
}

std::optional<TranslatorPair> sample_translator_pair(const Episode& episode, std::size_t t, std::size_t horizon,
                                                     std::mt19937_64& rng) {
  if (horizon == 0) throw InvalidArgument("sample_translator_pair: horizon K must be >= 1");
  if (t >= episode.state_count()) throw InvalidArgument("sample_translator_pair: t out of range");
  const std::size_t last = episode.state_count() - 1;
  if (t == last) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(1, horizon);
  const std::size_t k = std::min(pick(rng), last - t);
  return TranslatorPair{episode.state(t), episode.state(t + k), episode[t].action, k};
}

Dataset relabel_rewards(const Dataset& dataset, const RewardFn& reward_fn) {
  std::vector<Episode> episodes;
  episodes.reserve(dataset.episodes().size());
  std::size_t flat = 0;
  for (const auto& ep : dataset.episodes()) {
    std::vector<Transition> trs = ep.transitions();
    for (auto& tr : trs) {
      const double r = reward_fn(tr.state, tr.action, tr.next_state);
      if (!std::isfinite(r)) {
        throw NumericFault("relabel_rewards: non-finite reward at transition " + std::to_string(flat));
      }
      tr.reward = r;
      ++flat;
    }
    episodes.emplace_back(std::move(trs));
  }
  return Dataset(std::move(episodes), dataset.state_dim(), dataset.action_dim(), dataset.metadata());
}

}  // namespace vmg::data
