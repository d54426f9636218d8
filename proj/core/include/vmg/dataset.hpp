#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace vmg::data {

using Vector = Eigen::VectorXd;

struct Transition {
  Vector state;
  Vector action;
  double reward = 0.0;
  Vector next_state;
  bool terminal = false;

  friend bool operator==(const Transition& a, const Transition& b);
};

/// Ordered transitions where next_state[t] == state[t+1] exactly.
///
/// The state chain has size()+1 entries: state(t) for t < size() is the
/// transition's source and state(size()) is the final next_state.
class Episode {
 public:
  /// Throws SchemaError on broken chaining, mixed dimensions, non-finite
  /// entries, or a terminal flag before the last transition.
  explicit Episode(std::vector<Transition> transitions);

  std::size_t size() const { return transitions_.size(); }
  std::size_t state_count() const { return transitions_.size() + 1; }
  const Transition& operator[](std::size_t t) const { return transitions_[t]; }
  const Vector& state(std::size_t i) const;
  const std::vector<Transition>& transitions() const { return transitions_; }

  friend bool operator==(const Episode&, const Episode&) = default;

 private:
  std::vector<Transition> transitions_;
};

struct DatasetMetadata {
  std::string env_name;
  std::uint64_t generator_seed = 0;
  friend bool operator==(const DatasetMetadata&, const DatasetMetadata&) = default;
};

/// Immutable collection of episodes sharing state/action dimensions.
class Dataset {
 public:
  Dataset(std::vector<Episode> episodes, std::size_t state_dim, std::size_t action_dim, DatasetMetadata metadata = {});

  const std::vector<Episode>& episodes() const { return episodes_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  const DatasetMetadata& metadata() const { return metadata_; }

  std::size_t transition_count() const { return offsets_.back(); }
  std::size_t state_count() const { return transition_count() + episodes_.size(); }

  struct Location {
    std::size_t episode;
    std::size_t step;
  };
  Location locate(std::size_t flat_index) const;
  const Transition& transition(std::size_t flat_index) const;

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  std::vector<Episode> episodes_;
  std::size_t state_dim_;
  std::size_t action_dim_;
  DatasetMetadata metadata_;
  std::vector<std::size_t> offsets_;  // prefix sums of episode sizes
};

/// Uniform with replacement over all transitions. batch_size must be >= 2.
std::vector<Transition> sample_transition_batch(const Dataset& dataset, std::size_t batch_size, std::mt19937_64& rng);

struct TranslatorPair {
  Vector state;
  Vector target_state;
  Vector action;
  std::size_t k = 0;
};

/// Draws k ~ U{1..K} clamped to the last state of the chain. Returns nullopt
/// when t is the final state (no future state and no action to regress).
std::optional<TranslatorPair> sample_translator_pair(const Episode& episode, std::size_t t, std::size_t horizon,
                                                     std::mt19937_64& rng);

using RewardFn = std::function<double(const Vector& state, const Vector& action, const Vector& next_state)>;

/// New dataset with rewards replaced by reward_fn; throws NumericFault naming
/// the flat transition index of the first non-finite reward.
Dataset relabel_rewards(const Dataset& dataset, const RewardFn& reward_fn);

// --- persistence (format in docs/formats.md) ---

/// Text (JSON lines) unless the path ends in ".vmgd", which selects the binary variant.
void save(const Dataset& dataset, const std::string& path);
Dataset load(const std::string& path);

std::string encode_text(const Dataset& dataset);
Dataset decode_text(const std::string& text);
std::vector<char> encode_binary(const Dataset& dataset);
Dataset decode_binary(const std::vector<char>& bytes);

}  // namespace vmg::data
