#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vmg/adam.hpp"
#include "vmg/nn.hpp"

namespace vmg::nn {

struct NamedNet {
  std::string name;
  Mlp net;
  std::optional<AdamState> adam;
};

/// Versioned parameter container. Layout is documented in docs/formats.md.
struct Checkpoint {
  std::string kind;           // "metric" | "translator" | free-form
  std::string metadata_json;  // model-level metadata, e.g. {"metric_dim":10,"margin":1.0}
  std::vector<NamedNet> nets;

  const NamedNet& net(std::string_view name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const char> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace vmg::nn
