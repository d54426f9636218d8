#include "vmg/checkpoint.hpp"

#include <array>
#include <cstring>

#include "vmg/binary_io.hpp"
#include "vmg/errors.hpp"

namespace vmg::nn {
namespace {

constexpr std::array<char, 8> kMagic = {'V', 'M', 'G', 'C', 'K', 'P', 'T', '\0'};

void write_moments(io::BinaryWriter& w, const MlpGrads& g) {
  for (std::size_t i = 0; i < g.weight.size(); ++i) {
    w.f64s({g.weight[i].data(), static_cast<std::size_t>(g.weight[i].size())});
    w.f64s({g.bias[i].data(), static_cast<std::size_t>(g.bias[i].size())});
  }
}

void read_moments(io::BinaryReader& r, MlpGrads& g) {
  for (std::size_t i = 0; i < g.weight.size(); ++i) {
    r.f64s({g.weight[i].data(), static_cast<std::size_t>(g.weight[i].size())});
    r.f64s({g.bias[i].data(), static_cast<std::size_t>(g.bias[i].size())});
  }
}

}  // namespace

const NamedNet& Checkpoint::net(std::string_view name) const {
  for (const auto& n : nets) {
    if (n.name == name) return n;
  }
  throw SchemaError("checkpoint has no network named '" + std::string(name) + "'");
}

std::vector<char> encode_checkpoint(const Checkpoint& ckpt) {
  io::BinaryWriter w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  w.string(ckpt.kind);
  w.string(ckpt.metadata_json);
  w.u32(static_cast<std::uint32_t>(ckpt.nets.size()));
  for (const auto& n : ckpt.nets) {
    w.string(n.name);
    const auto layers = n.net.layers();
    w.u32(static_cast<std::uint32_t>(layers.size()));
    for (const auto& l : layers) {
      w.u32(static_cast<std::uint32_t>(l.weight.rows()));
      w.u32(static_cast<std::uint32_t>(l.weight.cols()));
      w.u8(static_cast<std::uint8_t>(l.activation));
      w.f64s({l.weight.data(), static_cast<std::size_t>(l.weight.size())});
      w.f64s({l.bias.data(), static_cast<std::size_t>(l.bias.size())});
    }
    w.u8(n.adam ? 1 : 0);
    if (n.adam) {
      w.i64(n.adam->step_count);
      w.f64(n.adam->config.learning_rate);
      w.f64(n.adam->config.beta1);
      w.f64(n.adam->config.beta2);
      w.f64(n.adam->config.epsilon);
      write_moments(w, n.adam->first_moment);
      write_moments(w, n.adam->second_moment);
    }
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(std::span<const char> bytes) {
  io::BinaryReader r(bytes);
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw ParseError("not a checkpoint file (bad magic)", 0);
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw SchemaError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.kind = r.string();
  ckpt.metadata_json = r.string();
  const auto count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    r.set_record(k + 1);
    NamedNet n;
    n.name = r.string();
    const auto layer_count = r.u32();
    if (layer_count == 0 || layer_count > 64) throw ParseError("implausible layer count", k + 1);
    std::vector<DenseLayer> layers;
    for (std::uint32_t i = 0; i < layer_count; ++i) {
      const auto rows = r.u32();
      const auto cols = r.u32();
      const auto act = r.u8();
      if (act > 1) throw ParseError("unknown activation code", k + 1);
      if (static_cast<std::uint64_t>(rows) * cols > (std::uint64_t{1} << 28)) throw ParseError("layer too large", k + 1);
      DenseLayer l;
      l.weight.resize(rows, cols);
      l.bias.resize(rows);
      l.activation = static_cast<Activation>(act);
      r.f64s({l.weight.data(), static_cast<std::size_t>(l.weight.size())});
      r.f64s({l.bias.data(), static_cast<std::size_t>(l.bias.size())});
      layers.push_back(std::move(l));
    }
    n.net = Mlp(std::move(layers));
    if (r.u8() == 1) {
      AdamConfig cfg;
      const auto steps = r.i64();
      cfg.learning_rate = r.f64();
      cfg.beta1 = r.f64();
      cfg.beta2 = r.f64();
      cfg.epsilon = r.f64();
      AdamState st = AdamState::init(n.net, cfg);
      st.step_count = steps;
      read_moments(r, st.first_moment);
      read_moments(r, st.second_moment);
      n.adam = std::move(st);
    }
    ckpt.nets.push_back(std::move(n));
  }
  if (!r.at_end()) throw ParseError("trailing bytes after checkpoint", count + 1);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const auto bytes = encode_checkpoint(ckpt);
  io::write_file(path, bytes);
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace vmg::nn
