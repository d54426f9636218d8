#include <array>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vmg/binary_io.hpp"
#include "vmg/dataset.hpp"
#include "vmg/errors.hpp"

namespace vmg::data {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;
constexpr std::array<char, 8> kMagic = {'V', 'M', 'G', 'D', 'A', 'T', 'A', '\0'};

json vec_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector json_vec(const json& j, std::size_t dim, std::size_t line, const char* field) {
  if (!j.is_array() || j.size() != dim) {
    throw SchemaError("line " + std::to_string(line) + ": " + field + " entry must have " + std::to_string(dim) +
                      " components");
  }
  Vector v(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    if (!j[i].is_number()) throw ParseError(std::string(field) + " component is not a number", line);
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

const json& field(const json& j, const char* name, std::size_t line) {
  auto it = j.find(name);
  if (it == j.end()) throw ParseError(std::string("missing field '") + name + "'", line);
  return *it;
}

}  // namespace

std::string encode_text(const Dataset& dataset) {
  std::ostringstream out;
  json header = {{"format", "vmg-dataset"},
                 {"version", kFormatVersion},
                 {"state_dim", dataset.state_dim()},
                 {"action_dim", dataset.action_dim()},
                 {"env", dataset.metadata().env_name},
                 {"seed", dataset.metadata().generator_seed}};
  out << header.dump() << '\n';
  for (const auto& ep : dataset.episodes()) {
    json states = json::array(), actions = json::array(), rewards = json::array(), next = json::array(),
         terminals = json::array();
    for (const auto& tr : ep.transitions()) {
      states.push_back(vec_json(tr.state));
      actions.push_back(vec_json(tr.action));
      rewards.push_back(tr.reward);
      next.push_back(vec_json(tr.next_state));
      terminals.push_back(tr.terminal);
    }
    json rec = {{"states", std::move(states)},
                {"actions", std::move(actions)},
                {"rewards", std::move(rewards)},
                {"next_states", std::move(next)},
                {"terminals", std::move(terminals)}};
    out << rec.dump() << '\n';
  }
  return out.str();
}

Dataset decode_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::optional<json> header;
  std::vector<Episode> episodes;
  std::size_t sd = 0, ad = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!rec.is_object()) throw ParseError("record is not a JSON object", line_no);
    if (!header) {
      if (rec.value("format", "") != "vmg-dataset") throw ParseError("first record must be a vmg-dataset header", line_no);
      if (rec.value("version", 0) != kFormatVersion) throw SchemaError("unsupported dataset format version");
      header = rec;
      sd = field(rec, "state_dim", line_no).get<std::size_t>();
      ad = field(rec, "action_dim", line_no).get<std::size_t>();
      continue;
    }
    const auto& states = field(rec, "states", line_no);
    const auto& actions = field(rec, "actions", line_no);
    const auto& rewards = field(rec, "rewards", line_no);
    const auto& next = field(rec, "next_states", line_no);
    const auto& terminals = field(rec, "terminals", line_no);
    if (!states.is_array() || !actions.is_array() || !rewards.is_array() || !next.is_array() ||
        !terminals.is_array()) {
      throw ParseError("episode fields must be arrays", line_no);
    }
    const std::size_t n = states.size();
    if (actions.size() != n || rewards.size() != n || next.size() != n || terminals.size() != n) {
      throw ParseError("episode arrays have different lengths", line_no);
    }
    std::vector<Transition> trs;
    trs.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
      if (!rewards[t].is_number()) throw ParseError("reward is not a number", line_no);
      if (!terminals[t].is_boolean()) throw ParseError("terminal flag is not a boolean", line_no);
      trs.push_back(Transition{json_vec(states[t], sd, line_no, "states"), json_vec(actions[t], ad, line_no, "actions"),
                               rewards[t].get<double>(), json_vec(next[t], sd, line_no, "next_states"),
                               terminals[t].get<bool>()});
    }
    try {
      episodes.emplace_back(std::move(trs));
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header || episodes.empty()) throw SchemaError("no episodes");
  return Dataset(std::move(episodes), sd, ad,
                 DatasetMetadata{header->value("env", ""), header->value("seed", std::uint64_t{0})});
}

std::vector<char> encode_binary(const Dataset& dataset) {
  io::BinaryWriter w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(dataset.state_dim()));
  w.u32(static_cast<std::uint32_t>(dataset.action_dim()));
  w.string(dataset.metadata().env_name);
  w.u64(dataset.metadata().generator_seed);
  w.u32(static_cast<std::uint32_t>(dataset.episodes().size()));
  for (const auto& ep : dataset.episodes()) {
    w.u32(static_cast<std::uint32_t>(ep.size()));
    for (const auto& tr : ep.transitions()) w.f64s({tr.state.data(), static_cast<std::size_t>(tr.state.size())});
    for (const auto& tr : ep.transitions()) w.f64s({tr.action.data(), static_cast<std::size_t>(tr.action.size())});
    for (const auto& tr : ep.transitions()) w.f64(tr.reward);
    for (const auto& tr : ep.transitions()) {
      w.f64s({tr.next_state.data(), static_cast<std::size_t>(tr.next_state.size())});
    }
    for (const auto& tr : ep.transitions()) w.u8(tr.terminal ? 1 : 0);
  }
  return w.buffer();
}

Dataset decode_binary(const std::vector<char>& bytes) {
  if (bytes.empty()) throw SchemaError("no episodes");
  io::BinaryReader r(bytes);
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw ParseError("not a binary vmg dataset (bad magic)", 0);
  if (r.u32() != kFormatVersion) throw SchemaError("unsupported dataset format version");
  const std::size_t sd = r.u32();
  const std::size_t ad = r.u32();
  DatasetMetadata meta;
  meta.env_name = r.string();
  meta.generator_seed = r.u64();
  const auto count = r.u32();
  std::vector<Episode> episodes;
  for (std::uint32_t e = 0; e < count; ++e) {
    r.set_record(e + 1);
    const std::size_t n = r.u32();
    std::vector<Transition> trs(n);
    for (auto& tr : trs) {
      tr.state.resize(static_cast<Eigen::Index>(sd));
      r.f64s({tr.state.data(), sd});
    }
    for (auto& tr : trs) {
      tr.action.resize(static_cast<Eigen::Index>(ad));
      r.f64s({tr.action.data(), ad});
    }
    for (auto& tr : trs) tr.reward = r.f64();
    for (auto& tr : trs) {
      tr.next_state.resize(static_cast<Eigen::Index>(sd));
      r.f64s({tr.next_state.data(), sd});
    }
    for (auto& tr : trs) {
      const auto flag = r.u8();
      if (flag > 1) throw ParseError("terminal flag must be 0 or 1", e + 1);
      tr.terminal = flag == 1;
    }
    try {
      episodes.emplace_back(std::move(trs));
    } catch (const SchemaError& err) {
      throw SchemaError("record " + std::to_string(e + 1) + ": " + err.what());
    }
  }
  if (!r.at_end()) throw ParseError("trailing bytes after last episode", count + 1);
  if (episodes.empty()) throw SchemaError("no episodes");
  return Dataset(std::move(episodes), sd, ad, std::move(meta));
}

void save(const Dataset& dataset, const std::string& path) {
  if (ends_with(path, ".vmgd")) {
    io::write_file(path, encode_binary(dataset));
  } else {
    io::write_text_file(path, encode_text(dataset));
  }
}

Dataset load(const std::string& path) {
  const auto bytes = io::read_file(path);
  if (ends_with(path, ".vmgd")) return decode_binary(bytes);
  return decode_text(std::string(bytes.begin(), bytes.end()));
}

}  // namespace vmg::data
