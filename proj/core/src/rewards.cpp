#include "vmg/rewards.hpp"

#include <charconv>
#include <cmath>
#include <string>
#include <vector>

#include "vmg/envs.hpp"
#include "vmg/errors.hpp"

namespace vmg::rewards {

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double number(const std::string& s, std::string_view spec) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InvalidArgument("bad number '" + s + "' in reward spec '" + std::string(spec) + "'");
  }
  return v;
}

}  // namespace

data::RewardFn parse_reward_spec(std::string_view spec) {
  if (spec == "zero") {
    return [](const data::Vector&, const data::Vector&, const data::Vector&) { return 0.0; };
  }
  const std::size_t colon = spec.find(':');
  if (colon == std::string_view::npos) throw InvalidArgument("unknown reward spec: " + std::string(spec));
  const std::string_view kind = spec.substr(0, colon);
  const auto args = split(spec.substr(colon + 1), ',');

  if (kind == "maze-goal") {
    if (args.size() != 3) throw InvalidArgument("maze-goal expects X,Y,R");
    data::Vector c(2);
    c << number(args[0], spec), number(args[1], spec);
    const double r = number(args[2], spec);
    if (r <= 0.0) throw InvalidArgument("maze-goal radius must be > 0");
    return env::goal_entry_reward(c, r);
  }
  if (kind == "maze-cell") {
    if (args.size() != 3) throw InvalidArgument("maze-cell expects LAYOUT,C,R");
    const env::MazeLayout layout = args[0].ends_with(".json") ? env::MazeLayout::load(std::string(args[0]))
                                                                : env::builtin_layout(args[0]);
    const env::Cell cell{static_cast<int>(number(args[1], spec)), static_cast<int>(number(args[2], spec))};
    if (!layout.is_free(cell)) throw InvalidArgument("maze-cell target is not a free cell");
    return env::goal_entry_reward(layout.center(cell), layout.goal_radius);
  }
  if (kind == "chain-goal") {
    if (args.size() != 1) throw InvalidArgument("chain-goal expects G");
    const double g = number(args[0], spec);
    return [g](const data::Vector&, const data::Vector&, const data::Vector& s2) { return -std::abs(s2[0] - g); };
  }
  throw InvalidArgument("unknown reward spec: " + std::string(spec));
}

}  // namespace vmg::rewards
