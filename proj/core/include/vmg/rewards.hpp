#pragma once

#include <string_view>

#include "vmg/dataset.hpp"

namespace vmg::rewards {

/// Reward functions addressable from configs and the command line:
///   zero                  every transition rewards 0
///   maze-goal:X,Y,R       1 on entering the disc of radius R around (X, Y)
///   maze-cell:LAYOUT,C,R  1 on entering the goal disc of cell (column C, row R) of a built-in layout or a layout .json file
///   chain-goal:G          -|s' - G| on a 1-D chain
/// Throws InvalidArgument on anything else.
data::RewardFn parse_reward_spec(std::string_view spec);

}  // namespace vmg::rewards
