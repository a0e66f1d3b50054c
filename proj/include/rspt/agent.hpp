#pragma once

#include <array>
#include <span>
#include <string_view>

#include "rspt/world.hpp"

namespace rspt {

/// The seven discrete actions. Integer encoding is stable and used in logs.
enum class Action : int {
    MoveForward = 0,
    TurnLeft = 1,
    TurnLeftForward = 2,
    TurnRight = 3,
    TurnRightForward = 4,
    Stop = 5,
    MoveBackward = 6,
};

inline constexpr int kActionCount = 7;

inline constexpr std::array<std::string_view, kActionCount> kActionNames = {
    "MoveForward",  "TurnLeft", "TurnLeftForward", "TurnRight",
    "TurnRightForward", "Stop", "MoveBackward",
};

inline std::string_view action_name(Action a) {
    return kActionNames[static_cast<int>(a)];
}

struct AgentState {
    Pose2 pose;
    Scalar move_speed = 0.4;  // m per step
    Scalar turn_rate = 15.0 * kPi / 180.0;  // rad per step
    Scalar radius = 0.2;
};

/// Advance an agent by one action. Rotation applies first, then translation
/// along the new heading, truncated at first contact with any obstacle, wall
/// or extra body (all inflated by the agent radius). Never interpenetrates.
AgentState step_agent(const World& world, const AgentState& state, Action action,
                      std::span<const Circle> extra_bodies = {});

}  // namespace rspt
