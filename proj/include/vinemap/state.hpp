#pragma once

#include "vinemap/geometry.hpp"

#include <optional>
#include <string_view>

namespace vinemap {

/// Robot state at a keyframe: body-to-ENU pose and ENU linear velocity.
struct RobotState {
  Pose pose;
  Vec3 velocity = Vec3::Zero();
};

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

/// Semantic landmark class; numeric values match the detector's labels.
enum class LandmarkClass : int { kTrunk = 0, kPole = 1 };

inline constexpr LandmarkClass kAllClasses[] = {LandmarkClass::kTrunk, LandmarkClass::kPole};

std::string_view to_string(LandmarkClass c);
std::optional<LandmarkClass> parse_landmark_class(std::string_view s);
std::optional<LandmarkClass> landmark_class_from_int(int v);

}  // namespace vinemap
