#include "vinemap/graph_types.hpp"

#include <stdexcept>

namespace vinemap {

std::string to_string(const Key& key) {
  const char* tag = key.kind == VarKind::kPose ? "x" : key.kind == VarKind::kVelocity ? "v" : "l";
  return tag + std::to_string(key.index);
}

bool Values::contains(const Key& key) const {
  switch (key.kind) {
    case VarKind::kPose: return poses.contains(key.index);
    case VarKind::kVelocity: return velocities.contains(key.index);
    case VarKind::kLandmark: return landmarks.contains(key.index);
  }
  return false;
}

const Pose& Values::pose(std::int64_t i) const {
  auto it = poses.find(i);
  if (it == poses.end()) throw std::out_of_range("missing pose x" + std::to_string(i));
  return it->second;
}

const Vec3& Values::velocity(std::int64_t i) const {
  auto it = velocities.find(i);
  if (it == velocities.end()) throw std::out_of_range("missing velocity v" + std::to_string(i));
  return it->second;
}

const Vec3& Values::landmark(std::int64_t i) const {
  auto it = landmarks.find(i);
  if (it == landmarks.end()) throw std::out_of_range("missing landmark l" + std::to_string(i));
  return it->second;
}

}  // namespace vinemap
