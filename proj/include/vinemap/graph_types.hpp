#pragma once

#include "vinemap/geometry.hpp"
#include "vinemap/noise_model.hpp"
#include "vinemap/state.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vinemap {

enum class VarKind : std::uint8_t { kPose = 0, kVelocity = 1, kLandmark = 2 };

/// Variable identifier. Ordering is (kind, index): poses, then velocities,
/// then landmarks by creation index.
struct Key {
  VarKind kind = VarKind::kPose;
  std::int64_t index = 0;

  auto operator<=>(const Key&) const = default;
};

inline Key pose_key(std::int64_t i) { return {VarKind::kPose, i}; }
inline Key velocity_key(std::int64_t i) { return {VarKind::kVelocity, i}; }
inline Key landmark_key(std::int64_t i) { return {VarKind::kLandmark, i}; }

inline int tangent_dim(VarKind kind) { return kind == VarKind::kPose ? 6 : 3; }

std::string to_string(const Key& key);

/// Current estimates of every variable in a graph.
struct Values {
  std::map<std::int64_t, Pose> poses;
  std::map<std::int64_t, Vec3> velocities;
  std::map<std::int64_t, Vec3> landmarks;

  bool contains(const Key& key) const;
  const Pose& pose(std::int64_t i) const;
  const Vec3& velocity(std::int64_t i) const;
  const Vec3& landmark(std::int64_t i) const;
  RobotState state(std::int64_t i) const { return {pose(i), velocity(i)}; }
  std::size_t size() const { return poses.size() + velocities.size() + landmarks.size(); }
};

/// A residual over a fixed set of variables with its noise model.
/// evaluate() returns the unwhitened residual and, on request, one Jacobian
/// per key (rows = dim(), cols = tangent_dim(key.kind)). A false return means
/// the factor is inactive at this linearization point.
class Factor {
 public:
  Factor(std::vector<Key> keys, NoiseModel noise) : keys_(std::move(keys)), noise_(std::move(noise)) {}
  virtual ~Factor() = default;

  const std::vector<Key>& keys() const { return keys_; }
  const NoiseModel& noise() const { return noise_; }
  int dim() const { return noise_.dim(); }

  virtual std::string_view name() const = 0;
  virtual bool evaluate(const Values& values, Eigen::VectorXd& residual,
                        std::vector<Eigen::MatrixXd>* jacobians) const = 0;

 private:
  std::vector<Key> keys_;
  NoiseModel noise_;
};

}  // namespace vinemap
