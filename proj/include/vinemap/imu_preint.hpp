#pragma once

#include "vinemap/geometry.hpp"
#include "vinemap/state.hpp"

#include <span>

namespace vinemap {

struct ImuSample {
  double t = 0.0;                         ///< seconds
  Vec3 angular_velocity = Vec3::Zero();   ///< rad/s, body frame
  Vec3 linear_acceleration = Vec3::Zero();///< specific force, m/s^2, body frame
};

/// Continuous-time white-noise densities of the gyro (rad/s/sqrt(Hz)) and
/// accelerometer (m/s^2/sqrt(Hz)).
struct ImuNoise {
  double gyro_density = 1.7e-4;
  double accel_density = 2.0e-3;
};

/// Relative motion between two keyframes expressed in the first keyframe's
/// body frame. Covariance blocks are ordered (rotation, velocity, position).
struct PreintegratedDelta {
  Rotation delta_R;
  Vec3 delta_v = Vec3::Zero();
  Vec3 delta_p = Vec3::Zero();
  double dt_total = 0.0;
  Mat9 covariance = Mat9::Zero();
};

/// Accumulates bias-corrected samples with midpoint integration. The biases
/// are calibration constants; they are not estimated.
class ImuPreintegrator {
 public:
  ImuPreintegrator(const Vec3& gyro_bias, const Vec3& accel_bias, const ImuNoise& noise);

  /// Integrates the interval between the previously added sample and `s`.
  /// The first call only records the starting sample.
  void add(const ImuSample& s);

  const PreintegratedDelta& delta() const { return delta_; }
  std::size_t sample_count() const { return count_; }

 private:
  Vec3 gyro_bias_;
  Vec3 accel_bias_;
  ImuNoise noise_;
  PreintegratedDelta delta_;
  ImuSample last_;
  std::size_t count_ = 0;
};

/// Preintegrates a full stream. Needs at least two samples so the interval
/// has non-zero length; throws std::invalid_argument on an empty/short
/// stream or non-increasing timestamps.
PreintegratedDelta preintegrate(std::span<const ImuSample> samples, const Vec3& gyro_bias,
                                const Vec3& accel_bias, const ImuNoise& noise);

/// Concatenates the deltas of two consecutive intervals (first, then second).
PreintegratedDelta compose(const PreintegratedDelta& first, const PreintegratedDelta& second);

/// Predicts state_j from state_i and the delta.
RobotState predict(const RobotState& state_i, const PreintegratedDelta& delta, const Vec3& gravity);

/// Jacobians of the 9-vector residual (rotation, velocity, position) with
/// respect to the pose tangent (rotation, translation) and velocities.
struct ImuJacobians {
  Eigen::Matrix<double, 9, 6> pose_i;
  Eigen::Matrix<double, 9, 3> vel_i;
  Eigen::Matrix<double, 9, 6> pose_j;
  Eigen::Matrix<double, 9, 3> vel_j;
};

Vec9 imu_residual(const PreintegratedDelta& delta, const RobotState& state_i,
                  const RobotState& state_j, const Vec3& gravity,
                  ImuJacobians* jacobians = nullptr);

}  // namespace vinemap
