#pragma once

#include "vinemap/graph_types.hpp"
#include "vinemap/imu_preint.hpp"

#include <optional>

namespace vinemap {

using Mat36 = Eigen::Matrix<double, 3, 6>;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Direction and distance of a point in the body frame, with covariance
/// ordered (tangent_1, tangent_2, range). Tangent axes are tangent_basis(bearing).
struct BearingRange {
  Vec3 bearing = Vec3::UnitX();
  double range = 1.0;
  Mat3 covariance = Mat3::Identity();
};

/// Converts a body-frame point and its Cartesian covariance. The propagated
/// covariance is symmetrized and its eigenvalues floored at kCovarianceFloor.
inline constexpr double kCovarianceFloor = 1e-8;
BearingRange cartesian_to_bearing_range(const Vec3& p_body, const Mat3& sigma_xyz);

// Residual functions. Pose Jacobians are with respect to the tangent
// (rotation on the right, translation additive in ENU).

Vec3 gps_residual(const Pose& pose, const Vec3& fix_enu, Mat36* j_pose = nullptr);

/// Roll/pitch constraint: compares gravity seen in the body frame by the
/// estimate and by the AHRS, projected on the tangent plane of the latter.
Vec2 attitude_residual(const Rotation& estimate, const Rotation& ahrs, Mat23* j_rot = nullptr);

/// Wrap-free heading constraint on the horizontal part of the body x-axis.
/// Returns nullopt when that projection is shorter than kHeadingDegenerate.
inline constexpr double kHeadingDegenerate = 0.1;
std::optional<Vec2> heading_residual(const Rotation& estimate, double measured_yaw,
                                     Mat23* j_rot = nullptr);

/// Lateral and vertical body-frame velocity.
Vec2 nonholonomic_residual(const Rotation& rotation, const Vec3& velocity, Mat23* j_rot = nullptr,
                           Mat23* j_vel = nullptr);

/// Returns nullopt when the predicted range is below kMinPredictedRange.
inline constexpr double kMinPredictedRange = 1e-3;
std::optional<Vec3> bearing_range_residual(const Pose& pose, const Vec3& landmark,
                                           const BearingRange& meas, Mat36* j_pose = nullptr,
                                           Mat3* j_landmark = nullptr);

Vec3 zero_displacement_residual(const Vec3& a, const Vec3& b);

Vec6 pose_prior_residual(const Pose& pose, const Pose& prior, Eigen::Matrix<double, 6, 6>* j_pose = nullptr);

// Graph factors wrapping the residuals above.

class PosePriorFactor final : public Factor {
 public:
  PosePriorFactor(std::int64_t pose, const Pose& prior, NoiseModel noise);
  std::string_view name() const override { return "pose_prior"; }
  bool evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const override;

 private:
  Pose prior_;
};

/// Prior on a velocity or landmark (3-vector variable).
class PointPriorFactor final : public Factor {
 public:
  PointPriorFactor(Key key, const Vec3& prior, NoiseModel noise);
  std::string_view name() const override { return "point_prior"; }
  bool evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const override;

 private:
  Vec3 prior_;
};

class ImuFactor final : public Factor {
 public:
  /// Noise comes from the delta's propagated covariance.
  ImuFactor(std::int64_t i, std::int64_t j, PreintegratedDelta delta, const Vec3& gravity);
  std::string_view name() const override { return "imu"; }
  bool evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const override;
  const PreintegratedDelta& delta() const { return delta_; }

 private:
  PreintegratedDelta delta_;
  Vec3 gravity_;
};

class GpsFactor final : public Factor {
 public:
  GpsFactor(std::int64_t pose, const Vec3& fix_enu, NoiseModel noise);
  std::string_view name() const override { return "gps"; }
  bool evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const override;

 private:
  Vec3 fix_;
};

class AttitudeFactor final : public Factor {
 public:
  AttitudeFactor(std::int64_t pose, const Rotation& ahrs, NoiseModel noise);
  std::string_view name() const override { return "attitude"; }
  bool evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const override;

 private:
  Rotation ahrs_;
};

class HeadingFactor final : public Factor {
 public:
  HeadingFactor(std::int64_t pose, double yaw, NoiseModel noise);
  std::string_view name() const override { return "heading"; }
  bool evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const override;

 private:
  double yaw_;
};

class NonholonomicFactor final : public Factor {
 public:
  NonholonomicFactor(std::int64_t keyframe, NoiseModel noise);
  std::string_view name() const override { return "nonholonomic"; }
  bool evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const override;
};

/// Observation of a landmark in the camera frame. `body_to_camera` is the
/// fixed extrinsic (camera pose in the body frame).
class BearingRangeFactor final : public Factor {
 public:
  BearingRangeFactor(std::int64_t pose, std::int64_t landmark, const BearingRange& meas,
                     const Pose& body_to_camera = Pose());
  std::string_view name() const override { return "bearing_range"; }
  bool evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const override;
  const BearingRange& measurement() const { return meas_; }
  const Pose& extrinsic() const { return extrinsic_; }

 private:
  BearingRange meas_;
  Pose extrinsic_;
};

class ZeroDisplacementFactor final : public Factor {
 public:
  ZeroDisplacementFactor(std::int64_t a, std::int64_t b, NoiseModel noise);
  std::string_view name() const override { return "zero_displacement"; }
  bool evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const override;
};

}  // namespace vinemap
