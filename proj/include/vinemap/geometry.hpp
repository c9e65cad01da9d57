#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>

namespace vinemap {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

Mat3 skew(const Vec3& v);

/// Right Jacobian of SO(3) and its inverse, evaluated at a tangent vector.
Mat3 so3_right_jacobian(const Vec3& omega);
Mat3 so3_right_jacobian_inverse(const Vec3& omega);

/// Unit-quaternion rotation. The quaternion is renormalized once a chain of
/// compositions grows past kRenormalizeEvery products.
class Rotation {
 public:
  static constexpr int kRenormalizeEvery = 100;

  Rotation() : q_(Eigen::Quaterniond::Identity()) {}
  explicit Rotation(const Eigen::Quaterniond& q);
  explicit Rotation(const Mat3& m);

  static Rotation identity() { return Rotation(); }
  static Rotation exp(const Vec3& omega);
  /// Z-Y-X (yaw, pitch, roll) convention, body-to-world.
  static Rotation from_rpy(double roll, double pitch, double yaw);
  static Rotation yaw(double angle) { return from_rpy(0.0, 0.0, angle); }

  Vec3 log() const;
  Vec3 rpy() const;
  double yaw_angle() const;

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }

  Rotation inverse() const;
  Rotation operator*(const Rotation& other) const;
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

  /// Right perturbation: this * exp(delta).
  Rotation retract(const Vec3& delta) const { return *this * exp(delta); }

  int chain_length() const { return chain_; }

 private:
  Eigen::Quaterniond q_;
  int chain_ = 0;
};

Rotation so3_exp(const Vec3& omega);
Vec3 so3_log(const Rotation& r);

/// Rigid-body transform (body-to-world): p_world = R * p_body + t.
class Pose {
 public:
  Pose() : translation_(Vec3::Zero()) {}
  Pose(const Rotation& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static Pose identity() { return Pose(); }
  static Pose from_matrix(const Mat4& m);

  const Rotation& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Pose operator*(const Pose& other) const;
  Pose inverse() const;
  Vec3 transform(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 inverse_transform(const Vec3& p) const;
  Mat4 matrix() const;

  /// Tangent order (rotation, translation). Rotation is perturbed on the
  /// right, translation additively in the world frame.
  Pose retract(const Eigen::Matrix<double, 6, 1>& delta) const;

 private:
  Rotation rotation_;
  Vec3 translation_;
};

/// Orthonormal basis of the tangent plane of S^2 at u (columns are orthogonal
/// to u). Built from a Householder reflection of the canonical frame so the
/// result depends on u alone.
Mat32 tangent_basis(const Vec3& u);

/// Derivative of tangent_basis(u) along coordinate axis k of u (k = 0, 1, 2),
/// holding the hemisphere branch fixed.
Mat32 tangent_basis_derivative(const Vec3& u, int k);

/// Geodetic coordinates in degrees / meters on the WGS84 ellipsoid.
struct GeodeticDatum {
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
  double altitude_m = 0.0;

  void validate() const;
  bool operator==(const GeodeticDatum&) const = default;
};

namespace wgs84 {
inline constexpr double kSemiMajor = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;
inline constexpr double kEccentricitySq = kFlattening * (2.0 - kFlattening);
}  // namespace wgs84

Vec3 geodetic_to_ecef(double lat_deg, double lon_deg, double alt_m);
GeodeticDatum ecef_to_geodetic(const Vec3& ecef);
Vec3 geodetic_to_enu(double lat_deg, double lon_deg, double alt_m, const GeodeticDatum& datum);
GeodeticDatum enu_to_geodetic(const Vec3& enu, const GeodeticDatum& datum);

/// Re-expresses an ENU point given relative to `from` in the ENU frame of `to`.
Vec3 rebase_enu(const Vec3& enu, const GeodeticDatum& from, const GeodeticDatum& to);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

}  // namespace vinemap
