#include "vinemap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vinemap {

namespace {

constexpr double kSmallAngle = 1e-8;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

Mat3 ecef_to_enu_rotation(double lat_rad, double lon_rad) {
  const double sl = std::sin(lat_rad), cl = std::cos(lat_rad);
  const double so = std::sin(lon_rad), co = std::cos(lon_rad);
  Mat3 r;
  r << -so, co, 0.0,
       -sl * co, -sl * so, cl,
        cl * co, cl * so, sl;
  return r;
}

}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 so3_right_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  if (theta < 1e-5) {
    return Mat3::Identity() - 0.5 * w + (1.0 / 6.0) * w * w;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() - (1.0 - std::cos(theta)) / t2 * w +
         (theta - std::sin(theta)) / (t2 * theta) * w * w;
}

Mat3 so3_right_jacobian_inverse(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  if (theta < 1e-5) {
    return Mat3::Identity() + 0.5 * w + (1.0 / 12.0) * w * w;
  }
  const double coeff =
      1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Mat3::Identity() + 0.5 * w + coeff * w * w;
}

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) {}

Rotation::Rotation(const Mat3& m) : q_(Eigen::Quaterniond(m).normalized()) {}

Rotation Rotation::exp(const Vec3& omega) {
  const double theta = omega.norm();
  Eigen::Quaterniond q;
  if (theta < kSmallAngle) {
    q = Eigen::Quaterniond(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z());
  } else {
    const double half = 0.5 * theta;
    const Vec3 axis = omega / theta;
    const double s = std::sin(half);
    q = Eigen::Quaterniond(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
  }
  return Rotation(q);
}

Rotation Rotation::from_rpy(double roll, double pitch, double yaw) {
  const Eigen::Quaterniond q = Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
                               Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                               Eigen::AngleAxisd(roll, Vec3::UnitX());
  return Rotation(q);
}

Vec3 Rotation::log() const {
  Eigen::Quaterniond q = q_;
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double n = v.norm();
  if (n < kSmallAngle) {
    return 2.0 * v / q.w();
  }
  const double theta = 2.0 * std::atan2(n, q.w());
  return theta * v / n;
}

Vec3 Rotation::rpy() const {
  const Mat3 r = matrix();
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

double Rotation::yaw_angle() const { return rpy().z(); }

Rotation Rotation::inverse() const {
  Rotation r;
  r.q_ = q_.conjugate();
  r.chain_ = chain_;
  return r;
}

Rotation Rotation::operator*(const Rotation& other) const {
  Rotation r;
  r.q_ = q_ * other.q_;
  r.chain_ = chain_ + other.chain_ + 1;
  if (r.chain_ > kRenormalizeEvery) {
    r.q_.normalize();
    r.chain_ = 0;
  }
  return r;
}

Rotation so3_exp(const Vec3& omega) { return Rotation::exp(omega); }
Vec3 so3_log(const Rotation& r) { return r.log(); }

Pose Pose::from_matrix(const Mat4& m) {
  return Pose(Rotation(Mat3(m.topLeftCorner<3, 3>())), m.topRightCorner<3, 1>());
}

Pose Pose::operator*(const Pose& other) const {
  return Pose(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
}

Pose Pose::inverse() const {
  const Rotation rinv = rotation_.inverse();
  return Pose(rinv, -(rinv * translation_));
}

Vec3 Pose::inverse_transform(const Vec3& p) const {
  return rotation_.inverse() * (p - translation_);
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_.matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Pose Pose::retract(const Eigen::Matrix<double, 6, 1>& delta) const {
  return Pose(rotation_.retract(delta.head<3>()), translation_ + delta.tail<3>());
}

namespace {

// Householder vector for the hemisphere containing u. For u_z >= 0 the
// reflection sends e_z to -u, otherwise to +u; either way the first two
// reflected axes span the tangent plane at u.
Vec3 householder_vector(const Vec3& u, double* sign) {
  *sign = u.z() >= 0.0 ? 1.0 : -1.0;
  return Vec3::UnitZ() + *sign * u;
}

}  // namespace

Mat32 tangent_basis(const Vec3& u) {
  const double n = u.norm();
  if (!(n > 1e-12)) throw std::invalid_argument("tangent_basis: zero vector");
  if (std::abs(n - 1.0) > 1e-6) throw std::invalid_argument("tangent_basis: vector is not unit length");
  double sign = 0.0;
  const Vec3 w = householder_vector(u, &sign);
  const Mat3 h = Mat3::Identity() - 2.0 * w * w.transpose() / w.squaredNorm();
  return h.leftCols<2>();
}

Mat32 tangent_basis_derivative(const Vec3& u, int k) {
  double sign = 0.0;
  const Vec3 w = householder_vector(u, &sign);
  const Vec3 dw = sign * Vec3::Unit(k);
  const double s = w.squaredNorm();
  const double ds = 2.0 * w.dot(dw);
  const Mat3 outer = dw * w.transpose() + w * dw.transpose();
  const Mat3 dh = -2.0 * (outer / s - w * w.transpose() * ds / (s * s));
  return dh.leftCols<2>();
}

void GeodeticDatum::validate() const {
  if (!std::isfinite(latitude_deg) || std::abs(latitude_deg) > 90.0)
    throw std::invalid_argument("datum latitude outside [-90, 90]");
  if (!std::isfinite(longitude_deg) || std::abs(longitude_deg) > 180.0)
    throw std::invalid_argument("datum longitude outside [-180, 180]");
  if (!std::isfinite(altitude_m)) throw std::invalid_argument("datum altitude not finite");
}

Vec3 geodetic_to_ecef(double lat_deg, double lon_deg, double alt_m) {
  const double lat = deg2rad(lat_deg), lon = deg2rad(lon_deg);
  const double sl = std::sin(lat);
  const double n = wgs84::kSemiMajor / std::sqrt(1.0 - wgs84::kEccentricitySq * sl * sl);
  const double cl = std::cos(lat);
  return {(n + alt_m) * cl * std::cos(lon), (n + alt_m) * cl * std::sin(lon),
          (n * (1.0 - wgs84::kEccentricitySq) + alt_m) * sl};
}

GeodeticDatum ecef_to_geodetic(const Vec3& ecef) {
  const double e2 = wgs84::kEccentricitySq;
  const double p = std::hypot(ecef.x(), ecef.y());
  const double lon = std::atan2(ecef.y(), ecef.x());
  if (p < 1e-9) {
    const double b = wgs84::kSemiMajor * (1.0 - wgs84::kFlattening);
    return {ecef.z() >= 0.0 ? 90.0 : -90.0, 0.0, std::abs(ecef.z()) - b};
  }
  double lat = std::atan2(ecef.z(), p * (1.0 - e2));
  double h = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double sl = std::sin(lat);
    const double n = wgs84::kSemiMajor / std::sqrt(1.0 - e2 * sl * sl);
    h = p / std::cos(lat) - n;
    lat = std::atan2(ecef.z(), p * (1.0 - e2 * n / (n + h)));
  }
  return {rad2deg(lat), rad2deg(lon), h};
}

Vec3 geodetic_to_enu(double lat_deg, double lon_deg, double alt_m, const GeodeticDatum& datum) {
  const Vec3 origin = geodetic_to_ecef(datum.latitude_deg, datum.longitude_deg, datum.altitude_m);
  const Vec3 p = geodetic_to_ecef(lat_deg, lon_deg, alt_m);
  return ecef_to_enu_rotation(deg2rad(datum.latitude_deg), deg2rad(datum.longitude_deg)) * (p - origin);
}

GeodeticDatum enu_to_geodetic(const Vec3& enu, const GeodeticDatum& datum) {
  const Vec3 origin = geodetic_to_ecef(datum.latitude_deg, datum.longitude_deg, datum.altitude_m);
  const Mat3 r = ecef_to_enu_rotation(deg2rad(datum.latitude_deg), deg2rad(datum.longitude_deg));
  return ecef_to_geodetic(origin + r.transpose() * enu);
}

Vec3 rebase_enu(const Vec3& enu, const GeodeticDatum& from, const GeodeticDatum& to) {
  if (from == to) return enu;
  const GeodeticDatum g = enu_to_geodetic(enu, from);
  return geodetic_to_enu(g.latitude_deg, g.longitude_deg, g.altitude_m, to);
}

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

}  // namespace vinemap
