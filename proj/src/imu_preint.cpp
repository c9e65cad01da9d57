#include "vinemap/imu_preint.hpp"

#include <stdexcept>

namespace vinemap {

ImuPreintegrator::ImuPreintegrator(const Vec3& gyro_bias, const Vec3& accel_bias,
                                   const ImuNoise& noise)
    : gyro_bias_(gyro_bias), accel_bias_(accel_bias), noise_(noise) {}

void ImuPreintegrator::add(const ImuSample& s) {
  if (count_ == 0) {
    last_ = s;
    count_ = 1;
    return;
  }
  const double dt = s.t - last_.t;
  if (!(dt > 0.0)) throw std::invalid_argument("preintegrate: timestamps must be strictly increasing");

  const Vec3 omega = 0.5 * (last_.angular_velocity + s.angular_velocity) - gyro_bias_;
  const Vec3 a0 = last_.linear_acceleration - accel_bias_;
  const Vec3 a1 = s.linear_acceleration - accel_bias_;

  const Rotation& r_k = delta_.delta_R;
  const Vec3 phi = omega * dt;
  const Rotation step = Rotation::exp(phi);
  const Rotation r_next = r_k * step;
  const Vec3 accel_world = 0.5 * (r_k * a0 + r_next * a1);

  const Mat3 rk = r_k.matrix();
  const Vec3 accel_body = rk.transpose() * accel_world;
  Mat9 a = Mat9::Identity();
  a.block<3, 3>(0, 0) = step.matrix().transpose();
  a.block<3, 3>(3, 0) = -rk * skew(accel_body) * dt;
  a.block<3, 3>(6, 0) = -0.5 * rk * skew(accel_body) * dt * dt;
  a.block<3, 3>(6, 3) = Mat3::Identity() * dt;

  Eigen::Matrix<double, 9, 3> b_gyro = Eigen::Matrix<double, 9, 3>::Zero();
  b_gyro.block<3, 3>(0, 0) = so3_right_jacobian(phi) * dt;
  Eigen::Matrix<double, 9, 3> b_accel = Eigen::Matrix<double, 9, 3>::Zero();
  b_accel.block<3, 3>(3, 0) = rk * dt;
  b_accel.block<3, 3>(6, 0) = 0.5 * rk * dt * dt;

  const double gyro_var = noise_.gyro_density * noise_.gyro_density / dt;
  const double accel_var = noise_.accel_density * noise_.accel_density / dt;
  delta_.covariance = a * delta_.covariance * a.transpose() +
                      gyro_var * b_gyro * b_gyro.transpose() +
                      accel_var * b_accel * b_accel.transpose();
  delta_.covariance = (0.5 * (delta_.covariance + delta_.covariance.transpose())).eval();

  delta_.delta_p += delta_.delta_v * dt + 0.5 * accel_world * dt * dt;
  delta_.delta_v += accel_world * dt;
  delta_.delta_R = r_next;
  delta_.dt_total += dt;

  last_ = s;
  ++count_;
}

PreintegratedDelta preintegrate(std::span<const ImuSample> samples, const Vec3& gyro_bias,
                                const Vec3& accel_bias, const ImuNoise& noise) {
  if (samples.empty()) throw std::invalid_argument("preintegrate: empty sample stream");
  if (samples.size() < 2) throw std::invalid_argument("preintegrate: need two samples to span an interval");
  ImuPreintegrator integrator(gyro_bias, accel_bias, noise);
  for (const ImuSample& s : samples) integrator.add(s);
  return integrator.delta();
}

PreintegratedDelta compose(const PreintegratedDelta& first, const PreintegratedDelta& second) {
  PreintegratedDelta out;
  const Mat3 r1 = first.delta_R.matrix();
  out.delta_R = first.delta_R * second.delta_R;
  out.delta_v = first.delta_v + r1 * second.delta_v;
  out.delta_p = first.delta_p + first.delta_v * second.dt_total + r1 * second.delta_p;
  out.dt_total = first.dt_total + second.dt_total;

  Mat9 a1 = Mat9::Identity();
  a1.block<3, 3>(0, 0) = second.delta_R.matrix().transpose();
  a1.block<3, 3>(3, 0) = -r1 * skew(second.delta_v);
  a1.block<3, 3>(6, 0) = -r1 * skew(second.delta_p);
  a1.block<3, 3>(6, 3) = Mat3::Identity() * second.dt_total;
  Mat9 a2 = Mat9::Identity();
  a2.block<3, 3>(3, 3) = r1;
  a2.block<3, 3>(6, 6) = r1;
  out.covariance = a1 * first.covariance * a1.transpose() + a2 * second.covariance * a2.transpose();
  out.covariance = (0.5 * (out.covariance + out.covariance.transpose())).eval();
  return out;
}

RobotState predict(const RobotState& state_i, const PreintegratedDelta& delta, const Vec3& gravity) {
  const double dt = delta.dt_total;
  const Rotation& ri = state_i.pose.rotation();
  RobotState out;
  out.pose = Pose(ri * delta.delta_R,
                  state_i.pose.translation() + state_i.velocity * dt + 0.5 * gravity * dt * dt +
                      ri * delta.delta_p);
  out.velocity = state_i.velocity + gravity * dt + ri * delta.delta_v;
  return out;
}

Vec9 imu_residual(const PreintegratedDelta& delta, const RobotState& state_i,
                  const RobotState& state_j, const Vec3& gravity, ImuJacobians* jacobians) {
  const double dt = delta.dt_total;
  const Mat3 ri_t = state_i.pose.rotation().matrix().transpose();
  const Vec3& pi = state_i.pose.translation();
  const Vec3& pj = state_j.pose.translation();
  const Vec3& vi = state_i.velocity;
  const Vec3& vj = state_j.velocity;

  const Rotation rel = delta.delta_R.inverse() * state_i.pose.rotation().inverse() * state_j.pose.rotation();
  const Vec3 r_rot = rel.log();
  const Vec3 dv_world = vj - vi - gravity * dt;
  const Vec3 dp_world = pj - pi - vi * dt - 0.5 * gravity * dt * dt;
  const Vec3 dv_body = ri_t * dv_world;
  const Vec3 dp_body = ri_t * dp_world;

  Vec9 r;
  r << r_rot, dv_body - delta.delta_v, dp_body - delta.delta_p;

  if (jacobians != nullptr) {
    const Mat3 jr_inv = so3_right_jacobian_inverse(r_rot);
    const Mat3 rj_t_ri = state_j.pose.rotation().matrix().transpose() * state_i.pose.rotation().matrix();
    ImuJacobians& j = *jacobians;
    j.pose_i.setZero();
    j.vel_i.setZero();
    j.pose_j.setZero();
    j.vel_j.setZero();

    j.pose_i.block<3, 3>(0, 0) = -jr_inv * rj_t_ri;
    j.pose_j.block<3, 3>(0, 0) = jr_inv;

    j.pose_i.block<3, 3>(3, 0) = skew(dv_body);
    j.vel_i.block<3, 3>(3, 0) = -ri_t;
    j.vel_j.block<3, 3>(3, 0) = ri_t;

    j.pose_i.block<3, 3>(6, 0) = skew(dp_body);
    j.pose_i.block<3, 3>(6, 3) = -ri_t;
    j.pose_j.block<3, 3>(6, 3) = ri_t;
    j.vel_i.block<3, 3>(6, 0) = -ri_t * dt;
  }
  return r;
}

}  // namespace vinemap
