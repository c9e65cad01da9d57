#include "vinemap/factors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace vinemap {

namespace {

const Vec3 kGravityDown(0.0, 0.0, -1.0);

}  // namespace

BearingRange cartesian_to_bearing_range(const Vec3& p_body, const Mat3& sigma_xyz) {
  const double r = p_body.norm();
  if (!(r > 1e-9)) throw std::invalid_argument("cartesian_to_bearing_range: zero-norm point");
  BearingRange out;
  out.bearing = p_body / r;
  out.range = r;
  const Vec3& u = out.bearing;
  const Mat32 b = tangent_basis(u);
  Mat3 j;
  j.topRows<2>() = b.transpose() * (Mat3::Identity() - u * u.transpose()) / r;
  j.bottomRows<1>() = u.transpose();
  Mat3 cov = j * sigma_xyz * j.transpose();
  cov = (0.5 * (cov + cov.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  if (eig.eigenvalues().minCoeff() < kCovarianceFloor) {
    const Vec3 floored = eig.eigenvalues().cwiseMax(kCovarianceFloor);
    cov = eig.eigenvectors() * floored.asDiagonal() * eig.eigenvectors().transpose();
    cov = (0.5 * (cov + cov.transpose())).eval();
  }
  out.covariance = cov;
  return out;
}

Vec3 gps_residual(const Pose& pose, const Vec3& fix_enu, Mat36* j_pose) {
  if (j_pose != nullptr) {
    j_pose->setZero();
    j_pose->rightCols<3>() = Mat3::Identity();
  }
  return pose.translation() - fix_enu;
}

Vec2 attitude_residual(const Rotation& estimate, const Rotation& ahrs, Mat23* j_rot) {
  const Vec3 g_est = estimate.inverse() * kGravityDown;
  const Vec3 g_meas = ahrs.inverse() * kGravityDown;
  const Mat32 b = tangent_basis(g_meas.normalized());
  if (j_rot != nullptr) *j_rot = b.transpose() * skew(g_est);
  return b.transpose() * (g_est - g_meas);
}

std::optional<Vec2> heading_residual(const Rotation& estimate, double measured_yaw, Mat23* j_rot) {
  const Mat3 r = estimate.matrix();
  const Vec2 proj = r.col(0).head<2>();
  const double n = proj.norm();
  if (n < kHeadingDegenerate) return std::nullopt;
  const Vec2 h = proj / n;
  if (j_rot != nullptr) {
    const Eigen::Matrix<double, 2, 3> dproj = (-r * skew(Vec3::UnitX())).topRows<2>();
    *j_rot = (Mat2::Identity() - h * h.transpose()) / n * dproj;
  }
  return Vec2(h - Vec2(std::cos(measured_yaw), std::sin(measured_yaw)));
}

Vec2 nonholonomic_residual(const Rotation& rotation, const Vec3& velocity, Mat23* j_rot, Mat23* j_vel) {
  const Mat3 rt = rotation.matrix().transpose();
  const Vec3 vb = rt * velocity;
  if (j_rot != nullptr) *j_rot = skew(vb).bottomRows<2>();
  if (j_vel != nullptr) *j_vel = rt.bottomRows<2>();
  return vb.tail<2>();
}

std::optional<Vec3> bearing_range_residual(const Pose& pose, const Vec3& landmark, const BearingRange& meas,
                                           Mat36* j_pose, Mat3* j_landmark) {
  const Mat3 rt = pose.rotation().matrix().transpose();
  const Vec3 p = rt * (landmark - pose.translation());
  const double range = p.norm();
  if (range < kMinPredictedRange) return std::nullopt;
  const Vec3 u = p / range;
  const Mat32 b = tangent_basis(u);
  const Vec3 du = meas.bearing - u;

  Vec3 r;
  r.head<2>() = b.transpose() * du;
  r(2) = meas.range - range;

  if (j_pose != nullptr || j_landmark != nullptr) {
    Mat23 j_u;
    for (int k = 0; k < 3; ++k) {
      j_u.col(k) = tangent_basis_derivative(u, k).transpose() * du - b.transpose().col(k);
    }
    Mat3 j_p;
    j_p.topRows<2>() = j_u * (Mat3::Identity() - u * u.transpose()) / range;
    j_p.bottomRows<1>() = -u.transpose();
    if (j_pose != nullptr) {
      j_pose->leftCols<3>() = j_p * skew(p);
      j_pose->rightCols<3>() = -j_p * rt;
    }
    if (j_landmark != nullptr) *j_landmark = j_p * rt;
  }
  return r;
}

Vec3 zero_displacement_residual(const Vec3& a, const Vec3& b) { return a - b; }

Vec6 pose_prior_residual(const Pose& pose, const Pose& prior, Eigen::Matrix<double, 6, 6>* j_pose) {
  const Vec3 r_rot = (prior.rotation().inverse() * pose.rotation()).log();
  Vec6 r;
  r << r_rot, pose.translation() - prior.translation();
  if (j_pose != nullptr) {
    j_pose->setZero();
    j_pose->topLeftCorner<3, 3>() = so3_right_jacobian_inverse(r_rot);
    j_pose->bottomRightCorner<3, 3>() = Mat3::Identity();
  }
  return r;
}

PosePriorFactor::PosePriorFactor(std::int64_t pose, const Pose& prior, NoiseModel noise)
    : Factor({pose_key(pose)}, std::move(noise)), prior_(prior) {}

bool PosePriorFactor::evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const {
  Eigen::Matrix<double, 6, 6> jp;
  r = pose_prior_residual(v.pose(keys()[0].index), prior_, j ? &jp : nullptr);
  if (j) j->assign({jp});
  return true;
}

PointPriorFactor::PointPriorFactor(Key key, const Vec3& prior, NoiseModel noise)
    : Factor({key}, std::move(noise)), prior_(prior) {
  if (key.kind == VarKind::kPose) throw std::invalid_argument("PointPriorFactor needs a 3-vector variable");
}

bool PointPriorFactor::evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const {
  const Key& k = keys()[0];
  const Vec3& x = k.kind == VarKind::kVelocity ? v.velocity(k.index) : v.landmark(k.index);
  r = x - prior_;
  if (j) j->assign({Eigen::MatrixXd(Mat3::Identity())});
  return true;
}

ImuFactor::ImuFactor(std::int64_t i, std::int64_t j, PreintegratedDelta delta, const Vec3& gravity)
    : Factor({pose_key(i), velocity_key(i), pose_key(j), velocity_key(j)},
             NoiseModel::from_covariance(delta.covariance)),
      delta_(std::move(delta)),
      gravity_(gravity) {}

bool ImuFactor::evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const {
  const std::int64_t i = keys()[0].index, k = keys()[2].index;
  ImuJacobians jac;
  r = imu_residual(delta_, v.state(i), v.state(k), gravity_, j ? &jac : nullptr);
  if (j) j->assign({jac.pose_i, jac.vel_i, jac.pose_j, jac.vel_j});
  return true;
}

GpsFactor::GpsFactor(std::int64_t pose, const Vec3& fix_enu, NoiseModel noise)
    : Factor({pose_key(pose)}, std::move(noise)), fix_(fix_enu) {}

bool GpsFactor::evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const {
  Mat36 jp;
  r = gps_residual(v.pose(keys()[0].index), fix_, j ? &jp : nullptr);
  if (j) j->assign({jp});
  return true;
}

AttitudeFactor::AttitudeFactor(std::int64_t pose, const Rotation& ahrs, NoiseModel noise)
    : Factor({pose_key(pose)}, std::move(noise)), ahrs_(ahrs) {}

bool AttitudeFactor::evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const {
  Mat23 jr;
  r = attitude_residual(v.pose(keys()[0].index).rotation(), ahrs_, j ? &jr : nullptr);
  if (j) {
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(2, 6);
    full.leftCols<3>() = jr;
    j->assign({full});
  }
  return true;
}

HeadingFactor::HeadingFactor(std::int64_t pose, double yaw, NoiseModel noise)
    : Factor({pose_key(pose)}, std::move(noise)), yaw_(yaw) {}

bool HeadingFactor::evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const {
  Mat23 jr;
  const auto res = heading_residual(v.pose(keys()[0].index).rotation(), yaw_, j ? &jr : nullptr);
  if (!res) return false;
  r = *res;
  if (j) {
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(2, 6);
    full.leftCols<3>() = jr;
    j->assign({full});
  }
  return true;
}

NonholonomicFactor::NonholonomicFactor(std::int64_t keyframe, NoiseModel noise)
    : Factor({pose_key(keyframe), velocity_key(keyframe)}, std::move(noise)) {}

bool NonholonomicFactor::evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const {
  const std::int64_t k = keys()[0].index;
  Mat23 jr, jv;
  r = nonholonomic_residual(v.pose(k).rotation(), v.velocity(k), j ? &jr : nullptr, j ? &jv : nullptr);
  if (j) {
    Eigen::MatrixXd jp = Eigen::MatrixXd::Zero(2, 6);
    jp.leftCols<3>() = jr;
    j->assign({jp, Eigen::MatrixXd(jv)});
  }
  return true;
}

BearingRangeFactor::BearingRangeFactor(std::int64_t pose, std::int64_t landmark, const BearingRange& meas,
                                       const Pose& body_to_camera)
    : Factor({pose_key(pose), landmark_key(landmark)}, NoiseModel::from_covariance(meas.covariance)),
      meas_(meas),
      extrinsic_(body_to_camera) {}

bool BearingRangeFactor::evaluate(const Values& v, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* j) const {
  const Pose& body = v.pose(keys()[0].index);
  const Pose camera = body * extrinsic_;
  Mat36 jc;
  Mat3 jl;
  const auto res = bearing_range_residual(camera, v.landmark(keys()[1].index), meas_, j ? &jc : nullptr,
                                          j ? &jl : nullptr);
  if (!res) return false;
  r = *res;
  if (j) {
    // Chain through camera = body * extrinsic with right rotation perturbation.
    const Mat3 r_bc = extrinsic_.rotation().matrix();
    Eigen::Matrix<double, 6, 6> d = Eigen::Matrix<double, 6, 6>::Zero();
    d.topLeftCorner<3, 3>() = r_bc.transpose();
    d.bottomLeftCorner<3, 3>() = -body.rotation().matrix() * skew(extrinsic_.translation());
    d.bottomRightCorner<3, 3>() = Mat3::Identity();
    j->assign({Eigen::MatrixXd(jc * d), Eigen::MatrixXd(jl)});
  }
  return true;
}

ZeroDisplacementFactor::ZeroDisplacementFactor(std::int64_t a, std::int64_t b, NoiseModel noise)
    : Factor({landmark_key(a), landmark_key(b)}, std::move(noise)) {}

bool ZeroDisplacementFactor::evaluate(const Values& v, Eigen::VectorXd& r,
                                      std::vector<Eigen::MatrixXd>* j) const {
  r = zero_displacement_residual(v.landmark(keys()[0].index), v.landmark(keys()[1].index));
  if (j) j->assign({Eigen::MatrixXd(Mat3::Identity()), Eigen::MatrixXd(-Mat3::Identity())});
  return true;
}

}  // namespace vinemap
