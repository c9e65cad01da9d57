#include "vinemap/factors.hpp"
#include "vinemap/solver.hpp"

#include "support/numeric.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace vinemap;
using vinemap::testing::max_jacobian_error;
using vinemap::testing::random_pose;
using vinemap::testing::random_rotation;
using vinemap::testing::random_vec;

namespace {

constexpr double kPi = std::numbers::pi;

Mat3 monte_carlo_bearing_range_cov(const Vec3& p, const Mat3& sigma, int n, std::uint64_t seed) {
  const BearingRange nominal = cartesian_to_bearing_range(p, sigma);
  const Mat32 b = tangent_basis(nominal.bearing);
  const Eigen::LLT<Mat3> llt(sigma);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Mat3 acc = Mat3::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec3 q = p + llt.matrixL() * Vec3(g(rng), g(rng), g(rng));
    Vec3 e;
    e.head<2>() = b.transpose() * (q.normalized() - nominal.bearing);
    e(2) = q.norm() - nominal.range;
    acc += e * e.transpose();
  }
  return acc / n;
}

}  // namespace

TEST(BearingRange, AxisPointClosedForm) {
  const double s = 0.05;
  const BearingRange br = cartesian_to_bearing_range(Vec3(0, 0, 2), s * s * Mat3::Identity());
  EXPECT_LT((br.bearing - Vec3::UnitZ()).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(br.range, 2.0);
  const Mat3 expected = Vec3(s * s / 4, s * s / 4, s * s).asDiagonal();
  EXPECT_LT((br.covariance - expected).norm(), 1e-15);
  const Mat3 mc = monte_carlo_bearing_range_cov(Vec3(0, 0, 2), s * s * Mat3::Identity(), 100000, 1);
  EXPECT_LT((mc - br.covariance).norm() / br.covariance.norm(), 0.05);
}

TEST(BearingRange, ThreeFourFive) {
  const BearingRange br = cartesian_to_bearing_range(Vec3(3, 4, 0), 1e-4 * Mat3::Identity());
  EXPECT_DOUBLE_EQ(br.range, 5.0);
  EXPECT_LT((br.bearing - Vec3(0.6, 0.8, 0)).norm(), 1e-15);
}

TEST(BearingRange, RegularizesNearlySymmetricInput) {
  Mat3 sigma = 1e-12 * Mat3::Identity();
  sigma(0, 1) = 1e-13;
  sigma(1, 0) = 1e-13 + 1e-20;
  const BearingRange br = cartesian_to_bearing_range(Vec3(0.5, 0.2, 3.0), sigma);
  EXPECT_EQ(br.covariance, br.covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(br.covariance);
  EXPECT_GE(eig.eigenvalues().minCoeff(), 1e-8 * (1 - 1e-9));
}

TEST(BearingRange, RejectsZeroPoint) {
  EXPECT_THROW(cartesian_to_bearing_range(Vec3::Zero(), Mat3::Identity()), std::invalid_argument);
}

TEST(BearingRange, CovariancePositiveDefinite) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p = random_vec(rng, 3.0) + Vec3(0, 0, 4);
    const Eigen::Matrix3d a = Eigen::Matrix3d::Random() * 0.05;
    const BearingRange br = cartesian_to_bearing_range(p, a * a.transpose());
    Eigen::SelfAdjointEigenSolver<Mat3> eig(br.covariance);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(GpsResidual, Values) {
  const Pose x(Rotation::from_rpy(0.1, 0.2, 0.3), Vec3(1, 2, 3));
  EXPECT_LT(gps_residual(x, Vec3(1, 2, 3)).norm(), 1e-15);
  EXPECT_LT((gps_residual(x, Vec3(0, 2, 3)) - Vec3(1, 0, 0)).norm(), 1e-15);
}

TEST(AttitudeResidual, Values) {
  const Rotation ahrs = Rotation::from_rpy(0.05, -0.1, 1.2);
  EXPECT_LT(attitude_residual(ahrs, ahrs).norm(), 1e-15);
  EXPECT_LT(attitude_residual(Rotation::yaw(37.0 * kPi / 180.0) * ahrs, ahrs).norm(), 1e-15);
  const Rotation level = Rotation::yaw(1.2);
  const Rotation pitched = level * Rotation::exp(Vec3(0, 0.1, 0));
  EXPECT_NEAR(attitude_residual(pitched, level).norm(), std::sin(0.1), 1e-12);
}

TEST(AttitudeResidual, YawInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> yaw(-kPi, kPi);
  for (int i = 0; i < 1000; ++i) {
    const Rotation est = random_rotation(rng, 0.3), ahrs = random_rotation(rng, 0.3);
    const Vec2 base = attitude_residual(est, ahrs);
    const Vec2 shifted = attitude_residual(Rotation::yaw(yaw(rng)) * est, ahrs);
    EXPECT_LT((base - shifted).norm(), 1e-12);
  }
}

TEST(HeadingResidual, Values) {
  EXPECT_LT(heading_residual(Rotation::yaw(0.7), 0.7)->norm(), 1e-15);
  const double eps = 1e-3;
  EXPECT_NEAR(heading_residual(Rotation::yaw(kPi - eps), -kPi + eps)->norm(), 2 * eps, 1e-9);
  const double yaw = 0.4;
  const Vec2 r = *heading_residual(Rotation::yaw(yaw + kPi), yaw);
  EXPECT_LT((r - Vec2(-2 * std::cos(yaw), -2 * std::sin(yaw))).norm(), 1e-12);
  EXPECT_NEAR(r.norm(), 2.0, 1e-12);
}

TEST(HeadingResidual, ContinuousAcrossWrap) {
  for (double m : {-2.0, 0.0, 1.0, 3.0}) {
    const Vec2 a = *heading_residual(Rotation::yaw(kPi - 1e-7), m);
    const Vec2 b = *heading_residual(Rotation::yaw(-kPi + 1e-7), m);
    EXPECT_LT((a - b).norm(), 1e-6);
  }
}

TEST(HeadingResidual, DegenerateWhenXAxisVertical) {
  EXPECT_FALSE(heading_residual(Rotation::from_rpy(0.0, kPi / 2, 0.0), 0.0).has_value());
}

TEST(NonholonomicResidual, Values) {
  const Rotation r = Rotation::from_rpy(0.02, 0.03, 2.0);
  EXPECT_LT(nonholonomic_residual(r, r * Vec3(0.8, 0, 0)).norm(), 1e-15);
  const Vec2 slip = nonholonomic_residual(r, r * Vec3(0, 0.3, 0));
  EXPECT_LT((slip - Vec2(0.3, 0)).norm(), 1e-15);
}

TEST(BearingRangeResidual, Values) {
  const Pose x(Rotation::from_rpy(0.0, 0.1, 0.5), Vec3(1, 2, 0.3));
  const Vec3 p_cam(0.3, -0.2, 4.0);
  const Vec3 lm = x.transform(p_cam);
  const BearingRange meas = cartesian_to_bearing_range(p_cam, 0.01 * Mat3::Identity());
  EXPECT_LT(bearing_range_residual(x, lm, meas)->norm(), 1e-12);
  const Vec3 farther = x.transform(p_cam + 0.1 * meas.bearing);
  EXPECT_LT((*bearing_range_residual(x, farther, meas) - Vec3(0, 0, -0.1)).norm(), 1e-12);
  EXPECT_FALSE(bearing_range_residual(x, x.translation(), meas).has_value());
}

TEST(ZeroDisplacement, Values) {
  EXPECT_EQ(zero_displacement_residual(Vec3(1, 2, 3), Vec3(1, 2, 3)), Vec3::Zero());
  EXPECT_LT((zero_displacement_residual(Vec3(0.2, 0, 0), Vec3::Zero()) - Vec3(0.2, 0, 0)).norm(), 1e-15);
}

TEST(ZeroDisplacement, ReoptimizationShrinksSeparation) {
  FactorGraph g;
  g.add_landmark(0, LandmarkClass::kPole, Vec3(0, 0, 0));
  g.add_landmark(1, LandmarkClass::kPole, Vec3(0.4, 0, 0));
  g.add_factor(std::make_shared<PointPriorFactor>(landmark_key(0), Vec3(0, 0, 0), NoiseModel::isotropic(3, 0.1)));
  g.add_factor(std::make_shared<PointPriorFactor>(landmark_key(1), Vec3(0.4, 0, 0), NoiseModel::isotropic(3, 0.1)));
  optimize(g, LmConfig{});
  const double before = (g.values().landmark(0) - g.values().landmark(1)).norm();
  g.add_factor(std::make_shared<ZeroDisplacementFactor>(0, 1, NoiseModel::isotropic(3, 0.1)));
  optimize(g, LmConfig{});
  const double after = (g.values().landmark(0) - g.values().landmark(1)).norm();
  EXPECT_LT(after, before);
}

class FactorJacobians : public ::testing::Test {
 protected:
  std::mt19937_64 rng{77};
  Values random_values() {
    Values v;
    v.poses[0] = random_pose(rng);
    v.poses[1] = random_pose(rng);
    v.velocities[0] = random_vec(rng, 1.0);
    v.landmarks[0] = random_vec(rng, 3.0);
    v.landmarks[1] = random_vec(rng, 3.0);
    return v;
  }
};

TEST_F(FactorJacobians, AllFactorTypes) {
  const Pose extrinsic(Rotation::from_rpy(-kPi / 2, 0.0, -kPi / 2), Vec3(0.2, 0.0, 0.5));
  for (int i = 0; i < 100; ++i) {
    Values v = random_values();
    // Put landmark 0 in front of the camera so the bearing stays off the
    // tangent-basis branch cut.
    const Pose cam = v.pose(0) * extrinsic;
    v.landmarks[0] = cam.transform(Vec3(0.2, 0.3, 3.0) + random_vec(rng, 0.3));
    const BearingRange meas =
        cartesian_to_bearing_range(Vec3(0.1, 0.2, 3.0) + random_vec(rng, 0.2), 0.01 * Mat3::Identity());
    const auto iso3 = NoiseModel::isotropic(3, 0.1);
    const auto iso2 = NoiseModel::isotropic(2, 0.1);
    EXPECT_LT(max_jacobian_error(GpsFactor(0, random_vec(rng, 3.0), iso3), v), 1e-5);
    EXPECT_LT(max_jacobian_error(AttitudeFactor(0, random_rotation(rng), iso2), v), 1e-5);
    EXPECT_LT(max_jacobian_error(HeadingFactor(0, 1.0, iso2), v), 1e-5);
    EXPECT_LT(max_jacobian_error(NonholonomicFactor(0, iso2), v), 1e-5);
    EXPECT_LT(max_jacobian_error(BearingRangeFactor(0, 0, meas, extrinsic), v), 1e-5);
    EXPECT_LT(max_jacobian_error(ZeroDisplacementFactor(0, 1, iso3), v), 1e-5);
    EXPECT_LT(max_jacobian_error(PosePriorFactor(0, random_pose(rng), NoiseModel::isotropic(6, 0.1)), v), 1e-5);
    EXPECT_LT(max_jacobian_error(PointPriorFactor(velocity_key(0), Vec3(1, 2, 3), iso3), v), 1e-5);
  }
}

TEST(NoiseModelTest, WhitensByInverseCholesky) {
  Mat3 cov;
  cov << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  const NoiseModel m = NoiseModel::from_covariance(cov);
  const Eigen::Vector3d r(0.3, -0.1, 0.7);
  EXPECT_NEAR(m.whiten(Eigen::VectorXd(r)).squaredNorm(), r.dot(cov.inverse() * r), 1e-12);
  EXPECT_THROW(NoiseModel::from_covariance(-cov), std::invalid_argument);
}

TEST(NoiseModelTest, HuberWeightAndCost) {
  const NoiseModel m = NoiseModel::isotropic(2, 1.0).with_huber(2.0);
  EXPECT_DOUBLE_EQ(m.robust_weight(1.0), 1.0);
  EXPECT_DOUBLE_EQ(m.robust_weight(4.0), 0.5);
  EXPECT_DOUBLE_EQ(m.robust_cost(1.0), 0.5);
  EXPECT_DOUBLE_EQ(m.robust_cost(4.0), 2.0 * 4.0 - 2.0);
}
