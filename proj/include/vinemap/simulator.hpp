#pragma once

#include "vinemap/geometry.hpp"
#include "vinemap/imu_preint.hpp"
#include "vinemap/perception.hpp"
#include "vinemap/state.hpp"

#include <cstdint>
#include <vector>

namespace vinemap {

struct WorldConfig {
  int rows = 3;
  double row_length = 100.0;
  double row_spacing = 2.5;
  double pole_spacing = 6.0;
  double trunk_spacing = 1.0;
  double jitter_sigma = 0.01;
  double pole_radius = 0.05;
  double trunk_radius = 0.08;
  double pole_height = 2.0;
  double trunk_height = 0.6;
  GeodeticDatum datum{44.4949, 11.3426, 54.0};
  std::uint64_t seed = 1;

  void validate() const;
};

struct GroundTruthLandmark {
  std::int64_t id = 0;
  LandmarkClass cls = LandmarkClass::kPole;
  int row = 0;
  Vec3 position = Vec3::Zero();  ///< base of the stem, ENU relative to the world datum
  double height = 0.0;
  double radius = 0.0;
};

/// Rows run east along north = row * row_spacing. Poles sit every
/// pole_spacing from east = 0; trunks fill each gap between consecutive poles.
std::vector<GroundTruthLandmark> generate_world(const WorldConfig& config);

struct TrajectoryConfig {
  double v_max = 1.0;
  double omega_max = 2.0;
  double headland = 2.0;
  double ramp_time = 2.0;
  double hold_time = 1.0;
  double rate = 100.0;
  /// Sinusoidal heading oscillation on straight lanes (rad); 0 disables it.
  double oscillation_amplitude = 0.0;
  double oscillation_period = 10.0;

  void validate() const;
};

struct TrajectorySample {
  double t = 0.0;
  Pose pose;
  Vec3 velocity = Vec3::Zero();         ///< ENU
  Vec3 angular_velocity = Vec3::Zero(); ///< body
  Vec3 acceleration = Vec3::Zero();     ///< ENU, excluding gravity
};

/// Lawnmower traverse: one lane per row (south of it), alternating
/// direction, joined by smooth U-turns. Flat terrain, body z up.
class Trajectory {
 public:
  Trajectory(const WorldConfig& world, const TrajectoryConfig& config);

  double duration() const { return duration_; }
  const std::vector<TrajectorySample>& samples() const { return samples_; }
  /// Exact state at any time in [0, duration].
  TrajectorySample at(double t) const;
  /// Largest yaw rate over the sampled path.
  double max_yaw_rate() const;
  double cruise_speed() const { return cruise_; }

 private:
  struct Segment {
    enum Kind { kHold, kStraight, kTurn } kind;
    double t0, t1;
    double yaw0;
    double turn_sign = 0.0;   // +1 left, -1 right
    bool ramp_up = false, ramp_down = false;
    Vec2 start = Vec2::Zero();
  };

  struct Kinematics {
    double speed, accel, yaw, yaw_rate;
  };

  Kinematics kinematics(const Segment& s, double t) const;
  const Segment& segment_at(double t) const;
  Vec2 integrate(const Segment& s, double from, double to, Vec2 p) const;
  TrajectorySample make_sample(double t, const Vec2& xy) const;

  TrajectoryConfig config_;
  double cruise_ = 0.0;
  double turn_time_ = 0.0;
  double duration_ = 0.0;
  std::vector<Segment> segments_;
  std::vector<TrajectorySample> samples_;
};

Trajectory generate_trajectory(const WorldConfig& world, const TrajectoryConfig& config);

struct NoiseConfig {
  double gps_sigma = 0.02;
  ImuNoise imu;
  double ahrs_roll_pitch_sigma = 0.5 * 3.14159265358979323846 / 180.0;
  double ahrs_yaw_sigma = 2.0 * 3.14159265358979323846 / 180.0;
  double mag_yaw_sigma = 2.0 * 3.14159265358979323846 / 180.0;
  double depth_sigma = 0.05;
  double depth_outlier_prob = 0.1;
  double depth_outlier_scale = 5.0;
  double detection_drop_prob = 0.05;
  double track_break_prob = 0.0;
  double false_detection_rate = 0.05;
  double false_id_switch_prob = 0.0;
  double confidence_mean = 0.92;
  double confidence_sigma = 0.04;
  /// Depth of each sample from the true cylinder surface. When off, samples
  /// carry the depth of the stem axis at that height.
  bool surface_relief = true;

  static NoiseConfig noiseless();
  void validate() const;
};

struct SensorRig {
  CameraIntrinsics camera;
  Pose body_to_camera = default_extrinsic();
  double imu_rate = 100.0;
  double gps_rate = 5.0;
  double ahrs_rate = 50.0;
  double mag_rate = 10.0;
  double camera_rate = 2.0;
  int samples_per_detection = 200;
  double z_min = 0.3;
  double z_max = 8.0;

  /// Forward-looking camera 0.3 m ahead of and 0.5 m above the body origin.
  static Pose default_extrinsic();
  void validate() const;
};

struct GpsFix {
  double t = 0.0;
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
  double altitude_m = 0.0;
  double sigma = 0.0;
};

struct AhrsReading {
  double t = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

struct MagReading {
  double t = 0.0;
  double yaw = 0.0;
};

struct SensorLog {
  std::vector<ImuSample> imu;
  std::vector<GpsFix> gps;
  std::vector<AhrsReading> ahrs;
  std::vector<MagReading> mag;
};

struct DetectionFrame {
  double t = 0.0;
  std::vector<Detection> detections;
};

struct DetectionLog {
  CameraIntrinsics camera;
  Pose body_to_camera = SensorRig::default_extrinsic();
  std::vector<DetectionFrame> frames;
};

struct SimulatedLogs {
  SensorLog sensors;
  DetectionLog detections;
};

SimulatedLogs synthesize_logs(const WorldConfig& world, const std::vector<GroundTruthLandmark>& landmarks,
                              const Trajectory& trajectory, const NoiseConfig& noise, const SensorRig& rig,
                              std::uint64_t seed);

}  // namespace vinemap
