#pragma once

#include "vinemap/association.hpp"
#include "vinemap/imu_preint.hpp"
#include "vinemap/perception.hpp"
#include "vinemap/refinement.hpp"
#include "vinemap/simulator.hpp"
#include "vinemap/solver.hpp"

#include <optional>
#include <vector>

namespace vinemap {

struct KeyframePolicy {
  double interval = 0.5;        ///< s
  double distance = 0.5;        ///< m of GPS travel
  double camera_gap = 1.0;      ///< fall back to IMU times when no frame arrives for this long
  double sync_tolerance = 0.005;
};

/// Standard deviations of the pose factors.
struct FactorSigmas {
  double prior_rotation = 0.01;      ///< rad
  double prior_translation = 0.02;   ///< m
  double prior_velocity = 1.0;       ///< m/s, weak
  double gps_floor = 0.005;          ///< lower bound on the per-fix sigma
  double attitude = 0.0087;          ///< rad
  double heading = 0.035;            ///< rad
  double nonholonomic = 0.05;        ///< m/s
  double nonholonomic_huber = 0.1;   ///< m/s
  double observation = 0.05;         ///< m, isotropic camera-frame reference point noise
  double imu_covariance_floor = 1e-10;
};

struct PipelineConfig {
  PerceptionConfig perception;
  AssociationConfig association;
  RefinementConfig refinement;
  KeyframePolicy keyframes;
  FactorSigmas sigmas;
  ImuNoise imu_noise;
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  double gravity = 9.81;
  LmConfig batch;
  int incremental_iters = 10;
  bool incremental = true;
  /// Keyframes re-solved per incremental step, together with the landmarks
  /// they observe. 0 re-solves the whole graph.
  int incremental_window = 20;
  bool compute_marginals = true;
  /// When false every observation becomes a factor immediately (no
  /// buffering, no MAD filter); merging on first sighting is kept.
  bool deferred_commitment = true;
  /// Overrides the extrinsic carried by the detection log.
  std::optional<Pose> body_to_camera;
};

struct MappedLandmark {
  std::int64_t id = 0;
  LandmarkClass cls = LandmarkClass::kPole;
  Vec3 position = Vec3::Zero();
  std::size_t support = 0;
  Mat3 covariance = Mat3::Zero();
};

struct KeyframeEstimate {
  std::int64_t index = 0;
  double t = 0.0;
  Pose pose;
  Vec3 velocity = Vec3::Zero();
};

struct PipelineDiagnostics {
  std::size_t keyframes = 0;
  std::size_t detections = 0;
  std::size_t detections_kept = 0;
  std::size_t observations = 0;
  std::size_t landmarks_created = 0;
  std::size_t merges = 0;
  std::size_t discarded_tracks = 0;
  std::size_t rejected_observations = 0;
  std::size_t class_conflicts = 0;
  OptimizeReport final_solve;
  std::optional<RefinementResult> refinement;
};

struct MapResult {
  GeodeticDatum datum;
  std::vector<MappedLandmark> landmarks;
  std::vector<KeyframeEstimate> trajectory;
  PipelineDiagnostics diagnostics;
  FactorGraph graph;
  Values initial_values;  ///< every variable as first inserted
  /// Landmark estimates right after the last incremental step, before the
  /// final re-solve (empty when incremental solving is off).
  std::map<std::int64_t, Vec3> incremental_landmarks;
};

/// Runs the full mapping chain over time-ordered logs. Throws DataError if
/// no GPS fix coincides with an AHRS orientation (the graph is never
/// initialized), SolverError on solver failures.
MapResult run_pipeline(const SensorLog& sensors, const DetectionLog& detections, const PipelineConfig& config);

}  // namespace vinemap
