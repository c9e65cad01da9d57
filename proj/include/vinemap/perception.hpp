#pragma once

#include "vinemap/geometry.hpp"
#include "vinemap/state.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vinemap {

struct CameraIntrinsics {
  double fx = 385.0;
  double fy = 385.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  /// Throws std::invalid_argument on non-positive focal lengths or a
  /// principal point outside the image.
  void validate() const;
  bool contains(double u, double v) const { return u >= 0.0 && v >= 0.0 && u < width && v < height; }
  /// Pixel of a camera-frame point with z > 0.
  Vec2 project(const Vec3& p) const { return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy}; }
  Vec3 backproject(double u, double v, double z) const {
    return {(u - cx) * z / fx, (v - cy) * z / fy, z};
  }
};

/// Axis-aligned pixel box.
struct BBox {
  double u_min = 0.0;
  double v_min = 0.0;
  double u_max = 0.0;
  double v_max = 0.0;

  double area() const;
};

double iou(const BBox& a, const BBox& b);

struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
};

struct Detection {
  double t = 0.0;
  std::int64_t track_id = 0;
  LandmarkClass cls = LandmarkClass::kPole;
  double confidence = 0.0;
  BBox bbox;
  std::vector<PixelDepth> samples;
};

/// Reference point of one detection in the camera frame.
struct LandmarkObservation {
  Vec3 point = Vec3::Zero();
  LandmarkClass cls = LandmarkClass::kPole;
  double confidence = 0.0;
  std::int64_t track_id = 0;
  std::size_t point_count = 0;
};

struct PerceptionConfig {
  double theta_conf = 0.8;
  double theta_iou = 0.5;
  std::vector<LandmarkClass> allowed_classes{LandmarkClass::kTrunk, LandmarkClass::kPole};
  double z_min = 0.3;
  double z_max = 8.0;
  std::size_t n_min = 30;
  /// When false the base-quartile estimator is replaced by the plain
  /// centroid of the whole cloud.
  bool use_reference_point = true;
};

/// Drops detections below theta_conf or of a disallowed class, then runs
/// greedy per-class NMS in order of descending confidence (ties keep input
/// order). Survivors keep their input order.
std::vector<Detection> filter_detections(std::span<const Detection> dets, double theta_conf,
                                         std::span<const LandmarkClass> allowed, double theta_iou);

/// Back-projects the valid samples. Returns nullopt when fewer than n_min
/// samples have a finite depth in [z_min, z_max].
std::optional<std::vector<Vec3>> backproject(const Detection& det, const CameraIntrinsics& k, double z_min,
                                             double z_max, std::size_t n_min);

/// Mean x, mean y and median z over the lowest quarter of the cloud (the
/// ceil(n/4) points with the largest camera y). Needs at least 4 points.
Vec3 reference_point(std::span<const Vec3> cloud);

/// Arithmetic mean over all points.
Vec3 centroid(std::span<const Vec3> cloud);

/// Median of a sample (midpoint of the central pair for even sizes).
double median(std::vector<double> values);

/// Full per-detection chain: back-projection then reference point (or
/// centroid). Assumes the detection already passed filter_detections.
std::optional<LandmarkObservation> observe(const Detection& det, const CameraIntrinsics& k,
                                           const PerceptionConfig& config);

}  // namespace vinemap
