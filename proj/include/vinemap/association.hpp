#pragma once

#include "vinemap/factors.hpp"
#include "vinemap/perception.hpp"
#include "vinemap/solver.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace vinemap {

struct AssociationConfig {
  double lambda_mad = 1.5;
  double mad_constant = 1.4826;
  double eps_mad = 0.05;
  double d_merge_trunk = 0.5;
  double d_merge_pole = 1.0;
  int n_exit = 3;
  double t_stale = 3.0;

  double d_merge(LandmarkClass c) const { return c == LandmarkClass::kTrunk ? d_merge_trunk : d_merge_pole; }
};

/// One buffered sighting of a track.
struct ObservationRecord {
  std::int64_t keyframe = 0;
  double t = 0.0;
  LandmarkClass cls = LandmarkClass::kPole;
  double confidence = 0.0;
  BearingRange measurement;  ///< camera frame
  Vec3 world = Vec3::Zero(); ///< approximate ENU position at buffering time
};

struct TrackBuffer {
  std::int64_t track_id = 0;
  std::vector<ObservationRecord> records;
  double last_seen = 0.0;
  int exit_streak = 0;
  bool class_conflict = false;

  /// Most frequent class; a tie goes to the class seen first.
  LandmarkClass majority_class() const;
  std::vector<Vec3> world_positions() const;
};

using TrackBuffers = std::map<std::int64_t, TrackBuffer>;

/// A landmark known to the map, with its latest estimate.
struct LandmarkRecord {
  LandmarkClass cls = LandmarkClass::kPole;
  Vec3 position = Vec3::Zero();
  std::size_t support = 0;
};

using LandmarkRegistry = std::map<std::int64_t, LandmarkRecord>;

/// Appends a sighting to buffer[obs.track_id], creating it if needed.
/// `camera_pose` is the camera-to-ENU pose at the keyframe and `sigma_xyz`
/// the camera-frame covariance of the reference point.
void buffer_observation(TrackBuffers& buffers, const LandmarkObservation& obs, std::int64_t keyframe, double t,
                        const Pose& camera_pose, const Mat3& sigma_xyz);

/// Per-keyframe commit test. Updates the buffer's exit streak: the streak
/// grows while the buffer's median position projects outside the image or
/// outside [z_min, z_max], and resets otherwise.
bool should_commit(TrackBuffer& buffer, const Pose& camera_pose, const CameraIntrinsics& k, double z_min,
                   double z_max, double t_now, const AssociationConfig& config);

/// Indices of the positions whose scaled deviation from the component-wise
/// median is within lambda_mad.
std::vector<std::size_t> mad_filter(std::span<const Vec3> positions, double lambda_mad, double eps_mad,
                                    double mad_constant = 1.4826);

/// Component-wise median. Throws std::invalid_argument on an empty set.
Vec3 initial_position(std::span<const Vec3> positions);

/// Nearest same-class landmark in xy, returned if closer than d_merge(cls).
/// Ties go to the lower key.
std::optional<std::int64_t> find_merge_target(const Vec3& position, LandmarkClass cls,
                                              const LandmarkRegistry& landmarks, const AssociationConfig& config);

enum class CommitOutcome { kCreated, kMerged, kDiscarded };

struct Commitment {
  CommitOutcome outcome = CommitOutcome::kDiscarded;
  std::int64_t landmark = -1;
  std::size_t inliers = 0;
  std::size_t outliers = 0;
  GraphUpdate update;  ///< new landmark (if any) and its bearing-range factors
};

/// Resolves one buffer: MAD filter, median initialization, merge check.
/// The registry is updated immediately; the returned update still has to be
/// applied to the graph. The buffer is removed. `next_landmark_id` is
/// advanced when a landmark is created.
Commitment commit(TrackBuffers& buffers, std::int64_t track_id, LandmarkRegistry& landmarks,
                  std::int64_t& next_landmark_id, const AssociationConfig& config, const Pose& body_to_camera);

}  // namespace vinemap
