#include "vinemap/association.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace vinemap {

LandmarkClass TrackBuffer::majority_class() const {
  if (records.empty()) throw std::logic_error("majority_class of an empty buffer");
  std::array<int, 2> counts{0, 0};
  for (const auto& r : records) ++counts[static_cast<int>(r.cls)];
  if (counts[0] == counts[1]) return records.front().cls;
  return counts[0] > counts[1] ? LandmarkClass::kTrunk : LandmarkClass::kPole;
}

std::vector<Vec3> TrackBuffer::world_positions() const {
  std::vector<Vec3> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.world);
  return out;
}

void buffer_observation(TrackBuffers& buffers, const LandmarkObservation& obs, std::int64_t keyframe, double t,
                        const Pose& camera_pose, const Mat3& sigma_xyz) {
  auto [it, created] = buffers.try_emplace(obs.track_id);
  TrackBuffer& b = it->second;
  if (created) b.track_id = obs.track_id;
  ObservationRecord rec;
  rec.keyframe = keyframe;
  rec.t = t;
  rec.cls = obs.cls;
  rec.confidence = obs.confidence;
  rec.measurement = cartesian_to_bearing_range(obs.point, sigma_xyz);
  rec.world = camera_pose.transform(obs.point);
  if (!b.records.empty() && b.records.front().cls != obs.cls) b.class_conflict = true;
  b.records.push_back(rec);
  b.last_seen = std::max(b.last_seen, t);
  b.exit_streak = 0;
}

bool should_commit(TrackBuffer& buffer, const Pose& camera_pose, const CameraIntrinsics& k, double z_min,
                   double z_max, double t_now, const AssociationConfig& config) {
  if (buffer.records.empty()) return false;
  const std::vector<Vec3> pos = buffer.world_positions();
  const Vec3 p = camera_pose.inverse_transform(initial_position(pos));
  bool outside = p.z() < z_min || p.z() > z_max;
  if (!outside) {
    const Vec2 px = k.project(p);
    outside = !k.contains(px.x(), px.y());
  }
  buffer.exit_streak = outside ? buffer.exit_streak + 1 : 0;
  return buffer.exit_streak >= config.n_exit || t_now - buffer.last_seen >= config.t_stale;
}

Vec3 initial_position(std::span<const Vec3> positions) {
  if (positions.empty()) throw std::invalid_argument("initial_position of an empty set");
  Vec3 out;
  std::vector<double> c(positions.size());
  for (int a = 0; a < 3; ++a) {
    for (std::size_t i = 0; i < positions.size(); ++i) c[i] = positions[i](a);
    out(a) = median(c);
  }
  return out;
}

std::vector<std::size_t> mad_filter(std::span<const Vec3> positions, double lambda_mad, double eps_mad,
                                    double mad_constant) {
  std::vector<std::size_t> keep;
  if (positions.empty()) return keep;
  const Vec3 med = initial_position(positions);
  std::vector<double> d(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) d[i] = (positions[i] - med).norm();
  const double mad = std::max(median(d), eps_mad);
  for (std::size_t i = 0; i < positions.size(); ++i)
    if (d[i] / (mad_constant * mad) <= lambda_mad) keep.push_back(i);
  return keep;
}

std::optional<std::int64_t> find_merge_target(const Vec3& position, LandmarkClass cls,
                                              const LandmarkRegistry& landmarks, const AssociationConfig& config) {
  std::optional<std::int64_t> best;
  double best_d = 0.0;
  for (const auto& [id, lm] : landmarks) {
    if (lm.cls != cls) continue;
    const double d = (lm.position.head<2>() - position.head<2>()).norm();
    if (!best || d < best_d) {
      best = id;
      best_d = d;
    }
  }
  if (best && best_d < config.d_merge(cls)) return best;
  return std::nullopt;
}

Commitment commit(TrackBuffers& buffers, std::int64_t track_id, LandmarkRegistry& landmarks,
                  std::int64_t& next_landmark_id, const AssociationConfig& config, const Pose& body_to_camera) {
  Commitment out;
  auto it = buffers.find(track_id);
  if (it == buffers.end()) return out;
  const TrackBuffer buffer = std::move(it->second);
  buffers.erase(it);
  if (buffer.records.empty()) return out;

  const std::vector<Vec3> pos = buffer.world_positions();
  const std::vector<std::size_t> inliers = mad_filter(pos, config.lambda_mad, config.eps_mad, config.mad_constant);
  out.inliers = inliers.size();
  out.outliers = pos.size() - inliers.size();
  if (inliers.empty()) return out;

  std::vector<Vec3> kept;
  for (std::size_t i : inliers) kept.push_back(pos[i]);
  const Vec3 init = initial_position(kept);
  const LandmarkClass cls = buffer.majority_class();

  if (auto target = find_merge_target(init, cls, landmarks, config)) {
    out.outcome = CommitOutcome::kMerged;
    out.landmark = *target;
  } else {
    out.outcome = CommitOutcome::kCreated;
    out.landmark = next_landmark_id++;
    landmarks.emplace(out.landmark, LandmarkRecord{cls, init, 0});
    out.update.landmarks.push_back({out.landmark, cls, init});
  }
  landmarks.at(out.landmark).support += inliers.size();
  for (std::size_t i : inliers) {
    const ObservationRecord& r = buffer.records[i];
    out.update.factors.push_back(
        std::make_shared<BearingRangeFactor>(r.keyframe, out.landmark, r.measurement, body_to_camera));
  }
  return out;
}

}  // namespace vinemap
