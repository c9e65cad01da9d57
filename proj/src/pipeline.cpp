#include "vinemap/pipeline.hpp"

#include "vinemap/errors.hpp"
#include "vinemap/factors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

namespace vinemap {

namespace {

template <typename T>
std::size_t first_at_or_after(const std::vector<T>& v, double t) {
  return static_cast<std::size_t>(
      std::lower_bound(v.begin(), v.end(), t, [](const T& s, double x) { return s.t < x; }) - v.begin());
}

// Index of a record within `tol` of t, preferring the closest.
template <typename T>
std::optional<std::size_t> coincident(const std::vector<T>& v, double t, double tol) {
  const std::size_t i = first_at_or_after(v, t - tol);
  std::optional<std::size_t> best;
  for (std::size_t k = i; k < v.size() && v[k].t <= t + tol; ++k)
    if (!best || std::abs(v[k].t - t) < std::abs(v[*best].t - t)) best = k;
  return best;
}

// Bracketing records (a.t < t < b.t) no further apart than max_gap.
template <typename T>
std::optional<std::pair<std::size_t, std::size_t>> bracket(const std::vector<T>& v, double t, double max_gap) {
  const std::size_t i = first_at_or_after(v, t);
  if (i == 0 || i >= v.size()) return std::nullopt;
  if (v[i].t - v[i - 1].t > max_gap) return std::nullopt;
  return std::make_pair(i - 1, i);
}

struct GpsPoint {
  double t;
  Vec3 enu;
  double sigma;
};

class SensorIndex {
 public:
  SensorIndex(const SensorLog& log, const KeyframePolicy& policy) : log_(log), policy_(policy) {
    for (const GpsFix& f : log.gps) {
      if (!std::isfinite(f.latitude_deg) || !std::isfinite(f.longitude_deg) || !std::isfinite(f.altitude_m) || std::abs(f.latitude_deg) > 90.0 ||
          std::abs(f.longitude_deg) > 180.0)
        continue;
      if (!datum_) datum_ = GeodeticDatum{f.latitude_deg, f.longitude_deg, f.altitude_m};
      gps_.push_back({f.t, geodetic_to_enu(f.latitude_deg, f.longitude_deg, f.altitude_m, *datum_), f.sigma});
    }
  }

  const std::optional<GeodeticDatum>& datum() const { return datum_; }
  const std::vector<GpsPoint>& gps() const { return gps_; }

  std::optional<GpsPoint> gps_at(double t) const {
    if (auto i = coincident(gps_, t, policy_.sync_tolerance)) return gps_[*i];
    if (auto b = bracket(gps_, t, 0.5)) {
      const GpsPoint& a = gps_[b->first];
      const GpsPoint& c = gps_[b->second];
      const double w = (t - a.t) / (c.t - a.t);
      return GpsPoint{t, (1.0 - w) * a.enu + w * c.enu, std::max(a.sigma, c.sigma)};
    }
    return std::nullopt;
  }

  std::optional<Rotation> ahrs_at(double t) const {
    const auto& v = log_.ahrs;
    if (auto i = coincident(v, t, policy_.sync_tolerance)) return Rotation::from_rpy(v[*i].roll, v[*i].pitch, v[*i].yaw);
    if (auto b = bracket(v, t, 0.5)) {
      const AhrsReading& a = v[b->first];
      const AhrsReading& c = v[b->second];
      const double w = (t - a.t) / (c.t - a.t);
      return Rotation::from_rpy(a.roll + w * (c.roll - a.roll), a.pitch + w * (c.pitch - a.pitch),
                                wrap_angle(a.yaw + w * wrap_angle(c.yaw - a.yaw)));
    }
    return std::nullopt;
  }

  std::optional<double> mag_at(double t) const {
    const auto& v = log_.mag;
    if (auto i = coincident(v, t, policy_.sync_tolerance)) return v[*i].yaw;
    if (auto b = bracket(v, t, 0.5)) {
      const MagReading& a = v[b->first];
      const MagReading& c = v[b->second];
      const double w = (t - a.t) / (c.t - a.t);
      return wrap_angle(a.yaw + w * wrap_angle(c.yaw - a.yaw));
    }
    return std::nullopt;
  }

  /// IMU samples spanning [ta, tb], with interpolated endpoints.
  std::vector<ImuSample> imu_between(double ta, double tb) const {
    const auto& v = log_.imu;
    std::vector<ImuSample> out;
    auto sample_at = [&](double t) {
      if (auto i = coincident(v, t, 1e-9)) return v[*i];
      const std::size_t k = std::clamp<std::size_t>(first_at_or_after(v, t), 1, v.size() - 1);
      const ImuSample& a = v[k - 1];
      const ImuSample& b = v[k];
      const double w = (t - a.t) / (b.t - a.t);
      return ImuSample{t, (1.0 - w) * a.angular_velocity + w * b.angular_velocity,
                       (1.0 - w) * a.linear_acceleration + w * b.linear_acceleration};
    };
    out.push_back(sample_at(ta));
    for (std::size_t k = first_at_or_after(v, ta + 1e-9); k < v.size() && v[k].t < tb - 1e-9; ++k) out.push_back(v[k]);
    out.push_back(sample_at(tb));
    return out;
  }

 private:
  const SensorLog& log_;
  const KeyframePolicy& policy_;
  std::optional<GeodeticDatum> datum_;
  std::vector<GpsPoint> gps_;
};

struct KeyframeSlot {
  double t;
  std::optional<std::size_t> frame;
};

// Start time: the first GPS fix with an AHRS orientation available.
std::optional<double> start_time(const SensorIndex& index, const SensorLog& log) {
  if (log.imu.size() < 2) return std::nullopt;
  for (const GpsPoint& g : index.gps()) {
    if (g.t < log.imu.front().t || g.t > log.imu.back().t) continue;
    if (index.ahrs_at(g.t)) return g.t;
  }
  return std::nullopt;
}

std::vector<KeyframeSlot> select_keyframes(double t_start, const SensorIndex& index, const SensorLog& sensors,
                                           const DetectionLog& detections, const KeyframePolicy& policy) {
  const double t_end = sensors.imu.back().t;
  const auto& frames = detections.frames;
  std::vector<KeyframeSlot> out;
  {
    const auto f = coincident(frames, t_start, policy.sync_tolerance);
    out.push_back({t_start, f});
  }
  auto gps_pos = [&](double t) -> std::optional<Vec3> {
    if (auto g = index.gps_at(t)) return g->enu;
    return std::nullopt;
  };
  double scan = t_start;
  std::optional<Vec3> last_pos = gps_pos(t_start);
  std::size_t next_frame = first_at_or_after(frames, t_start + policy.sync_tolerance);
  std::size_t next_imu = first_at_or_after(sensors.imu, t_start + 1e-9);
  while (true) {
    const double t_last = out.back().t;
    KeyframeSlot cand{0.0, std::nullopt};
    if (next_frame < frames.size() && frames[next_frame].t - scan <= policy.camera_gap) {
      cand = {frames[next_frame].t, next_frame};
    } else {
      // No camera frame soon: walk the IMU clock instead.
      while (next_imu < sensors.imu.size() && sensors.imu[next_imu].t < t_last + policy.interval - 1e-9) ++next_imu;
      if (next_imu >= sensors.imu.size()) break;
      cand = {sensors.imu[next_imu].t, std::nullopt};
      if (next_frame < frames.size() && frames[next_frame].t <= cand.t) cand = {frames[next_frame].t, next_frame};
    }
    if (cand.t > t_end + 1e-9) break;
    scan = cand.t;
    if (cand.frame) ++next_frame;
    while (next_imu < sensors.imu.size() && sensors.imu[next_imu].t <= scan + 1e-9) ++next_imu;
    if (cand.t <= t_last + 1e-9) continue;
    bool take = cand.t - t_last >= policy.interval - 1e-9;
    const std::optional<Vec3> pos = gps_pos(cand.t);
    if (!take && pos && last_pos) take = (*pos - *last_pos).norm() >= policy.distance;
    if (take) {
      out.push_back(cand);
      last_pos = pos;
    }
  }
  return out;
}

Vec3 initial_velocity(const SensorIndex& index, double t) {
  const auto& g = index.gps();
  const std::size_t i = first_at_or_after(g, t);
  const std::size_t a = i > 0 ? i - 1 : 0;
  const std::size_t b = std::min(i + 1, g.size() - 1);
  if (b <= a || g[b].t - g[a].t <= 0.0) return Vec3::Zero();
  return (g[b].enu - g[a].enu) / (g[b].t - g[a].t);
}

class Mapper {
 public:
  Mapper(const SensorLog& sensors, const DetectionLog& detections, const PipelineConfig& config)
      : sensors_(sensors),
        detections_(detections),
        config_(config),
        index_(sensors, config.keyframes),
        extrinsic_(config.body_to_camera.value_or(detections.body_to_camera)),
        gravity_(0.0, 0.0, -config.gravity) {
    const double s = config.sigmas.observation;
    sigma_xyz_ = Mat3::Identity() * s * s;
  }

  MapResult run() {
    detections_.camera.validate();
    if (!index_.datum()) throw DataError("graph never initialized: no valid GPS fix");
    const auto t0 = start_time(index_, sensors_);
    if (!t0) throw DataError("graph never initialized: no GPS fix with a simultaneous AHRS orientation");
    result_.datum = *index_.datum();

    const std::vector<KeyframeSlot> slots = select_keyframes(*t0, index_, sensors_, detections_, config_.keyframes);
    for (std::size_t k = 0; k < slots.size(); ++k) step(static_cast<std::int64_t>(k), slots, k);

    GraphUpdate flush;
    if (config_.deferred_commitment) {
      std::vector<std::int64_t> ids;
      for (const auto& [id, b] : buffers_) ids.push_back(id);
      for (std::int64_t id : ids) absorb(commit(buffers_, id, registry_, next_landmark_, config_.association, extrinsic_),
                                         flush);
    }
    apply(flush);
    if (config_.incremental) result_.incremental_landmarks = graph_.values().landmarks;

    result_.diagnostics.keyframes = slots.size();
    result_.diagnostics.class_conflicts = conflicted_.size();
    result_.diagnostics.final_solve = optimize(graph_, config_.batch);
    if (config_.refinement.enabled) result_.diagnostics.refinement = consolidate(graph_, config_.refinement, config_.batch);

    const auto marginals = config_.compute_marginals ? landmark_marginals(graph_) : std::map<std::int64_t, Mat3>{};
    for (const auto& [id, rec] : registry_) {
      MappedLandmark m;
      m.id = id;
      m.cls = rec.cls;
      m.position = graph_.values().landmark(id);
      m.support = rec.support;
      if (auto it = marginals.find(id); it != marginals.end()) m.covariance = it->second;
      result_.landmarks.push_back(m);
    }
    for (std::size_t k = 0; k < slots.size(); ++k) {
      const auto i = static_cast<std::int64_t>(k);
      result_.trajectory.push_back({i, slots[k].t, graph_.values().pose(i), graph_.values().velocity(i)});
    }
    result_.graph = std::move(graph_);
    return std::move(result_);
  }

 private:
  void step(std::int64_t k, const std::vector<KeyframeSlot>& slots, std::size_t slot) {
    const double t = slots[slot].t;
    const FactorSigmas& sg = config_.sigmas;
    GraphUpdate update;

    RobotState init;
    const auto fix = index_.gps_at(t);
    const auto ahrs = index_.ahrs_at(t);
    if (k == 0) {
      init.pose = Pose(*ahrs, fix->enu);
      init.velocity = initial_velocity(index_, t);
      Eigen::VectorXd ps(6);
      ps << Vec3::Constant(sg.prior_rotation), Vec3::Constant(sg.prior_translation);
      update.factors.push_back(std::make_shared<PosePriorFactor>(k, init.pose, NoiseModel::diagonal(ps)));
      update.factors.push_back(std::make_shared<PointPriorFactor>(velocity_key(k), init.velocity,
                                                                  NoiseModel::isotropic(3, sg.prior_velocity)));
    } else {
      PreintegratedDelta delta = preintegrate(index_imu(slots[slot - 1].t, t), config_.gyro_bias, config_.accel_bias,
                                              config_.imu_noise);
      delta.covariance += Mat9::Identity() * sg.imu_covariance_floor;
      init = predict(graph_.values().state(k - 1), delta, gravity_);
      update.factors.push_back(std::make_shared<ImuFactor>(k - 1, k, std::move(delta), gravity_));
    }
    update.poses.emplace_back(k, init.pose);
    update.velocities.emplace_back(k, init.velocity);

    if (fix) {
      const double s = std::max(fix->sigma, sg.gps_floor);
      update.factors.push_back(std::make_shared<GpsFactor>(k, fix->enu, NoiseModel::isotropic(3, s)));
    }
    if (ahrs)
      update.factors.push_back(std::make_shared<AttitudeFactor>(k, *ahrs, NoiseModel::isotropic(2, sg.attitude)));
    if (auto yaw = index_.mag_at(t))
      update.factors.push_back(std::make_shared<HeadingFactor>(k, *yaw, NoiseModel::isotropic(2, sg.heading)));
    update.factors.push_back(std::make_shared<NonholonomicFactor>(
        k, NoiseModel::isotropic(2, sg.nonholonomic).with_huber(sg.nonholonomic_huber / sg.nonholonomic)));

    const Pose camera = init.pose * extrinsic_;
    if (slots[slot].frame) observe_frame(k, t, detections_.frames[*slots[slot].frame], camera, update);

    if (config_.deferred_commitment) {
      std::vector<std::int64_t> ready;
      for (auto& [id, buffer] : buffers_)
        if (should_commit(buffer, camera, detections_.camera, config_.perception.z_min, config_.perception.z_max, t,
                          config_.association))
          ready.push_back(id);
      for (std::int64_t id : ready)
        absorb(commit(buffers_, id, registry_, next_landmark_, config_.association, extrinsic_), update);
    }
    apply(update);
  }

  std::vector<ImuSample> index_imu(double ta, double tb) const { return index_.imu_between(ta, tb); }

  void observe_frame(std::int64_t k, double t, const DetectionFrame& frame, const Pose& camera, GraphUpdate& update) {
    const PerceptionConfig& pc = config_.perception;
    result_.diagnostics.detections += frame.detections.size();
    const std::vector<Detection> kept =
        filter_detections(frame.detections, pc.theta_conf, pc.allowed_classes, pc.theta_iou);
    result_.diagnostics.detections_kept += kept.size();
    for (const Detection& det : kept) {
      const auto obs = observe(det, detections_.camera, pc);
      if (!obs) continue;
      ++result_.diagnostics.observations;
      if (config_.deferred_commitment) {
        buffer_observation(buffers_, *obs, k, t, camera, sigma_xyz_);
        if (buffers_.at(obs->track_id).class_conflict) conflicted_.insert(obs->track_id);
        continue;
      }
      // Immediate commitment: the tracker identity still links sightings.
      const Vec3 world = camera.transform(obs->point);
      std::int64_t target;
      if (auto it = track_landmark_.find(obs->track_id); it != track_landmark_.end()) {
        target = it->second;
      } else if (auto m = find_merge_target(world, obs->cls, registry_, config_.association)) {
        target = *m;
        ++result_.diagnostics.merges;
      } else {
        target = next_landmark_++;
        registry_.emplace(target, LandmarkRecord{obs->cls, world, 0});
        update.landmarks.push_back({target, obs->cls, world});
        ++result_.diagnostics.landmarks_created;
      }
      track_landmark_[obs->track_id] = target;
      ++registry_.at(target).support;
      update.factors.push_back(std::make_shared<BearingRangeFactor>(
          k, target, cartesian_to_bearing_range(obs->point, sigma_xyz_), extrinsic_));
    }
  }

  void absorb(Commitment c, GraphUpdate& update) {
    result_.diagnostics.rejected_observations += c.outliers;
    switch (c.outcome) {
      case CommitOutcome::kCreated: ++result_.diagnostics.landmarks_created; break;
      case CommitOutcome::kMerged: ++result_.diagnostics.merges; break;
      case CommitOutcome::kDiscarded: ++result_.diagnostics.discarded_tracks; break;
    }
    for (auto& l : c.update.landmarks) update.landmarks.push_back(l);
    for (auto& f : c.update.factors) update.factors.push_back(std::move(f));
  }

  void apply(const GraphUpdate& update) {
    for (const auto& [i, p] : update.poses) result_.initial_values.poses.emplace(i, p);
    for (const auto& [i, v] : update.velocities) result_.initial_values.velocities.emplace(i, v);
    for (const auto& l : update.landmarks) result_.initial_values.landmarks.emplace(l.index, l.position);
    for (const auto& f : update.factors) {
      const auto& keys = f->keys();
      for (const Key& a : keys)
        for (const Key& b : keys)
          if (a.kind == VarKind::kPose && b.kind == VarKind::kLandmark) observed_[a.index].insert(b.index);
    }
    if (config_.incremental) {
      LmConfig lm = config_.batch;
      lm.max_iters = config_.incremental_iters;
      if (config_.incremental_window <= 0) {
        incremental_update(graph_, update, lm);
      } else {
        incremental_update(graph_, update, lm, window_variables(update));
      }
    } else {
      for (const auto& [i, p] : update.poses) graph_.add_pose(i, p);
      for (const auto& [i, v] : update.velocities) graph_.add_velocity(i, v);
      for (const auto& l : update.landmarks) graph_.add_landmark(l.index, l.cls, l.position);
      for (const auto& f : update.factors) graph_.add_factor(f);
    }
    for (auto& [id, rec] : registry_) rec.position = graph_.values().landmark(id);
  }

  std::set<Key> window_variables(const GraphUpdate& update) const {
    std::int64_t newest = -1;
    for (const auto& [i, _] : graph_.values().poses) newest = std::max(newest, i);
    for (const auto& [i, _] : update.poses) newest = std::max(newest, i);
    std::set<Key> free;
    for (std::int64_t k = std::max<std::int64_t>(0, newest - config_.incremental_window + 1); k <= newest; ++k) {
      free.insert(pose_key(k));
      free.insert(velocity_key(k));
      if (auto it = observed_.find(k); it != observed_.end())
        for (std::int64_t l : it->second) free.insert(landmark_key(l));
    }
    for (const auto& l : update.landmarks) free.insert(landmark_key(l.index));
    return free;
  }

  const SensorLog& sensors_;
  const DetectionLog& detections_;
  const PipelineConfig& config_;
  SensorIndex index_;
  Pose extrinsic_;
  Vec3 gravity_;
  Mat3 sigma_xyz_;
  FactorGraph graph_;
  TrackBuffers buffers_;
  LandmarkRegistry registry_;
  std::map<std::int64_t, std::int64_t> track_landmark_;
  std::set<std::int64_t> conflicted_;
  std::map<std::int64_t, std::set<std::int64_t>> observed_;  // keyframe -> landmarks
  std::int64_t next_landmark_ = 0;
  MapResult result_;
};

}  // namespace

MapResult run_pipeline(const SensorLog& sensors, const DetectionLog& detections, const PipelineConfig& config) {
  Mapper mapper(sensors, detections, config);
  MapResult r = mapper.run();
  return r;
}

}  // namespace vinemap
