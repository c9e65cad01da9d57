#include "vinemap/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>

namespace vinemap {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kGravity = 9.81;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// Fraction of the U-turn heading swept at normalized time tau.
double turn_profile(double tau) { return tau - std::sin(2.0 * kPi * tau) / (2.0 * kPi); }

// Lateral displacement of a unit-speed, unit-duration U-turn.
double turn_lateral_factor() {
  constexpr int n = 4000;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    s += w * std::sin(kPi * turn_profile(static_cast<double>(i) / n));
  }
  return s / (3.0 * n);
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

double quantize(double x, double step) { return std::round(x / step) * step; }

}  // namespace

void WorldConfig::validate() const {
  require(rows >= 1, "world.rows must be at least 1");
  require(row_length > 0.0, "world.row_length must be positive");
  require(row_spacing > 0.0, "world.row_spacing must be positive");
  require(pole_spacing > 0.0, "world.pole_spacing must be positive");
  require(trunk_spacing > 0.0, "world.trunk_spacing must be positive");
  require(jitter_sigma >= 0.0, "world.jitter_sigma must be non-negative");
  require(pole_radius > 0.0 && trunk_radius > 0.0, "world radii must be positive");
  require(pole_height > 0.0 && trunk_height > 0.0, "world heights must be positive");
  datum.validate();
}

std::vector<GroundTruthLandmark> generate_world(const WorldConfig& config) {
  config.validate();
  std::mt19937_64 rng = make_stream(config.seed, 0);
  std::normal_distribution<double> jitter(0.0, 1.0);
  auto jit = [&] { return config.jitter_sigma > 0.0 ? config.jitter_sigma * jitter(rng) : 0.0; };

  const int poles = static_cast<int>(std::floor(config.row_length / config.pole_spacing + 1e-9)) + 1;
  std::vector<GroundTruthLandmark> out;
  std::int64_t id = 0;
  for (int r = 0; r < config.rows; ++r) {
    const double north = r * config.row_spacing;
    for (int k = 0; k < poles; ++k) {
      const double east = k * config.pole_spacing;
      GroundTruthLandmark pole{id++, LandmarkClass::kPole, r, Vec3(east, north, 0.0), config.pole_height,
                               config.pole_radius};
      pole.position.x() += jit();
      pole.position.y() += jit();
      out.push_back(pole);
      if (k + 1 == poles) break;
      for (int j = 1; j * config.trunk_spacing < config.pole_spacing - 1e-9; ++j) {
        GroundTruthLandmark trunk{id++, LandmarkClass::kTrunk, r,
                                  Vec3(east + j * config.trunk_spacing, north, 0.0), config.trunk_height,
                                  config.trunk_radius};
        trunk.position.x() += jit();
        trunk.position.y() += jit();
        out.push_back(trunk);
      }
    }
  }
  return out;
}

void TrajectoryConfig::validate() const {
  require(v_max > 0.0, "trajectory.v_max must be positive");
  require(omega_max > 0.0, "trajectory.omega_max must be positive");
  require(headland >= 0.0, "trajectory.headland must be non-negative");
  require(ramp_time > 0.0, "trajectory.ramp_time must be positive");
  require(hold_time >= 0.0, "trajectory.hold_time must be non-negative");
  require(rate > 0.0, "trajectory.rate must be positive");
  require(oscillation_period > 0.0, "trajectory.oscillation_period must be positive");
}

Trajectory::Trajectory(const WorldConfig& world, const TrajectoryConfig& config) : config_(config) {
  world.validate();
  config.validate();
  const double c = turn_lateral_factor();
  const double s = world.row_spacing;
  // Peak yaw rate of the U-turn is 2 pi / T with T = s / (v c).
  cruise_ = std::min(config.v_max, config.omega_max * s / (2.0 * kPi * c));
  turn_time_ = s / (cruise_ * c);
  const double lane_length = world.row_length + 2.0 * config.headland;
  const double ramp_dist = 0.5 * cruise_ * config.ramp_time;
  if (lane_length < 2.0 * ramp_dist) throw std::invalid_argument("trajectory: lanes too short for the speed ramps");

  double t = 0.0;
  Vec2 p(-config.headland, -0.5 * s);
  auto push = [&](Segment seg, double dur) {
    seg.t0 = t;
    seg.t1 = t + dur;
    seg.start = p;
    segments_.push_back(seg);
    p = integrate(segments_.back(), seg.t0, seg.t1, p);
    t = seg.t1;
  };

  if (config.hold_time > 0.0) push(Segment{Segment::kHold, 0, 0, 0.0}, config.hold_time);
  for (int lane = 0; lane < world.rows; ++lane) {
    const double yaw = lane % 2 == 0 ? 0.0 : kPi;
    Segment straight{Segment::kStraight, 0, 0, yaw};
    straight.ramp_up = lane == 0;
    straight.ramp_down = lane + 1 == world.rows;
    const int ramps = (straight.ramp_up ? 1 : 0) + (straight.ramp_down ? 1 : 0);
    push(straight, (lane_length - ramps * ramp_dist) / cruise_ + ramps * config.ramp_time);
    if (lane + 1 < world.rows) {
      Segment turn{Segment::kTurn, 0, 0, yaw};
      turn.turn_sign = lane % 2 == 0 ? 1.0 : -1.0;
      push(turn, turn_time_);
    }
  }
  if (config.hold_time > 0.0) push(Segment{Segment::kHold, 0, 0, segments_.back().yaw0}, config.hold_time);
  duration_ = t;

  const auto n = static_cast<std::size_t>(std::floor(duration_ * config.rate + 1e-9));
  samples_.reserve(n + 1);
  std::size_t seg = 0;
  Vec2 xy = segments_.front().start;
  double prev_t = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double tk = static_cast<double>(k) / config.rate;
    while (seg + 1 < segments_.size() && tk > segments_[seg].t1) {
      xy = integrate(segments_[seg], prev_t, segments_[seg].t1, xy);
      prev_t = segments_[seg].t1;
      ++seg;
      xy = segments_[seg].start;
    }
    xy = integrate(segments_[seg], prev_t, tk, xy);
    prev_t = tk;
    samples_.push_back(make_sample(tk, xy));
  }
}

Trajectory::Kinematics Trajectory::kinematics(const Segment& s, double t) const {
  const double tau = t - s.t0;
  const double dur = s.t1 - s.t0;
  switch (s.kind) {
    case Segment::kHold: return {0.0, 0.0, s.yaw0, 0.0};
    case Segment::kTurn: {
      const double x = std::clamp(tau / dur, 0.0, 1.0);
      return {cruise_, 0.0, s.yaw0 + s.turn_sign * kPi * turn_profile(x),
              s.turn_sign * kPi * (1.0 - std::cos(2.0 * kPi * x)) / dur};
    }
    case Segment::kStraight: {
      const double tr = config_.ramp_time;
      double v = cruise_, a = 0.0;
      if (s.ramp_up && tau < tr) {
        v = 0.5 * cruise_ * (1.0 - std::cos(kPi * tau / tr));
        a = 0.5 * cruise_ * kPi / tr * std::sin(kPi * tau / tr);
      } else if (s.ramp_down && tau > dur - tr) {
        const double r = dur - tau;
        v = 0.5 * cruise_ * (1.0 - std::cos(kPi * r / tr));
        a = -0.5 * cruise_ * kPi / tr * std::sin(kPi * r / tr);
      }
      double yaw = s.yaw0, rate = 0.0;
      if (config_.oscillation_amplitude != 0.0) {
        const double cycles = std::max(1.0, std::round(dur / config_.oscillation_period));
        const double w = 2.0 * kPi * cycles / dur;
        yaw += config_.oscillation_amplitude * std::sin(w * tau);
        rate = config_.oscillation_amplitude * w * std::cos(w * tau);
      }
      return {v, a, yaw, rate};
    }
  }
  return {0.0, 0.0, 0.0, 0.0};
}

Vec2 Trajectory::integrate(const Segment& s, double from, double to, Vec2 p) const {
  if (!(to > from) || s.kind == Segment::kHold) return p;
  const int n = 2 * std::max(1, static_cast<int>(std::ceil((to - from) / 2e-3)));
  const double h = (to - from) / n;
  Vec2 acc = Vec2::Zero();
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const Kinematics k = kinematics(s, from + i * h);
    acc += w * k.speed * Vec2(std::cos(k.yaw), std::sin(k.yaw));
  }
  return p + acc * h / 3.0;
}

const Trajectory::Segment& Trajectory::segment_at(double t) const {
  for (const Segment& s : segments_)
    if (t <= s.t1) return s;
  return segments_.back();
}

TrajectorySample Trajectory::make_sample(double t, const Vec2& xy) const {
  const Kinematics k = kinematics(segment_at(t), t);
  const Vec2 dir(std::cos(k.yaw), std::sin(k.yaw));
  const Vec2 left(-dir.y(), dir.x());
  TrajectorySample out;
  out.t = t;
  out.pose = Pose(Rotation::yaw(k.yaw), Vec3(xy.x(), xy.y(), 0.0));
  out.velocity = Vec3(k.speed * dir.x(), k.speed * dir.y(), 0.0);
  out.angular_velocity = Vec3(0.0, 0.0, k.yaw_rate);
  const Vec2 a = k.accel * dir + k.speed * k.yaw_rate * left;
  out.acceleration = Vec3(a.x(), a.y(), 0.0);
  return out;
}

TrajectorySample Trajectory::at(double t) const {
  t = std::clamp(t, 0.0, duration_);
  const double k = t * config_.rate;
  const auto kr = static_cast<std::size_t>(std::llround(k));
  if (std::abs(k - static_cast<double>(kr)) < 1e-6 && kr < samples_.size()) return samples_[kr];
  const Segment& s = segment_at(t);
  auto base = static_cast<std::size_t>(std::floor(k));
  base = std::min(base, samples_.size() - 1);
  Vec2 xy;
  double from;
  if (samples_[base].t >= s.t0) {
    xy = samples_[base].pose.translation().head<2>();
    from = samples_[base].t;
  } else {
    xy = s.start;
    from = s.t0;
  }
  return make_sample(t, integrate(s, from, t, xy));
}

double Trajectory::max_yaw_rate() const {
  double m = 0.0;
  for (const auto& s : samples_) m = std::max(m, std::abs(s.angular_velocity.z()));
  return m;
}

Trajectory generate_trajectory(const WorldConfig& world, const TrajectoryConfig& config) {
  return Trajectory(world, config);
}

NoiseConfig NoiseConfig::noiseless() {
  NoiseConfig n;
  n.gps_sigma = 0.0;
  n.imu.gyro_density = 0.0;
  n.imu.accel_density = 0.0;
  n.ahrs_roll_pitch_sigma = 0.0;
  n.ahrs_yaw_sigma = 0.0;
  n.mag_yaw_sigma = 0.0;
  n.depth_sigma = 0.0;
  n.depth_outlier_prob = 0.0;
  n.detection_drop_prob = 0.0;
  n.track_break_prob = 0.0;
  n.false_detection_rate = 0.0;
  n.false_id_switch_prob = 0.0;
  n.confidence_sigma = 0.0;
  n.surface_relief = false;
  return n;
}

void NoiseConfig::validate() const {
  for (double p : {depth_outlier_prob, detection_drop_prob, track_break_prob, false_id_switch_prob})
    require(p >= 0.0 && p <= 1.0, "noise probabilities must lie in [0, 1]");
  for (double s : {gps_sigma, imu.gyro_density, imu.accel_density, ahrs_roll_pitch_sigma, ahrs_yaw_sigma,
                   mag_yaw_sigma, depth_sigma, depth_outlier_scale, false_detection_rate, confidence_sigma})
    require(s >= 0.0, "noise magnitudes must be non-negative");
  require(confidence_mean >= 0.0 && confidence_mean <= 1.0, "noise.confidence_mean must lie in [0, 1]");
}

Pose SensorRig::default_extrinsic() {
  // Camera axes in the body frame: x right = -y_b, y down = -z_b, z forward = x_b.
  Mat3 r;
  r << 0, 0, 1,
      -1, 0, 0,
       0, -1, 0;
  return Pose(Rotation(r), Vec3(0.3, 0.0, 0.5));
}

void SensorRig::validate() const {
  camera.validate();
  for (double r : {imu_rate, gps_rate, ahrs_rate, mag_rate, camera_rate})
    require(r > 0.0, "sensor rates must be positive");
  require(samples_per_detection >= 5, "samples_per_detection must be at least 5");
  require(z_min > 0.0 && z_max > z_min, "sensor depth range must satisfy 0 < z_min < z_max");
}

namespace {

struct Cylinder {
  Vec3 base;
  double radius;
  double height;
};

class Renderer {
 public:
  Renderer(const SensorRig& rig, const NoiseConfig& noise) : rig_(rig), noise_(noise) {}

  int rows() const { return std::max(1, rig_.samples_per_detection / kColumns); }

  // True when some axis sample falls inside the image and depth range.
  bool visible(const Cylinder& c, const Pose& cam) const {
    const Vec3 b = cam.inverse_transform(c.base);
    if (b.z() < rig_.z_min - c.radius || b.z() > rig_.z_max + c.radius) return false;
    if (std::abs(b.x()) > b.z() * (rig_.camera.width / rig_.camera.fx) + 1.0) return false;
    for (int j = 0; j < rows(); ++j) {
      const Vec3 p = cam.inverse_transform(axis_point(c, j));
      if (p.z() < rig_.z_min || p.z() > rig_.z_max) continue;
      const Vec2 px = rig_.camera.project(p);
      if (rig_.camera.contains(px.x(), px.y())) return true;
    }
    return false;
  }

  std::optional<Detection> render(const Cylinder& c, const Pose& cam, std::mt19937_64& rng) const {
    Detection det;
    const CameraIntrinsics& k = rig_.camera;
    double u0 = k.width, u1 = 0.0, v0 = k.height, v1 = 0.0;
    const double pitch = c.height / rows();
    static constexpr double kOffsets[kColumns] = {-0.8, -0.4, 0.0, 0.4, 0.8};
    for (int j = 0; j < rows(); ++j) {
      const Vec3 p = cam.inverse_transform(axis_point(c, j));
      if (p.z() < rig_.z_min || p.z() > rig_.z_max) continue;
      const Vec2 axis_px = k.project(p);
      const double half_width = c.radius * k.fx / p.z();
      const double half_pitch = 0.5 * pitch * k.fy / p.z();
      // Rows truncated by the left or right border are not sampled.
      if (!k.contains(axis_px.x() + kOffsets[0] * half_width, axis_px.y()) ||
          !k.contains(axis_px.x() + kOffsets[kColumns - 1] * half_width, axis_px.y()))
        continue;
      for (double o : kOffsets) {
        const double u = axis_px.x() + o * half_width;
        const double v = axis_px.y();
        if (!k.contains(u, v)) continue;
        double z = p.z();
        if (noise_.surface_relief) {
          const auto hit = surface_depth(c, cam, u, v);
          if (!hit) continue;
          z = *hit;
        }
        z += depth_noise(rng);
        det.samples.push_back({quantize(u, 0.01), quantize(v, 0.01), quantize(z, 1e-4)});
      }
      u0 = std::min(u0, axis_px.x() - half_width);
      u1 = std::max(u1, axis_px.x() + half_width);
      v0 = std::min(v0, axis_px.y() - half_pitch);
      v1 = std::max(v1, axis_px.y() + half_pitch);
    }
    if (det.samples.empty()) return std::nullopt;
    det.bbox = {quantize(std::max(0.0, u0), 0.01), quantize(std::max(0.0, v0), 0.01),
                quantize(std::min<double>(k.width, u1), 0.01), quantize(std::min<double>(k.height, v1), 0.01)};
    return det;
  }

 private:
  static constexpr int kColumns = 5;

  Vec3 axis_point(const Cylinder& c, int row) const {
    return c.base + Vec3(0.0, 0.0, (row + 0.5) / rows() * c.height);
  }

  // Camera-frame depth of the first intersection of the pixel ray with the
  // cylinder's side surface.
  std::optional<double> surface_depth(const Cylinder& c, const Pose& cam, double u, double v) const {
    const CameraIntrinsics& k = rig_.camera;
    const Vec3 d = cam.rotation() * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
    const Vec3 o = cam.translation();
    const Vec2 oc = o.head<2>() - c.base.head<2>();
    const Vec2 dh = d.head<2>();
    const double a = dh.squaredNorm();
    const double b = 2.0 * oc.dot(dh);
    const double cc = oc.squaredNorm() - c.radius * c.radius;
    const double disc = b * b - 4.0 * a * cc;
    if (a < 1e-12 || disc < 0.0) return std::nullopt;
    const double t = (-b - std::sqrt(disc)) / (2.0 * a);
    if (t <= 0.0) return std::nullopt;
    const double h = o.z() + t * d.z() - c.base.z();
    if (h < 0.0 || h > c.height) return std::nullopt;
    return t;  // the ray's camera-frame z component is 1
  }

  double depth_noise(std::mt19937_64& rng) const {
    double e = 0.0;
    if (noise_.depth_sigma > 0.0) {
      e += std::normal_distribution<double>(0.0, noise_.depth_sigma)(rng);
      if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < noise_.depth_outlier_prob)
        e += std::abs(std::normal_distribution<double>(0.0, noise_.depth_outlier_scale * noise_.depth_sigma)(rng));
    }
    return e;
  }

  const SensorRig& rig_;
  const NoiseConfig& noise_;
};

double gaussian(std::mt19937_64& rng, double sigma) {
  return sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0;
}

}  // namespace

SimulatedLogs synthesize_logs(const WorldConfig& world, const std::vector<GroundTruthLandmark>& landmarks,
                              const Trajectory& trajectory, const NoiseConfig& noise, const SensorRig& rig,
                              std::uint64_t seed) {
  noise.validate();
  rig.validate();
  SimulatedLogs out;
  const double duration = trajectory.duration();
  const Vec3 g_world(0.0, 0.0, -kGravity);

  {
    std::mt19937_64 rng = make_stream(seed, 1);
    const double sg = noise.imu.gyro_density * std::sqrt(rig.imu_rate);
    const double sa = noise.imu.accel_density * std::sqrt(rig.imu_rate);
    for (std::int64_t i = 0;; ++i) {
      const double t = static_cast<double>(i) / rig.imu_rate;
      if (t > duration + 1e-9) break;
      const TrajectorySample s = trajectory.at(t);
      ImuSample m;
      m.t = t;
      m.angular_velocity = s.angular_velocity + Vec3(gaussian(rng, sg), gaussian(rng, sg), gaussian(rng, sg));
      m.linear_acceleration = s.pose.rotation().inverse() * (s.acceleration - g_world) +
                              Vec3(gaussian(rng, sa), gaussian(rng, sa), gaussian(rng, sa));
      out.sensors.imu.push_back(m);
    }
  }
  {
    std::mt19937_64 rng = make_stream(seed, 2);
    for (std::int64_t i = 0;; ++i) {
      const double t = static_cast<double>(i) / rig.gps_rate;
      if (t > duration + 1e-9) break;
      const Vec3 p = trajectory.at(t).pose.translation() +
                     Vec3(gaussian(rng, noise.gps_sigma), gaussian(rng, noise.gps_sigma), gaussian(rng, noise.gps_sigma));
      const GeodeticDatum g = enu_to_geodetic(p, world.datum);
      out.sensors.gps.push_back({t, g.latitude_deg, g.longitude_deg, g.altitude_m, noise.gps_sigma});
    }
  }
  {
    std::mt19937_64 rng = make_stream(seed, 3);
    for (std::int64_t i = 0;; ++i) {
      const double t = static_cast<double>(i) / rig.ahrs_rate;
      if (t > duration + 1e-9) break;
      const Vec3 rpy = trajectory.at(t).pose.rotation().rpy();
      out.sensors.ahrs.push_back({t, rpy.x() + gaussian(rng, noise.ahrs_roll_pitch_sigma),
                                  rpy.y() + gaussian(rng, noise.ahrs_roll_pitch_sigma),
                                  wrap_angle(rpy.z() + gaussian(rng, noise.ahrs_yaw_sigma))});
    }
  }
  {
    std::mt19937_64 rng = make_stream(seed, 4);
    for (std::int64_t i = 0;; ++i) {
      const double t = static_cast<double>(i) / rig.mag_rate;
      if (t > duration + 1e-9) break;
      const double yaw = trajectory.at(t).pose.rotation().yaw_angle();
      out.sensors.mag.push_back({t, wrap_angle(yaw + gaussian(rng, noise.mag_yaw_sigma))});
    }
  }

  // Detections. Pass 1 finds visibility episodes so track identities can be
  // assigned per episode, with an optional break at the episode midpoint.
  out.detections.camera = rig.camera;
  out.detections.body_to_camera = rig.body_to_camera;
  const Renderer renderer(rig, noise);
  std::vector<double> frame_times;
  std::vector<Pose> cams;
  for (std::int64_t i = 0;; ++i) {
    const double t = static_cast<double>(i) / rig.camera_rate;
    if (t > duration + 1e-9) break;
    frame_times.push_back(t);
    cams.push_back(trajectory.at(t).pose * rig.body_to_camera);
  }
  const std::size_t nf = frame_times.size();
  std::vector<Cylinder> cyl;
  for (const auto& l : landmarks) cyl.push_back({l.position, l.radius, l.height});

  // segment_of[f][l] = per-landmark track segment index, or -1 if not visible.
  std::vector<std::vector<int>> segment_of(nf, std::vector<int>(landmarks.size(), -1));
  {
    std::mt19937_64 rng = make_stream(seed, 5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t l = 0; l < landmarks.size(); ++l) {
      int next_segment = 0;
      std::size_t f = 0;
      while (f < nf) {
        if (!renderer.visible(cyl[l], cams[f])) {
          ++f;
          continue;
        }
        std::size_t e = f;
        while (e < nf && renderer.visible(cyl[l], cams[e])) ++e;
        const std::size_t mid = f + (e - f) / 2;
        const bool split = e - f >= 2 && unit(rng) < noise.track_break_prob;
        const int first = next_segment++;
        const int second = split ? next_segment++ : first;
        for (std::size_t x = f; x < e; ++x) segment_of[x][l] = x >= mid ? second : first;
        f = e;
      }
    }
  }

  std::mt19937_64 rng = make_stream(seed, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::map<std::pair<std::size_t, int>, std::int64_t> track_ids;
  std::int64_t next_track = 1;
  const double half_fov = std::atan(0.5 * rig.camera.width / rig.camera.fx);
  for (std::size_t f = 0; f < nf; ++f) {
    DetectionFrame frame;
    frame.t = frame_times[f];
    for (std::size_t l = 0; l < landmarks.size(); ++l) {
      const int seg = segment_of[f][l];
      if (seg < 0) continue;
      auto [it, fresh] = track_ids.try_emplace({l, seg}, next_track);
      if (fresh) ++next_track;
      if (unit(rng) < noise.detection_drop_prob) continue;
      auto det = renderer.render(cyl[l], cams[f], rng);
      if (!det) continue;
      det->t = frame.t;
      det->track_id = it->second;
      det->cls = landmarks[l].cls;
      det->confidence =
          quantize(std::clamp(noise.confidence_mean + gaussian(rng, noise.confidence_sigma), 0.0, 1.0), 1e-4);
      frame.detections.push_back(std::move(*det));
    }
    const std::size_t true_count = frame.detections.size();

    int n_false = 0;
    if (noise.false_detection_rate > 0.0)
      n_false = std::poisson_distribution<int>(noise.false_detection_rate)(rng);
    for (int i = 0; i < n_false; ++i) {
      const double d = rig.z_min + 0.5 + unit(rng) * (rig.z_max - rig.z_min - 1.0);
      const double ang = (2.0 * unit(rng) - 1.0) * 0.9 * half_fov;
      const bool pole = unit(rng) < 0.5;
      Vec3 base = cams[f].transform(Vec3(d * std::tan(ang), 0.0, d));
      base.z() = 0.0;
      const Cylinder phantom{base, pole ? world.pole_radius : world.trunk_radius,
                             pole ? world.pole_height : world.trunk_height};
      auto det = renderer.render(phantom, cams[f], rng);
      const double conf = quantize(0.5 + 0.5 * unit(rng), 1e-4);
      const bool switch_id = true_count > 0 && unit(rng) < noise.false_id_switch_prob;
      const std::size_t victim = true_count > 0 ? static_cast<std::size_t>(unit(rng) * true_count) % true_count : 0;
      if (!det) continue;
      det->t = frame.t;
      det->confidence = conf;
      if (switch_id) {
        // The tracker hands a real identity to the spurious blob.
        Detection& v = frame.detections[victim];
        det->track_id = v.track_id;
        det->cls = v.cls;
        v = std::move(*det);
      } else {
        det->track_id = next_track++;
        det->cls = pole ? LandmarkClass::kPole : LandmarkClass::kTrunk;
        frame.detections.push_back(std::move(*det));
      }
    }
    out.detections.frames.push_back(std::move(frame));
  }
  return out;
}

}  // namespace vinemap
