#include "vinemap/config.hpp"

#include "vinemap/errors.hpp"
#include "vinemap/io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <sstream>

namespace vinemap {

namespace {

using nlohmann::json;

enum class Check { kAny, kPositive, kNonNegative, kProbability };

// Walks one JSON object either reading fields into a struct or writing the
// struct out, so both directions share one field list.
class Binder {
 public:
  static Binder reader(const json& in, std::string path) { return Binder(&in, nullptr, std::move(path)); }
  static Binder writer(json& out) { return Binder(nullptr, &out, ""); }

  bool reading() const { return in_ != nullptr; }

  void field(const char* key, double& v, Check check = Check::kAny) {
    if (writing()) {
      (*out_)[key] = v;
      return;
    }
    const json* j = take(key);
    if (!j) return;
    if (!j->is_number()) fail(key, "expected a number");
    const double x = j->get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    validate(key, x, check);
    v = x;
  }

  void field(const char* key, int& v, Check check = Check::kAny) {
    if (writing()) {
      (*out_)[key] = v;
      return;
    }
    const json* j = take(key);
    if (!j) return;
    if (!j->is_number_integer()) fail(key, "expected an integer");
    const auto x = j->get<std::int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) fail(key, "out of range");
    validate(key, static_cast<double>(x), check);
    v = static_cast<int>(x);
  }

  void field(const char* key, std::size_t& v) {
    if (writing()) {
      (*out_)[key] = v;
      return;
    }
    const json* j = take(key);
    if (!j) return;
    if (!j->is_number_integer() || j->get<std::int64_t>() < 0) fail(key, "expected a non-negative integer");
    v = j->get<std::size_t>();
  }

  void field(const char* key, std::uint64_t& v, bool) {
    if (writing()) {
      (*out_)[key] = v;
      return;
    }
    const json* j = take(key);
    if (!j) return;
    if (!j->is_number_integer() || (j->is_number_integer() && !j->is_number_unsigned() && j->get<std::int64_t>() < 0))
      fail(key, "expected a non-negative integer");
    v = j->get<std::uint64_t>();
  }

  void field(const char* key, bool& v) {
    if (writing()) {
      (*out_)[key] = v;
      return;
    }
    const json* j = take(key);
    if (!j) return;
    if (!j->is_boolean()) fail(key, "expected true or false");
    v = j->get<bool>();
  }

  void field(const char* key, Vec3& v) {
    if (writing()) {
      (*out_)[key] = {v.x(), v.y(), v.z()};
      return;
    }
    const json* j = take(key);
    if (!j) return;
    if (!j->is_array() || j->size() != 3) fail(key, "expected an array of 3 numbers");
    for (int i = 0; i < 3; ++i) {
      if (!(*j)[i].is_number()) fail(key, "expected an array of 3 numbers");
      v(i) = (*j)[i].get<double>();
    }
  }

  void field(const char* key, LandmarkClass& v) {
    if (writing()) {
      (*out_)[key] = std::string(to_string(v));
      return;
    }
    const json* j = take(key);
    if (!j) return;
    v = parse_class(key, *j);
  }

  void field(const char* key, std::vector<LandmarkClass>& v) {
    if (writing()) {
      json arr = json::array();
      for (LandmarkClass c : v) arr.push_back(std::string(to_string(c)));
      (*out_)[key] = arr;
      return;
    }
    const json* j = take(key);
    if (!j) return;
    if (!j->is_array()) fail(key, "expected an array of class names");
    std::vector<LandmarkClass> out;
    for (const json& e : *j) {
      const LandmarkClass c = parse_class(key, e);
      if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    v = out;
  }

  void field(const char* key, Pose& v) {
    if (writing()) {
      const Mat3 r = v.rotation().matrix();
      json rot = json::array();
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) rot.push_back(r(i, k));
      const Vec3& t = v.translation();
      (*out_)[key] = {{"rotation", rot}, {"translation", {t.x(), t.y(), t.z()}}};
      return;
    }
    const json* j = take(key);
    if (!j) return;
    v = parse_pose(path_ + key, *j);
  }

  void field(const char* key, std::optional<Pose>& v) {
    if (writing()) {
      if (v) {
        field(key, *v);
      } else {
        (*out_)[key] = nullptr;
      }
      return;
    }
    const json* j = take(key);
    if (!j) return;
    if (j->is_null()) {
      v.reset();
      return;
    }
    v = parse_pose(path_ + key, *j);
  }

  template <typename Fn>
  void object(const char* key, Fn&& fn) {
    if (writing()) {
      json sub = json::object();
      Binder b(nullptr, &sub, "");
      fn(b);
      (*out_)[key] = sub;
      return;
    }
    const json* j = take(key);
    if (!j) return;
    if (!j->is_object()) fail(key, "expected an object");
    Binder b(j, nullptr, path_ + key + ".");
    fn(b);
    b.finish();
  }

  /// Reads an optional string key without writing it back.
  std::optional<std::string> directive(const char* key) {
    if (writing()) return std::nullopt;
    const json* j = take(key);
    if (!j) return std::nullopt;
    if (!j->is_string()) fail(key, "expected a string");
    return j->get<std::string>();
  }

  [[noreturn]] void fail(const char* key, const std::string& msg) const { throw ConfigError(path_ + key, msg); }
  const std::string& path() const { return path_; }

  void finish() const {
    for (auto it = in_->begin(); it != in_->end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(path_ + it.key(), "unknown field");
  }

 private:
  Binder(const json* in, json* out, std::string path) : in_(in), out_(out), path_(std::move(path)) {}

  bool writing() const { return out_ != nullptr; }

  const json* take(const char* key) {
    seen_.insert(key);
    auto it = in_->find(key);
    return it == in_->end() ? nullptr : &*it;
  }

  void validate(const char* key, double x, Check check) const {
    switch (check) {
      case Check::kAny: break;
      case Check::kPositive:
        if (!(x > 0.0)) fail(key, "must be positive");
        break;
      case Check::kNonNegative:
        if (!(x >= 0.0)) fail(key, "must be non-negative");
        break;
      case Check::kProbability:
        if (!(x >= 0.0 && x <= 1.0)) fail(key, "must lie in [0, 1]");
        break;
    }
  }

  LandmarkClass parse_class(const char* key, const json& j) const {
    if (j.is_string()) {
      if (auto c = parse_landmark_class(j.get<std::string>())) return *c;
    } else if (j.is_number_integer()) {
      if (auto c = landmark_class_from_int(j.get<int>())) return *c;
    }
    fail(key, "expected a class name (trunk or pole)");
  }

  static Pose parse_pose(const std::string& path, const json& j) {
    if (!j.is_object()) throw ConfigError(path, "expected an object with rotation and translation");
    for (auto it = j.begin(); it != j.end(); ++it)
      if (it.key() != "rotation" && it.key() != "translation") throw ConfigError(path + "." + it.key(), "unknown field");
    Mat3 r = Mat3::Identity();
    Vec3 t = Vec3::Zero();
    if (auto it = j.find("rotation"); it != j.end()) {
      if (!it->is_array() || it->size() != 9) throw ConfigError(path + ".rotation", "expected 9 numbers (row-major)");
      for (int i = 0; i < 9; ++i) {
        if (!(*it)[i].is_number()) throw ConfigError(path + ".rotation", "expected 9 numbers (row-major)");
        r(i / 3, i % 3) = (*it)[i].get<double>();
      }
      if ((r.transpose() * r - Mat3::Identity()).norm() > 1e-6 || std::abs(r.determinant() - 1.0) > 1e-6)
        throw ConfigError(path + ".rotation", "not a proper rotation matrix");
    }
    if (auto it = j.find("translation"); it != j.end()) {
      if (!it->is_array() || it->size() != 3) throw ConfigError(path + ".translation", "expected 3 numbers");
      for (int i = 0; i < 3; ++i) {
        if (!(*it)[i].is_number()) throw ConfigError(path + ".translation", "expected 3 numbers");
        t(i) = (*it)[i].get<double>();
      }
    }
    return Pose(Rotation(r), t);
  }

  const json* in_;
  json* out_;
  std::string path_;
  std::set<std::string> seen_;
};

void bind(Binder& b, GeodeticDatum& d) {
  b.field("latitude_deg", d.latitude_deg);
  b.field("longitude_deg", d.longitude_deg);
  b.field("altitude_m", d.altitude_m);
  if (b.reading() && (std::abs(d.latitude_deg) > 90.0 || std::abs(d.longitude_deg) > 180.0))
    b.fail("latitude_deg", "datum outside valid latitude/longitude range");
}

void bind(Binder& b, WorldConfig& w) {
  b.field("rows", w.rows, Check::kPositive);
  b.field("row_length", w.row_length, Check::kPositive);
  b.field("row_spacing", w.row_spacing, Check::kPositive);
  b.field("pole_spacing", w.pole_spacing, Check::kPositive);
  b.field("trunk_spacing", w.trunk_spacing, Check::kPositive);
  b.field("jitter_sigma", w.jitter_sigma, Check::kNonNegative);
  b.field("pole_radius", w.pole_radius, Check::kPositive);
  b.field("trunk_radius", w.trunk_radius, Check::kPositive);
  b.field("pole_height", w.pole_height, Check::kPositive);
  b.field("trunk_height", w.trunk_height, Check::kPositive);
  b.object("datum", [&](Binder& s) { bind(s, w.datum); });
}

void bind(Binder& b, TrajectoryConfig& t) {
  b.field("v_max", t.v_max, Check::kPositive);
  b.field("omega_max", t.omega_max, Check::kPositive);
  b.field("headland", t.headland, Check::kNonNegative);
  b.field("ramp_time", t.ramp_time, Check::kPositive);
  b.field("hold_time", t.hold_time, Check::kNonNegative);
  b.field("rate", t.rate, Check::kPositive);
  b.field("oscillation_amplitude", t.oscillation_amplitude);
  b.field("oscillation_period", t.oscillation_period, Check::kPositive);
}

void bind(Binder& b, NoiseConfig& n) {
  if (auto preset = b.directive("preset")) {
    if (*preset == "noiseless") {
      n = NoiseConfig::noiseless();
    } else if (*preset == "nominal") {
      n = NoiseConfig{};
    } else {
      b.fail("preset", "expected \"nominal\" or \"noiseless\"");
    }
  }
  b.field("gps_sigma", n.gps_sigma, Check::kNonNegative);
  b.field("gyro_density", n.imu.gyro_density, Check::kNonNegative);
  b.field("accel_density", n.imu.accel_density, Check::kNonNegative);
  b.field("ahrs_roll_pitch_sigma", n.ahrs_roll_pitch_sigma, Check::kNonNegative);
  b.field("ahrs_yaw_sigma", n.ahrs_yaw_sigma, Check::kNonNegative);
  b.field("mag_yaw_sigma", n.mag_yaw_sigma, Check::kNonNegative);
  b.field("depth_sigma", n.depth_sigma, Check::kNonNegative);
  b.field("depth_outlier_prob", n.depth_outlier_prob, Check::kProbability);
  b.field("depth_outlier_scale", n.depth_outlier_scale, Check::kNonNegative);
  b.field("detection_drop_prob", n.detection_drop_prob, Check::kProbability);
  b.field("track_break_prob", n.track_break_prob, Check::kProbability);
  b.field("false_detection_rate", n.false_detection_rate, Check::kNonNegative);
  b.field("false_id_switch_prob", n.false_id_switch_prob, Check::kProbability);
  b.field("confidence_mean", n.confidence_mean, Check::kProbability);
  b.field("confidence_sigma", n.confidence_sigma, Check::kNonNegative);
  b.field("surface_relief", n.surface_relief);
}

void bind(Binder& b, CameraIntrinsics& k) {
  b.field("fx", k.fx, Check::kPositive);
  b.field("fy", k.fy, Check::kPositive);
  b.field("cx", k.cx, Check::kPositive);
  b.field("cy", k.cy, Check::kPositive);
  b.field("width", k.width, Check::kPositive);
  b.field("height", k.height, Check::kPositive);
  if (b.reading() && (k.cx >= k.width || k.cy >= k.height)) b.fail("cx", "principal point outside the image");
}

void bind(Binder& b, SensorRig& r) {
  b.object("camera", [&](Binder& s) { bind(s, r.camera); });
  b.field("body_to_camera", r.body_to_camera);
  b.field("imu_rate", r.imu_rate, Check::kPositive);
  b.field("gps_rate", r.gps_rate, Check::kPositive);
  b.field("ahrs_rate", r.ahrs_rate, Check::kPositive);
  b.field("mag_rate", r.mag_rate, Check::kPositive);
  b.field("camera_rate", r.camera_rate, Check::kPositive);
  b.field("samples_per_detection", r.samples_per_detection, Check::kPositive);
  if (b.reading() && r.samples_per_detection < 5) b.fail("samples_per_detection", "must be at least 5");
  b.field("z_min", r.z_min, Check::kPositive);
  b.field("z_max", r.z_max, Check::kPositive);
  if (b.reading() && r.z_max <= r.z_min) b.fail("z_max", "must exceed z_min");
}

void bind(Binder& b, SimulationConfig& s) {
  b.field("seed", s.seed, true);
  b.object("world", [&](Binder& x) { bind(x, s.world); });
  b.object("trajectory", [&](Binder& x) { bind(x, s.trajectory); });
  b.object("noise", [&](Binder& x) { bind(x, s.noise); });
  b.object("rig", [&](Binder& x) { bind(x, s.rig); });
}

void bind(Binder& b, PerceptionConfig& p) {
  b.field("theta_conf", p.theta_conf, Check::kProbability);
  b.field("theta_iou", p.theta_iou, Check::kProbability);
  if (b.reading() && !(p.theta_iou > 0.0)) b.fail("theta_iou", "must lie in (0, 1]");
  b.field("allowed_classes", p.allowed_classes);
  b.field("z_min", p.z_min, Check::kPositive);
  b.field("z_max", p.z_max, Check::kPositive);
  if (b.reading() && p.z_max <= p.z_min) b.fail("z_max", "must exceed z_min");
  b.field("n_min", p.n_min);
  if (b.reading() && p.n_min < 4) b.fail("n_min", "must be at least 4");
  b.field("use_reference_point", p.use_reference_point);
}

void bind(Binder& b, AssociationConfig& a) {
  b.field("lambda_mad", a.lambda_mad, Check::kPositive);
  b.field("mad_constant", a.mad_constant, Check::kPositive);
  b.field("eps_mad", a.eps_mad, Check::kPositive);
  b.field("d_merge_trunk", a.d_merge_trunk, Check::kPositive);
  b.field("d_merge_pole", a.d_merge_pole, Check::kPositive);
  b.field("n_exit", a.n_exit, Check::kPositive);
  b.field("t_stale", a.t_stale, Check::kPositive);
}

void bind(Binder& b, RefinementConfig& r) {
  b.field("enabled", r.enabled);
  b.field("sigma_d", r.sigma_d, Check::kPositive);
  b.field("min_pts", r.min_pts, Check::kPositive);
}

void bind(Binder& b, KeyframePolicy& k) {
  b.field("interval", k.interval, Check::kPositive);
  b.field("distance", k.distance, Check::kPositive);
  b.field("camera_gap", k.camera_gap, Check::kPositive);
  b.field("sync_tolerance", k.sync_tolerance, Check::kNonNegative);
}

void bind(Binder& b, FactorSigmas& s) {
  b.field("prior_rotation", s.prior_rotation, Check::kPositive);
  b.field("prior_translation", s.prior_translation, Check::kPositive);
  b.field("prior_velocity", s.prior_velocity, Check::kPositive);
  b.field("gps_floor", s.gps_floor, Check::kPositive);
  b.field("attitude", s.attitude, Check::kPositive);
  b.field("heading", s.heading, Check::kPositive);
  b.field("nonholonomic", s.nonholonomic, Check::kPositive);
  b.field("nonholonomic_huber", s.nonholonomic_huber, Check::kPositive);
  b.field("observation", s.observation, Check::kPositive);
  b.field("imu_covariance_floor", s.imu_covariance_floor, Check::kPositive);
}

void bind(Binder& b, PipelineConfig& p) {
  b.object("perception", [&](Binder& x) { bind(x, p.perception); });
  b.object("association", [&](Binder& x) { bind(x, p.association); });
  b.object("refinement", [&](Binder& x) { bind(x, p.refinement); });
  b.object("keyframes", [&](Binder& x) { bind(x, p.keyframes); });
  b.object("sigmas", [&](Binder& x) { bind(x, p.sigmas); });
  b.object("imu", [&](Binder& x) {
    x.field("gyro_density", p.imu_noise.gyro_density, Check::kNonNegative);
    x.field("accel_density", p.imu_noise.accel_density, Check::kNonNegative);
    x.field("gyro_bias", p.gyro_bias);
    x.field("accel_bias", p.accel_bias);
    x.field("gravity", p.gravity, Check::kPositive);
  });
  b.object("solver", [&](Binder& x) {
    x.field("max_iters", p.batch.max_iters, Check::kPositive);
    x.field("lambda_init", p.batch.lambda_init, Check::kPositive);
    x.field("tol", p.batch.tol, Check::kPositive);
    x.field("check_rank", p.batch.check_rank);
    x.field("dense_threshold", p.batch.dense_threshold);
    x.field("incremental", p.incremental);
    x.field("incremental_iters", p.incremental_iters, Check::kPositive);
    x.field("incremental_window", p.incremental_window, Check::kNonNegative);
  });
  b.field("deferred_commitment", p.deferred_commitment);
  b.field("compute_marginals", p.compute_marginals);
  b.field("body_to_camera", p.body_to_camera);
}

void bind(Binder& b, EvaluationConfig& e) {
  b.field("r_match", e.r_match, Check::kPositive);
  b.field("classes", e.classes);
  b.field("ablation_class", e.ablation_class);
}

void bind(Binder& b, AppConfig& c) {
  b.object("simulation", [&](Binder& x) { bind(x, c.simulation); });
  b.object("pipeline", [&](Binder& x) { bind(x, c.pipeline); });
  b.object("evaluation", [&](Binder& x) { bind(x, c.evaluation); });
}

template <typename T>
void check_section(const char* path, const T& section) {
  try {
    section.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

void check_sections(const AppConfig& c) {
  check_section("simulation.world", c.simulation.world);
  check_section("simulation.trajectory", c.simulation.trajectory);
  check_section("simulation.noise", c.simulation.noise);
  check_section("simulation.rig", c.simulation.rig);
}

}  // namespace

AppConfig parse_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("<document>", "expected a JSON object");
  AppConfig config;
  Binder b = Binder::reader(doc, "");
  bind(b, config);
  b.finish();
  check_sections(config);
  return config;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const AppConfig& config) {
  json out = json::object();
  AppConfig copy = config;
  Binder b = Binder::writer(out);
  bind(b, copy);
  return out.dump(2);
}

std::string config_hash(const AppConfig& config) { return sha256_hex(config_to_json(config)); }

}  // namespace vinemap
