#include "vinemap/io.hpp"

#include "vinemap/errors.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#ifndef VINEMAP_VERSION
#define VINEMAP_VERSION "0.0.0"
#endif

namespace vinemap {

namespace {

using nlohmann::json;

json meta_record(const Provenance& prov) {
  json inputs = json::object();
  for (const auto& [name, hash] : prov.inputs) inputs[name] = hash;
  return {{"type", "meta"},
          {"tool", "vinemap"},
          {"version", version()},
          {"command", prov.command},
          {"seed", prov.seed},
          {"config_sha256", prov.config_hash},
          {"inputs", inputs}};
}

json vec3(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

json pose_json(const Pose& p) {
  const Mat3 r = p.rotation().matrix();
  json rot = json::array();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) rot.push_back(r(i, k));
  return {{"rotation", rot}, {"translation", vec3(p.translation())}};
}

[[noreturn]] void bad_line(std::size_t line, const std::string& msg) {
  throw DataError("line " + std::to_string(line) + ": " + msg);
}

const json& member(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) bad_line(line, std::string("missing field \"") + key + "\"");
  return *it;
}

double number(const json& j, const char* key, std::size_t line) {
  const json& v = member(j, key, line);
  if (!v.is_number()) bad_line(line, std::string("field \"") + key + "\" is not a number");
  return v.get<double>();
}

Vec3 vec3_from(const json& j, const char* key, std::size_t line) {
  const json& v = member(j, key, line);
  if (!v.is_array() || v.size() != 3) bad_line(line, std::string("field \"") + key + "\" needs 3 numbers");
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) bad_line(line, std::string("field \"") + key + "\" needs 3 numbers");
    out(i) = v[i].get<double>();
  }
  return out;
}

Pose pose_from(const json& j, std::size_t line) {
  const json& rot = member(j, "rotation", line);
  if (!rot.is_array() || rot.size() != 9) bad_line(line, "rotation needs 9 numbers");
  Mat3 r;
  for (int i = 0; i < 9; ++i) {
    if (!rot[i].is_number()) bad_line(line, "rotation needs 9 numbers");
    r(i / 3, i % 3) = rot[i].get<double>();
  }
  if ((r.transpose() * r - Mat3::Identity()).norm() > 1e-6) bad_line(line, "rotation is not orthonormal");
  return Pose(Rotation(r), vec3_from(j, "translation", line));
}

// Splits into lines and parses each non-empty one as a JSON object.
std::vector<std::pair<std::size_t, json>> jsonl_records(std::string_view text) {
  std::vector<std::pair<std::size_t, json>> out;
  std::size_t line = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line;
    std::string_view l = text.substr(pos, end - pos);
    pos = end + 1;
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (l.find_first_not_of(" \t") == std::string_view::npos) continue;
    json j;
    try {
      j = json::parse(l.begin(), l.end());
    } catch (const json::parse_error& e) {
      bad_line(line, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) bad_line(line, "record is not an object");
    out.emplace_back(line, std::move(j));
  }
  return out;
}

std::string record_type(const json& j, std::size_t line) {
  const json& t = member(j, "type", line);
  if (!t.is_string()) bad_line(line, "field \"type\" is not a string");
  return t.get<std::string>();
}

class MonotoneClock {
 public:
  double check(double t, std::size_t line) {
    if (!std::isfinite(t)) bad_line(line, "non-finite timestamp");
    if (started_ && t < last_) bad_line(line, "timestamp decreases");
    started_ = true;
    last_ = t;
    return t;
  }

 private:
  bool started_ = false;
  double last_ = 0.0;
};

// --- CSV ---------------------------------------------------------------

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_preamble(const char* title, const GeodeticDatum& datum, const Provenance& prov) {
  std::ostringstream os;
  os << "# vinemap " << title << "\n";
  os << "# version: " << version() << "\n";
  os << "# command: " << prov.command << "\n";
  os << "# seed: " << prov.seed << "\n";
  os << "# config_sha256: " << prov.config_hash << "\n";
  for (const auto& [name, hash] : prov.inputs) os << "# input " << name << " sha256: " << hash << "\n";
  os << "# datum: " << fixed(datum.latitude_deg, 12) << " " << fixed(datum.longitude_deg, 12) << " "
     << fixed(datum.altitude_m, 6) << "\n";
  os << "# frame: ENU metres relative to datum\n";
  return os.str();
}

struct CsvTable {
  GeodeticDatum datum;
  bool has_datum = false;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};

std::vector<std::string> split_fields(std::string_view l) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t c = l.find(',', pos);
    out.emplace_back(l.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  return out;
}

CsvTable parse_csv(std::string_view text, const std::string& expected_header) {
  CsvTable table;
  bool header_seen = false;
  std::size_t line = 0, pos = 0;
  const std::vector<std::string> expected = split_fields(expected_header);
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line;
    std::string_view l = text.substr(pos, end - pos);
    pos = end + 1;
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (l.empty()) continue;
    if (l.front() == '#') {
      constexpr std::string_view kDatum = "# datum:";
      if (l.substr(0, kDatum.size()) == kDatum) {
        std::istringstream is{std::string(l.substr(kDatum.size()))};
        if (!(is >> table.datum.latitude_deg >> table.datum.longitude_deg >> table.datum.altitude_m))
          bad_line(line, "malformed datum comment");
        table.has_datum = true;
      }
      continue;
    }
    std::vector<std::string> fields = split_fields(l);
    if (!header_seen) {
      if (fields != expected) bad_line(line, "schema mismatch, expected header \"" + expected_header + "\"");
      header_seen = true;
      continue;
    }
    if (fields.size() != expected.size())
      bad_line(line, "expected " + std::to_string(expected.size()) + " fields, got " + std::to_string(fields.size()));
    table.rows.emplace_back(line, std::move(fields));
  }
  if (!header_seen) throw DataError("schema mismatch: missing header \"" + expected_header + "\"");
  if (!table.has_datum) throw DataError("missing \"# datum:\" comment");
  return table;
}

double parse_double(const std::string& s, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    bad_line(line, "not a number: \"" + s + "\"");
  return v;
}

std::int64_t parse_int(const std::string& s, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) bad_line(line, "not an integer: \"" + s + "\"");
  return v;
}

LandmarkClass parse_class_field(const std::string& s, std::size_t line) {
  auto c = parse_landmark_class(s);
  if (!c) bad_line(line, "unknown class \"" + s + "\"");
  return *c;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json row_metrics(const RowMetrics& m) {
  return {{"rows", m.rows},
          {"mae", optional_number(m.mae)},
          {"tp", m.tp},
          {"matched", m.matched},
          {"truth", m.truth},
          {"false_landmarks", m.false_landmarks}};
}

}  // namespace

const char* version() { return VINEMAP_VERSION; }

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string file_sha256(const std::string& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view data) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw DataError("write failed: " + path);
}

// --- sensor log ----------------------------------------------------------

std::string sensor_log_to_jsonl(const SensorLog& log, const Provenance& prov) {
  struct Rec {
    double t;
    int order;
    std::size_t index;
    json j;
  };
  std::vector<Rec> recs;
  recs.reserve(log.imu.size() + log.gps.size() + log.ahrs.size() + log.mag.size());
  for (std::size_t i = 0; i < log.imu.size(); ++i) {
    const ImuSample& s = log.imu[i];
    recs.push_back({s.t, 0, i,
                    {{"t", s.t}, {"type", "imu"}, {"gyro", vec3(s.angular_velocity)},
                     {"accel", vec3(s.linear_acceleration)}}});
  }
  for (std::size_t i = 0; i < log.gps.size(); ++i) {
    const GpsFix& f = log.gps[i];
    recs.push_back({f.t, 1, i,
                    {{"t", f.t}, {"type", "gps"}, {"lat", f.latitude_deg}, {"lon", f.longitude_deg},
                     {"alt", f.altitude_m}, {"sigma", f.sigma}}});
  }
  for (std::size_t i = 0; i < log.ahrs.size(); ++i) {
    const AhrsReading& a = log.ahrs[i];
    recs.push_back(
        {a.t, 2, i, {{"t", a.t}, {"type", "ahrs"}, {"roll", a.roll}, {"pitch", a.pitch}, {"yaw", a.yaw}}});
  }
  for (std::size_t i = 0; i < log.mag.size(); ++i) {
    const MagReading& m = log.mag[i];
    recs.push_back({m.t, 3, i, {{"t", m.t}, {"type", "mag"}, {"yaw", m.yaw}}});
  }
  std::stable_sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.order != b.order) return a.order < b.order;
    return a.index < b.index;
  });
  std::string out = meta_record(prov).dump() + "\n";
  for (const Rec& r : recs) out += r.j.dump() + "\n";
  return out;
}

SensorLog parse_sensor_log(std::string_view text) {
  SensorLog log;
  MonotoneClock clock;
  for (const auto& [line, j] : jsonl_records(text)) {
    const std::string type = record_type(j, line);
    if (type == "meta") continue;
    const double t = clock.check(number(j, "t", line), line);
    if (type == "imu") {
      log.imu.push_back({t, vec3_from(j, "gyro", line), vec3_from(j, "accel", line)});
    } else if (type == "gps") {
      GpsFix f;
      f.t = t;
      f.latitude_deg = number(j, "lat", line);
      f.longitude_deg = number(j, "lon", line);
      f.altitude_m = number(j, "alt", line);
      f.sigma = number(j, "sigma", line);
      if (!(f.sigma >= 0.0)) bad_line(line, "negative gps sigma");
      log.gps.push_back(f);
    } else if (type == "ahrs") {
      log.ahrs.push_back({t, number(j, "roll", line), number(j, "pitch", line), number(j, "yaw", line)});
    } else if (type == "mag") {
      log.mag.push_back({t, number(j, "yaw", line)});
    } else {
      bad_line(line, "unknown record type \"" + type + "\"");
    }
  }
  return log;
}

// --- detection log -------------------------------------------------------

std::string detection_log_to_jsonl(const DetectionLog& log, const Provenance& prov) {
  std::string out = meta_record(prov).dump() + "\n";
  const CameraIntrinsics& k = log.camera;
  const json camera = {{"type", "camera"},
                       {"intrinsics",
                        {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width},
                         {"height", k.height}}},
                       {"body_to_camera", pose_json(log.body_to_camera)}};
  out += camera.dump() + "\n";
  for (const DetectionFrame& f : log.frames) {
    json dets = json::array();
    for (const Detection& d : f.detections) {
      json samples = json::array();
      for (const PixelDepth& s : d.samples) samples.push_back({s.u, s.v, s.z});
      dets.push_back({{"track_id", d.track_id},
                      {"class", std::string(to_string(d.cls))},
                      {"confidence", d.confidence},
                      {"bbox", {d.bbox.u_min, d.bbox.v_min, d.bbox.u_max, d.bbox.v_max}},
                      {"samples", samples}});
    }
    out += json{{"t", f.t}, {"type", "frame"}, {"detections", dets}}.dump() + "\n";
  }
  return out;
}

DetectionLog parse_detection_log(std::string_view text) {
  DetectionLog log;
  bool have_camera = false;
  MonotoneClock clock;
  for (const auto& [line, j] : jsonl_records(text)) {
    const std::string type = record_type(j, line);
    if (type == "meta") continue;
    if (type == "camera") {
      const json& in = member(j, "intrinsics", line);
      CameraIntrinsics k;
      k.fx = number(in, "fx", line);
      k.fy = number(in, "fy", line);
      k.cx = number(in, "cx", line);
      k.cy = number(in, "cy", line);
      k.width = static_cast<int>(number(in, "width", line));
      k.height = static_cast<int>(number(in, "height", line));
      try {
        k.validate();
      } catch (const std::invalid_argument& e) {
        bad_line(line, e.what());
      }
      log.camera = k;
      if (j.contains("body_to_camera")) log.body_to_camera = pose_from(j["body_to_camera"], line);
      have_camera = true;
      continue;
    }
    if (type != "frame") bad_line(line, "unknown record type \"" + type + "\"");
    if (!have_camera) bad_line(line, "frame before camera header");
    DetectionFrame frame;
    frame.t = clock.check(number(j, "t", line), line);
    const json& dets = member(j, "detections", line);
    if (!dets.is_array()) bad_line(line, "\"detections\" is not an array");
    for (const json& dj : dets) {
      Detection d;
      d.t = frame.t;
      const json& id = member(dj, "track_id", line);
      if (!id.is_number_integer()) bad_line(line, "track_id is not an integer");
      d.track_id = id.get<std::int64_t>();
      const json& cls = member(dj, "class", line);
      if (cls.is_string()) {
        d.cls = parse_class_field(cls.get<std::string>(), line);
      } else {
        bad_line(line, "class is not a string");
      }
      d.confidence = number(dj, "confidence", line);
      const json& bb = member(dj, "bbox", line);
      if (!bb.is_array() || bb.size() != 4) bad_line(line, "bbox needs 4 numbers");
      for (const json& x : bb)
        if (!x.is_number()) bad_line(line, "bbox needs 4 numbers");
      d.bbox = {bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(), bb[3].get<double>()};
      const json& samples = member(dj, "samples", line);
      if (!samples.is_array()) bad_line(line, "samples is not an array");
      d.samples.reserve(samples.size());
      for (const json& s : samples) {
        if (!s.is_array() || s.size() != 3 || !s[0].is_number() || !s[1].is_number() || !s[2].is_number())
          bad_line(line, "each sample needs [u, v, z]");
        d.samples.push_back({s[0].get<double>(), s[1].get<double>(), s[2].get<double>()});
      }
      frame.detections.push_back(std::move(d));
    }
    log.frames.push_back(std::move(frame));
  }
  if (!have_camera) throw DataError("detection log has no camera header");
  return log;
}

// --- CSV files -----------------------------------------------------------

namespace {
const char* const kGroundTruthHeader = "id,class,row,east,north,up,height,radius";
const char* const kMapHeader = "id,class,east,north,up,support,sigma_e,sigma_n,sigma_u";
const char* const kTrajectoryHeader = "index,t,east,north,up,roll,pitch,yaw,v_east,v_north,v_up";
}  // namespace

std::string ground_truth_to_csv(const GroundTruthFile& gt, const Provenance& prov) {
  std::string out = csv_preamble("ground truth", gt.datum, prov);
  out += kGroundTruthHeader;
  out += "\n";
  for (const GroundTruthLandmark& g : gt.landmarks) {
    out += std::to_string(g.id) + "," + std::string(to_string(g.cls)) + "," + std::to_string(g.row) + "," +
           fixed(g.position.x(), 6) + "," + fixed(g.position.y(), 6) + "," + fixed(g.position.z(), 6) + "," +
           fixed(g.height, 6) + "," + fixed(g.radius, 6) + "\n";
  }
  return out;
}

GroundTruthFile parse_ground_truth_csv(std::string_view text) {
  const CsvTable t = parse_csv(text, kGroundTruthHeader);
  GroundTruthFile out;
  out.datum = t.datum;
  for (const auto& [line, f] : t.rows) {
    GroundTruthLandmark g;
    g.id = parse_int(f[0], line);
    g.cls = parse_class_field(f[1], line);
    g.row = static_cast<int>(parse_int(f[2], line));
    if (g.row < 0) bad_line(line, "negative row");
    g.position = {parse_double(f[3], line), parse_double(f[4], line), parse_double(f[5], line)};
    g.height = parse_double(f[6], line);
    g.radius = parse_double(f[7], line);
    out.landmarks.push_back(g);
  }
  return out;
}

std::string map_to_csv(const MapFile& map, const Provenance& prov) {
  std::string out = csv_preamble("map", map.datum, prov);
  out += kMapHeader;
  out += "\n";
  for (const MappedLandmark& m : map.landmarks) {
    const Vec3 sd = m.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    out += std::to_string(m.id) + "," + std::string(to_string(m.cls)) + "," + fixed(m.position.x(), 6) + "," +
           fixed(m.position.y(), 6) + "," + fixed(m.position.z(), 6) + "," + std::to_string(m.support) + "," +
           fixed(sd.x(), 6) + "," + fixed(sd.y(), 6) + "," + fixed(sd.z(), 6) + "\n";
  }
  return out;
}

MapFile parse_map_csv(std::string_view text) {
  const CsvTable t = parse_csv(text, kMapHeader);
  MapFile out;
  out.datum = t.datum;
  for (const auto& [line, f] : t.rows) {
    MappedLandmark m;
    m.id = parse_int(f[0], line);
    m.cls = parse_class_field(f[1], line);
    m.position = {parse_double(f[2], line), parse_double(f[3], line), parse_double(f[4], line)};
    const std::int64_t support = parse_int(f[5], line);
    if (support < 0) bad_line(line, "negative support");
    m.support = static_cast<std::size_t>(support);
    const Vec3 sd(parse_double(f[6], line), parse_double(f[7], line), parse_double(f[8], line));
    m.covariance = sd.cwiseProduct(sd).asDiagonal();
    out.landmarks.push_back(m);
  }
  return out;
}

std::string trajectory_to_csv(const TrajectoryFile& traj, const Provenance& prov) {
  std::string out = csv_preamble("trajectory", traj.datum, prov);
  out += kTrajectoryHeader;
  out += "\n";
  for (const KeyframeEstimate& k : traj.keyframes) {
    const Vec3 p = k.pose.translation();
    const Vec3 rpy = k.pose.rotation().rpy();
    out += std::to_string(k.index) + "," + fixed(k.t, 6) + "," + fixed(p.x(), 6) + "," + fixed(p.y(), 6) + "," +
           fixed(p.z(), 6) + "," + fixed(rpy.x(), 9) + "," + fixed(rpy.y(), 9) + "," + fixed(rpy.z(), 9) + "," +
           fixed(k.velocity.x(), 6) + "," + fixed(k.velocity.y(), 6) + "," + fixed(k.velocity.z(), 6) + "\n";
  }
  return out;
}

TrajectoryFile parse_trajectory_csv(std::string_view text) {
  const CsvTable t = parse_csv(text, kTrajectoryHeader);
  TrajectoryFile out;
  out.datum = t.datum;
  double last_t = -std::numeric_limits<double>::infinity();
  for (const auto& [line, f] : t.rows) {
    KeyframeEstimate k;
    k.index = parse_int(f[0], line);
    k.t = parse_double(f[1], line);
    if (k.t < last_t) bad_line(line, "timestamp decreases");
    last_t = k.t;
    const Vec3 p(parse_double(f[2], line), parse_double(f[3], line), parse_double(f[4], line));
    k.pose = Pose(Rotation::from_rpy(parse_double(f[5], line), parse_double(f[6], line), parse_double(f[7], line)), p);
    k.velocity = {parse_double(f[8], line), parse_double(f[9], line), parse_double(f[10], line)};
    out.keyframes.push_back(k);
  }
  return out;
}

std::string metrics_to_json(const MapEvaluation& evaluation, const Provenance& prov) {
  json classes = json::object();
  for (const ClassEvaluation& c : evaluation.classes) {
    json per_row = json::array(), cumulative = json::array();
    for (const RowMetrics& m : c.metrics.per_row) per_row.push_back(row_metrics(m));
    for (const RowMetrics& m : c.metrics.cumulative) cumulative.push_back(row_metrics(m));
    classes[std::string(to_string(c.cls))] = {{"per_row", per_row},
                                              {"cumulative", cumulative},
                                              {"estimates", c.estimates.size()}};
  }
  json doc = {{"meta", meta_record(prov)}, {"rows", evaluation.rows}, {"classes", classes}};
  return doc.dump(2) + "\n";
}

std::string ablation_errors_to_csv(std::span<const AblationOutcome> outcomes, const Provenance& prov) {
  std::ostringstream os;
  os << "# vinemap ablation errors\n";
  os << "# version: " << version() << "\n";
  os << "# command: " << prov.command << "\n";
  os << "# seed: " << prov.seed << "\n";
  os << "# config_sha256: " << prov.config_hash << "\n";
  for (const auto& [name, hash] : prov.inputs) os << "# input " << name << " sha256: " << hash << "\n";
  os << "variant,truth_id,error\n";
  for (const AblationOutcome& o : outcomes) {
    if (o.evaluation.classes.empty()) continue;
    const ClassEvaluation& c = o.evaluation.classes.front();
    for (std::size_t i = 0; i < c.truth_ids.size(); ++i)
      os << o.variant.name << "," << c.truth_ids[i] << "," << (c.nearest[i] ? fixed(*c.nearest[i], 6) : "") << "\n";
  }
  return os.str();
}

}  // namespace vinemap
