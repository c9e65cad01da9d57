#include "vinemap/commands.hpp"
#include "vinemap/config.hpp"
#include "vinemap/errors.hpp"
#include "vinemap/io.hpp"
#include "vinemap/render.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <regex>
#include <unistd.h>

using namespace vinemap;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("vinemap_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const char* name) const { return (path_ / name).string(); }
  std::string str() const { return path_.string(); }

 private:
  fs::path path_;
};

Provenance prov() {
  Provenance p;
  p.command = "test";
  p.seed = 3;
  p.config_hash = "abc";
  p.inputs = {{"x.jsonl", "00"}};
  return p;
}

AppConfig small_config() {
  AppConfig c;
  c.simulation.world.rows = 1;
  c.simulation.world.row_length = 24.0;
  return c;
}

std::string expect_config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field_path();
  }
  ADD_FAILURE() << "no ConfigError for " << text;
  return "";
}

// Minimal well-formedness check: every opened element is closed in order.
bool balanced_xml(const std::string& svg) {
  std::vector<std::string> stack;
  const std::regex tag(R"(<(/?)([A-Za-z][\w:-]*)[^>]*?(/?)>)");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), tag); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (m[1].length()) {
      if (stack.empty() || stack.back() != m[2].str()) return false;
      stack.pop_back();
    } else if (!m[3].length()) {
      stack.push_back(m[2].str());
    }
  }
  return stack.empty();
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const AppConfig d;
  const std::string j = config_to_json(d);
  EXPECT_EQ(config_to_json(parse_config(j)), j);
  EXPECT_EQ(config_to_json(parse_config("{}")), j);
  EXPECT_EQ(config_hash(d).size(), 64u);
}

TEST(Config, OverridesApply) {
  const AppConfig c = parse_config(R"({"simulation": {"seed": 9, "world": {"rows": 2},
      "noise": {"preset": "noiseless", "gps_sigma": 0.01}},
      "pipeline": {"perception": {"theta_conf": 0.7, "allowed_classes": ["pole"]},
                   "association": {"d_merge_pole": 0.8}, "deferred_commitment": false},
      "evaluation": {"r_match": 0.3}})");
  EXPECT_EQ(c.simulation.seed, 9u);
  EXPECT_EQ(c.simulation.world.rows, 2);
  EXPECT_EQ(c.simulation.noise.depth_sigma, 0.0);
  EXPECT_EQ(c.simulation.noise.gps_sigma, 0.01);
  EXPECT_EQ(c.pipeline.perception.theta_conf, 0.7);
  EXPECT_EQ(c.pipeline.perception.allowed_classes, std::vector<LandmarkClass>{LandmarkClass::kPole});
  EXPECT_EQ(c.pipeline.association.d_merge_pole, 0.8);
  EXPECT_FALSE(c.pipeline.deferred_commitment);
  EXPECT_EQ(c.evaluation.r_match, 0.3);
  EXPECT_NE(config_hash(c), config_hash(AppConfig{}));
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(expect_config_error(R"({"simulation": {"world": {"rows": 0}}})"), "simulation.world.rows");
  EXPECT_EQ(expect_config_error(R"({"simulation": {"world": {"rows": 1.5}}})"), "simulation.world.rows");
  EXPECT_EQ(expect_config_error(R"({"pipeline": {"perception": {"theta_conf": 1.2}}})"),
            "pipeline.perception.theta_conf");
  EXPECT_EQ(expect_config_error(R"({"pipeline": {"association": {"lambda_mad": "x"}}})"),
            "pipeline.association.lambda_mad");
  EXPECT_EQ(expect_config_error(R"({"pipeline": {"bogus": 1}})"), "pipeline.bogus");
  EXPECT_EQ(expect_config_error(R"({"simulation": {"noise": {"preset": "loud"}}})"), "simulation.noise.preset");
  EXPECT_EQ(expect_config_error(R"({"evaluation": {"classes": ["leaf"]}})"), "evaluation.classes");
  EXPECT_EQ(expect_config_error(R"({"pipeline": {"body_to_camera": {"rotation": [1,0,0,0,1,0,0,0,2]}}})"),
            "pipeline.body_to_camera.rotation");
  EXPECT_EQ(expect_config_error("[1, 2"), "<document>");
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(SensorLogIo, RoundTrip) {
  SensorLog log;
  log.imu = {{0.0, Vec3(0.1, 0.2, 0.3), Vec3(0, 0, 9.81)}, {0.01, Vec3(0.1, 0.2, 0.3), Vec3(0, 0, 9.8)}};
  log.gps = {{0.0, 44.5, 11.3, 54.0, 0.02}};
  log.ahrs = {{0.0, 0.01, -0.02, 1.5}};
  log.mag = {{0.005, 1.49}};
  const std::string text = sensor_log_to_jsonl(log, prov());
  const SensorLog back = parse_sensor_log(text);
  ASSERT_EQ(back.imu.size(), 2u);
  EXPECT_EQ(back.imu[1].linear_acceleration, log.imu[1].linear_acceleration);
  EXPECT_EQ(back.gps[0].latitude_deg, 44.5);
  EXPECT_EQ(back.ahrs[0].yaw, 1.5);
  EXPECT_EQ(back.mag[0].t, 0.005);
  EXPECT_EQ(sensor_log_to_jsonl(back, prov()), text);
  EXPECT_NE(text.find("\"type\":\"meta\""), std::string::npos);
  EXPECT_NE(text.find("\"version\""), std::string::npos);
}

TEST(SensorLogIo, RejectsDecreasingTime) {
  const std::string text =
      "{\"t\":1.0,\"type\":\"mag\",\"yaw\":0}\n{\"t\":0.5,\"type\":\"mag\",\"yaw\":0}\n";
  try {
    parse_sensor_log(text);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_sensor_log("{\"t\":0,\"type\":\"lidar\"}\n"), DataError);
  EXPECT_THROW(parse_sensor_log("not json\n"), DataError);
  EXPECT_THROW(parse_sensor_log("{\"t\":0,\"type\":\"imu\",\"gyro\":[1,2]}\n"), DataError);
}

TEST(DetectionLogIo, RoundTrip) {
  DetectionLog log;
  DetectionFrame f;
  f.t = 0.5;
  Detection d;
  d.t = 0.5;
  d.track_id = 12;
  d.cls = LandmarkClass::kTrunk;
  d.confidence = 0.93;
  d.bbox = {10, 20, 30, 40};
  d.samples = {{11.5, 21.25, 3.1234}, {12, 22, 3.2}};
  f.detections.push_back(d);
  log.frames.push_back(f);
  log.frames.push_back({1.0, {}});
  const std::string text = detection_log_to_jsonl(log, prov());
  const DetectionLog back = parse_detection_log(text);
  ASSERT_EQ(back.frames.size(), 2u);
  const Detection& b = back.frames[0].detections.at(0);
  EXPECT_EQ(b.track_id, 12);
  EXPECT_EQ(b.cls, LandmarkClass::kTrunk);
  EXPECT_EQ(b.samples[0].z, 3.1234);
  EXPECT_EQ(b.bbox.v_max, 40.0);
  EXPECT_TRUE(back.body_to_camera.translation().isApprox(log.body_to_camera.translation()));
  EXPECT_EQ(detection_log_to_jsonl(back, prov()), text);
}

TEST(DetectionLogIo, RequiresHeaderAndOrder) {
  EXPECT_THROW(parse_detection_log("{\"t\":0,\"type\":\"frame\",\"detections\":[]}\n"), DataError);
  DetectionLog log;
  log.frames = {{1.0, {}}, {0.5, {}}};
  EXPECT_THROW(parse_detection_log(detection_log_to_jsonl(log, prov())), DataError);
}

TEST(CsvIo, GroundTruthRoundTrip) {
  WorldConfig w;
  w.rows = 1;
  GroundTruthFile gt{w.datum, generate_world(w)};
  const std::string text = ground_truth_to_csv(gt, prov());
  const GroundTruthFile back = parse_ground_truth_csv(text);
  ASSERT_EQ(back.landmarks.size(), gt.landmarks.size());
  EXPECT_NEAR(back.datum.latitude_deg, w.datum.latitude_deg, 1e-12);
  for (std::size_t i = 0; i < gt.landmarks.size(); ++i) {
    EXPECT_EQ(back.landmarks[i].id, gt.landmarks[i].id);
    EXPECT_EQ(back.landmarks[i].row, 0);
    EXPECT_LT((back.landmarks[i].position - gt.landmarks[i].position).norm(), 1e-6);
  }
  EXPECT_NE(text.find("# datum:"), std::string::npos);
  EXPECT_NE(text.find("# config_sha256: abc"), std::string::npos);
}

TEST(CsvIo, MapRoundTripAndSchema) {
  MapFile m;
  m.datum = {44.4949, 11.3426, 54.0};
  MappedLandmark l;
  l.id = 4;
  l.cls = LandmarkClass::kPole;
  l.position = Vec3(1.25, -2.5, 0.1);
  l.support = 7;
  l.covariance = Vec3(0.01, 0.04, 0.09).asDiagonal();
  m.landmarks.push_back(l);
  const MapFile back = parse_map_csv(map_to_csv(m, prov()));
  ASSERT_EQ(back.landmarks.size(), 1u);
  EXPECT_EQ(back.landmarks[0].support, 7u);
  EXPECT_NEAR(back.landmarks[0].covariance(1, 1), 0.04, 1e-9);
  EXPECT_THROW(parse_map_csv("# datum: 0 0 0\nid,class\n"), DataError);
  EXPECT_THROW(parse_map_csv("id,class,east,north,up,support,sigma_e,sigma_n,sigma_u\n"), DataError);
  EXPECT_THROW(parse_map_csv("# datum: 0 0 0\nid,class,east,north,up,support,sigma_e,sigma_n,sigma_u\n1,leaf,0,0,0,1,0,0,0\n"),
               DataError);
}

TEST(CsvIo, TrajectoryRoundTrip) {
  TrajectoryFile t;
  t.datum = {44.4949, 11.3426, 54.0};
  t.keyframes.push_back({0, 0.0, Pose(Rotation::from_rpy(0.01, 0.02, 2.5), Vec3(1, 2, 3)), Vec3(1, 0, 0)});
  t.keyframes.push_back({1, 0.5, Pose(Rotation::from_rpy(0, 0, -3.0), Vec3(1.5, 2, 3)), Vec3(1, 0.1, 0)});
  const TrajectoryFile back = parse_trajectory_csv(trajectory_to_csv(t, prov()));
  ASSERT_EQ(back.keyframes.size(), 2u);
  EXPECT_NEAR(back.keyframes[1].pose.rotation().yaw_angle(), -3.0, 1e-8);
  EXPECT_LT((back.keyframes[0].pose.translation() - Vec3(1, 2, 3)).norm(), 1e-6);
}

TEST(Render, WellFormedAndCountsMarkers) {
  RenderInput in;
  in.map.datum = {44.4949, 11.3426, 54.0};
  EXPECT_TRUE(balanced_xml(render_svg(in)));
  EXPECT_EQ(count(render_svg(in), "class=\"marker"), 0u);
  for (int i = 0; i < 5; ++i) {
    MappedLandmark m;
    m.id = i;
    m.position = Vec3(i, 0, 0);
    in.map.landmarks.push_back(m);
  }
  in.truth.datum = in.map.datum;
  WorldConfig w;
  w.rows = 1;
  in.truth.landmarks = generate_world(w);
  in.has_truth = true;
  in.trajectory.datum = in.map.datum;
  in.trajectory.keyframes.push_back({0, 0, Pose(), Vec3::Zero()});
  in.trajectory.keyframes.push_back({1, 1, Pose(Rotation(), Vec3(5, 0, 0)), Vec3::Zero()});
  in.has_trajectory = true;
  const std::string svg = render_svg(in);
  EXPECT_TRUE(balanced_xml(svg));
  EXPECT_EQ(count(svg, "class=\"marker"), 5u + in.truth.landmarks.size());
  EXPECT_EQ(count(svg, "<polyline"), 1u);
}

TEST(Commands, SimulateIsByteIdentical) {
  TempDir a("sim_a"), b("sim_b");
  const AppConfig c = small_config();
  cmd_simulate(c, a.str());
  cmd_simulate(c, b.str());
  for (const char* f : {kSensorLogFile, kDetectionLogFile, kGroundTruthFile, kConfigFile})
    EXPECT_EQ(read_file(a.file(f)), read_file(b.file(f))) << f;
  const GroundTruthFile gt = parse_ground_truth_csv(read_file(a.file(kGroundTruthFile)));
  for (const auto& g : gt.landmarks) EXPECT_EQ(g.row, 0);
  EXPECT_EQ(parse_config(read_file(a.file(kConfigFile))).simulation.world.rows, 1);
}

TEST(Commands, EvaluateTruthAgainstItself) {
  TempDir d("eval");
  const AppConfig c = small_config();
  cmd_simulate(c, d.str());
  const GroundTruthFile gt = parse_ground_truth_csv(read_file(d.file(kGroundTruthFile)));
  MapFile as_map{gt.datum, {}};
  for (const auto& g : gt.landmarks) {
    MappedLandmark m;
    m.id = g.id;
    m.cls = g.cls;
    m.position = g.position;
    m.support = 1;
    as_map.landmarks.push_back(m);
  }
  write_file(d.file(kMapFile), map_to_csv(as_map, prov()));
  cmd_evaluate(d.file(kMapFile), d.file(kGroundTruthFile), c, d.str());
  const auto metrics = nlohmann::json::parse(read_file(d.file(kMetricsFile)));
  for (const char* cls : {"pole", "trunk"}) {
    const auto& last = metrics["classes"][cls]["cumulative"].back();
    EXPECT_DOUBLE_EQ(last["tp"].get<double>(), 1.0);
    EXPECT_NEAR(last["mae"].get<double>(), 0.0, 1e-9);
  }
  EXPECT_EQ(metrics["meta"]["inputs"].size(), 2u);

  write_file(d.file(kMapFile), map_to_csv(MapFile{gt.datum, {}}, prov()));
  cmd_evaluate(d.file(kMapFile), d.file(kGroundTruthFile), c, d.str());
  const auto empty = nlohmann::json::parse(read_file(d.file(kMetricsFile)));
  EXPECT_DOUBLE_EQ(empty["classes"]["pole"]["cumulative"].back()["tp"].get<double>(), 0.0);
  EXPECT_TRUE(empty["classes"]["pole"]["cumulative"].back()["mae"].is_null());
}

TEST(Commands, MapRenderAndAblateOutputs) {
  TempDir d("map");
  const AppConfig c = small_config();
  cmd_simulate(c, d.str());
  cmd_map(d.file(kSensorLogFile), d.file(kDetectionLogFile), c, d.str());
  const MapFile map = parse_map_csv(read_file(d.file(kMapFile)));
  EXPECT_FALSE(map.landmarks.empty());
  const auto run = nlohmann::json::parse(read_file(d.file(kRunFile)));
  EXPECT_EQ(run["config_sha256"].get<std::string>(), config_hash(c));
  EXPECT_EQ(run["inputs"].size(), 2u);

  const std::string svg_path = d.file("map.svg");
  cmd_render(d.file(kMapFile), d.file(kGroundTruthFile), d.file(kTrajectoryFile), svg_path);
  const std::string svg = read_file(svg_path);
  const GroundTruthFile gt = parse_ground_truth_csv(read_file(d.file(kGroundTruthFile)));
  EXPECT_TRUE(balanced_xml(svg));
  EXPECT_EQ(count(svg, "class=\"marker"), map.landmarks.size() + gt.landmarks.size());

  cmd_ablate(d.file(kSensorLogFile), d.file(kDetectionLogFile), d.file(kGroundTruthFile), c, d.str());
  const auto summary = nlohmann::json::parse(read_file(d.file(kAblationSummaryFile)));
  ASSERT_EQ(summary["variants"].size(), 4u);
  EXPECT_TRUE(summary["variants"][0]["config_diff"].empty());
  // each single-switch variant differs from full in exactly one field
  EXPECT_EQ(summary["variants"][1]["config_diff"].size(), 1u);
  EXPECT_EQ(summary["variants"][1]["config_diff"][0]["path"], "/pipeline/perception/use_reference_point");
  EXPECT_EQ(summary["variants"][2]["config_diff"][0]["path"], "/pipeline/deferred_commitment");
  EXPECT_EQ(summary["variants"][3]["config_diff"].size(), 2u);
}

TEST(Commands, MissingInputIsDataError) {
  TempDir d("missing");
  EXPECT_THROW(cmd_map(d.file("nope.jsonl"), d.file("nope2.jsonl"), AppConfig{}, d.str()), DataError);
}
