#include "vinemap/commands.hpp"

#include "vinemap/errors.hpp"
#include "vinemap/evaluation.hpp"
#include "vinemap/io.hpp"
#include "vinemap/render.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace vinemap {

namespace {

using nlohmann::json;

std::string join(const std::string& dir, const char* name) { return (std::filesystem::path(dir) / name).string(); }

std::string base_name(const std::string& path) { return std::filesystem::path(path).filename().string(); }

Provenance provenance(const char* command, const AppConfig& config,
                      std::initializer_list<std::pair<std::string, std::string>> inputs) {
  Provenance p;
  p.command = command;
  p.seed = config.simulation.seed;
  p.config_hash = config_hash(config);
  for (const auto& [name, path] : inputs) p.inputs.emplace_back(name, file_sha256(path));
  return p;
}

void say(LogStream log, const std::string& msg) {
  if (log) *log << msg << "\n";
}

json report_json(const OptimizeReport& r) {
  return {{"iterations", r.iterations},
          {"initial_cost", r.initial_cost},
          {"final_cost", r.final_cost},
          {"converged", r.converged}};
}

json summary_json(const ErrorSummary& s) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"count", s.count}, {"median", opt(s.median)}, {"q1", opt(s.q1)},
          {"q3", opt(s.q3)},  {"mean", opt(s.mean)},     {"max", opt(s.max)}};
}

}  // namespace

void cmd_simulate(const AppConfig& config, const std::string& out_dir, LogStream log) {
  const SimulationConfig& sim = config.simulation;
  WorldConfig world = sim.world;
  world.seed = sim.seed;
  const std::vector<GroundTruthLandmark> truth = generate_world(world);
  const Trajectory trajectory = generate_trajectory(world, sim.trajectory);
  say(log, "simulate: " + std::to_string(truth.size()) + " landmarks, " +
               std::to_string(trajectory.duration()) + " s traverse");
  const SimulatedLogs logs = synthesize_logs(world, truth, trajectory, sim.noise, sim.rig, sim.seed);

  const Provenance prov = provenance("simulate", config, {});
  write_file(join(out_dir, kSensorLogFile), sensor_log_to_jsonl(logs.sensors, prov));
  write_file(join(out_dir, kDetectionLogFile), detection_log_to_jsonl(logs.detections, prov));
  write_file(join(out_dir, kGroundTruthFile), ground_truth_to_csv({world.datum, truth}, prov));
  write_file(join(out_dir, kConfigFile), config_to_json(config) + "\n");
  say(log, "simulate: wrote " + out_dir);
}

void cmd_map(const std::string& sensor_log, const std::string& detection_log, const AppConfig& config,
             const std::string& out_dir, LogStream log) {
  const SensorLog sensors = parse_sensor_log(read_file(sensor_log));
  const DetectionLog detections = parse_detection_log(read_file(detection_log));
  say(log, "map: " + std::to_string(sensors.imu.size()) + " imu samples, " +
               std::to_string(detections.frames.size()) + " camera frames");
  const MapResult result = run_pipeline(sensors, detections, config.pipeline);
  const PipelineDiagnostics& d = result.diagnostics;
  say(log, "map: " + std::to_string(d.keyframes) + " keyframes, " + std::to_string(result.landmarks.size()) +
               " landmarks");

  const Provenance prov =
      provenance("map", config, {{base_name(sensor_log), sensor_log}, {base_name(detection_log), detection_log}});
  write_file(join(out_dir, kMapFile), map_to_csv({result.datum, result.landmarks}, prov));
  write_file(join(out_dir, kTrajectoryFile), trajectory_to_csv({result.datum, result.trajectory}, prov));

  json diag = {{"keyframes", d.keyframes},
               {"detections", d.detections},
               {"detections_kept", d.detections_kept},
               {"observations", d.observations},
               {"landmarks_created", d.landmarks_created},
               {"landmarks", result.landmarks.size()},
               {"merges", d.merges},
               {"discarded_tracks", d.discarded_tracks},
               {"rejected_observations", d.rejected_observations},
               {"class_conflicts", d.class_conflicts},
               {"final_solve", report_json(d.final_solve)}};
  if (d.refinement) {
    diag["refinement"] = {{"factors_added", d.refinement->factors_added},
                          {"optimization", report_json(d.refinement->optimization)}};
  }
  json inputs = json::object();
  for (const auto& [name, hash] : prov.inputs) inputs[name] = hash;
  const json run = {{"tool", "vinemap"},
                    {"version", version()},
                    {"command", "map"},
                    {"seed", prov.seed},
                    {"config_sha256", prov.config_hash},
                    {"inputs", inputs},
                    {"config", json::parse(config_to_json(config))},
                    {"diagnostics", diag}};
  write_file(join(out_dir, kRunFile), run.dump(2) + "\n");
}

void cmd_evaluate(const std::string& map_csv, const std::string& truth_csv, const AppConfig& config,
                  const std::string& out_dir, LogStream log) {
  const MapFile map = parse_map_csv(read_file(map_csv));
  const GroundTruthFile truth = parse_ground_truth_csv(read_file(truth_csv));
  const EvaluationConfig& ec = config.evaluation;
  const MapEvaluation eval = evaluate_map(map.landmarks, map.datum, truth.landmarks, truth.datum, ec.r_match, ec.classes);
  for (const ClassEvaluation& c : eval.classes) {
    if (c.metrics.cumulative.empty()) continue;
    const RowMetrics& m = c.metrics.cumulative.back();
    say(log, "evaluate: " + std::string(to_string(c.cls)) + " TP " + std::to_string(100.0 * m.tp) + "% MAE " +
                 (m.mae ? std::to_string(*m.mae) : std::string("n/a")));
  }
  const Provenance prov =
      provenance("evaluate", config, {{base_name(map_csv), map_csv}, {base_name(truth_csv), truth_csv}});
  write_file(join(out_dir, kMetricsFile), metrics_to_json(eval, prov));
}

void cmd_ablate(const std::string& sensor_log, const std::string& detection_log, const std::string& truth_csv,
                const AppConfig& config, const std::string& out_dir, LogStream log) {
  const SensorLog sensors = parse_sensor_log(read_file(sensor_log));
  const DetectionLog detections = parse_detection_log(read_file(detection_log));
  const GroundTruthFile truth = parse_ground_truth_csv(read_file(truth_csv));
  const std::vector<AblationVariant> variants = ablation_variants();
  const EvaluationConfig& ec = config.evaluation;
  const std::vector<AblationOutcome> outcomes = run_ablation(sensors, detections, config.pipeline, truth.landmarks,
                                                             truth.datum, ec.r_match, ec.ablation_class, variants);

  const Provenance prov = provenance("ablate", config,
                                     {{base_name(sensor_log), sensor_log},
                                      {base_name(detection_log), detection_log},
                                      {base_name(truth_csv), truth_csv}});
  write_file(join(out_dir, kAblationErrorsFile), ablation_errors_to_csv(outcomes, prov));

  const json base = json::parse(config_to_json(config));
  json list = json::array();
  for (const AblationOutcome& o : outcomes) {
    AppConfig vc = config;
    vc.pipeline = variant_config(config.pipeline, o.variant);
    say(log, "ablate: " + o.variant.name + " median " +
                 (o.summary.median ? std::to_string(*o.summary.median) : std::string("n/a")));
    list.push_back({{"variant", o.variant.name},
                    {"disable_rd", o.variant.disable_rd},
                    {"disable_rc", o.variant.disable_rc},
                    {"config_diff", json::diff(base, json::parse(config_to_json(vc)))},
                    {"landmarks", o.landmarks},
                    {"missing", o.missing},
                    {"summary", summary_json(o.summary)}});
  }
  json inputs = json::object();
  for (const auto& [name, hash] : prov.inputs) inputs[name] = hash;
  const json doc = {{"tool", "vinemap"},
                    {"version", version()},
                    {"command", "ablate"},
                    {"seed", prov.seed},
                    {"config_sha256", prov.config_hash},
                    {"inputs", inputs},
                    {"class", std::string(to_string(ec.ablation_class))},
                    {"variants", list}};
  write_file(join(out_dir, kAblationSummaryFile), doc.dump(2) + "\n");
}

void cmd_render(const std::string& map_csv, const std::optional<std::string>& truth_csv,
                const std::optional<std::string>& trajectory_csv, const std::string& out_svg, LogStream log) {
  RenderInput in;
  in.map = parse_map_csv(read_file(map_csv));
  if (truth_csv) {
    in.truth = parse_ground_truth_csv(read_file(*truth_csv));
    in.has_truth = true;
  }
  if (trajectory_csv) {
    in.trajectory = parse_trajectory_csv(read_file(*trajectory_csv));
    in.has_trajectory = true;
  }
  write_file(out_svg, render_svg(in));
  say(log, "render: wrote " + out_svg);
}

}  // namespace vinemap
