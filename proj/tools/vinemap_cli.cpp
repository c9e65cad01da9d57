#include "vinemap/commands.hpp"
#include "vinemap/errors.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

namespace {

using namespace vinemap;

// VINEMAP_LOG: "quiet" silences progress, anything else prints it.
LogStream log_stream() {
  const char* v = std::getenv("VINEMAP_LOG");
  if (v && std::string(v) == "quiet") return nullptr;
  return &std::cerr;
}

std::string in_dir_file(const std::string& dir, const std::string& explicit_path, const char* name) {
  if (!explicit_path.empty()) return explicit_path;
  return (std::filesystem::path(dir) / name).string();
}

struct Options {
  std::string config;
  std::string out = ".";
  std::string in = ".";
  std::string sensors, detections, truth, map, trajectory;
  std::optional<std::uint64_t> seed;
  std::optional<int> rows;
  bool disable_rd = false;
  bool disable_rc = false;
};

AppConfig effective_config(const Options& o) {
  AppConfig c = o.config.empty() ? AppConfig{} : load_config(o.config);
  if (o.seed) c.simulation.seed = *o.seed;
  if (o.rows) {
    if (*o.rows < 1) throw ConfigError("--rows", "must be at least 1");
    c.simulation.world.rows = *o.rows;
  }
  if (o.disable_rd) c.pipeline.perception.use_reference_point = false;
  if (o.disable_rc) c.pipeline.deferred_commitment = false;
  return c;
}

void common_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON configuration file");
  cmd->add_option("--seed", o.seed, "Override the simulation seed");
  cmd->add_option("--rows", o.rows, "Override the number of rows");
  cmd->add_flag("--disable-rd", o.disable_rd, "Use the plain cloud centroid instead of the reference point");
  cmd->add_flag("--disable-rc", o.disable_rc, "Commit every observation immediately, without MAD rejection");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Landmark mapping for vineyard rows from GNSS, inertial and detection logs"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic world and its sensor logs");
  common_flags(sim, o);
  sim->add_option("--out", o.out, "Output directory");

  auto* map = app.add_subcommand("map", "Build a landmark map from logs");
  common_flags(map, o);
  map->add_option("--in", o.in, "Directory holding sensor.jsonl and detections.jsonl");
  map->add_option("--sensors", o.sensors, "Sensor log path");
  map->add_option("--detections", o.detections, "Detection log path");
  map->add_option("--out", o.out, "Output directory");

  auto* eval = app.add_subcommand("evaluate", "Score a map against ground truth");
  common_flags(eval, o);
  eval->add_option("--map", o.map, "map.csv")->required();
  eval->add_option("--truth", o.truth, "ground_truth.csv")->required();
  eval->add_option("--out", o.out, "Output directory");

  auto* abl = app.add_subcommand("ablate", "Run the four pipeline variants on the same logs");
  common_flags(abl, o);
  abl->add_option("--in", o.in, "Directory holding the simulated logs and ground truth");
  abl->add_option("--sensors", o.sensors, "Sensor log path");
  abl->add_option("--detections", o.detections, "Detection log path");
  abl->add_option("--truth", o.truth, "Ground truth path");
  abl->add_option("--out", o.out, "Output directory");

  auto* ren = app.add_subcommand("render", "Draw a map as SVG");
  ren->add_option("--map", o.map, "map.csv")->required();
  ren->add_option("--truth", o.truth, "ground_truth.csv");
  ren->add_option("--trajectory", o.trajectory, "trajectory.csv");
  ren->add_option("--out", o.out, "Output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfigError);
  }

  const LogStream log = log_stream();
  try {
    if (*sim) {
      cmd_simulate(effective_config(o), o.out, log);
    } else if (*map) {
      cmd_map(in_dir_file(o.in, o.sensors, kSensorLogFile), in_dir_file(o.in, o.detections, kDetectionLogFile),
              effective_config(o), o.out, log);
    } else if (*eval) {
      cmd_evaluate(o.map, o.truth, effective_config(o), o.out, log);
    } else if (*abl) {
      cmd_ablate(in_dir_file(o.in, o.sensors, kSensorLogFile), in_dir_file(o.in, o.detections, kDetectionLogFile),
                 in_dir_file(o.in, o.truth, kGroundTruthFile), effective_config(o), o.out, log);
    } else if (*ren) {
      cmd_render(o.map, o.truth.empty() ? std::nullopt : std::optional<std::string>(o.truth),
                 o.trajectory.empty() ? std::nullopt : std::optional<std::string>(o.trajectory), o.out, log);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kConfigError);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kDataError);
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kSolverFailure);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kConfigError);
  }
  return 0;
}
