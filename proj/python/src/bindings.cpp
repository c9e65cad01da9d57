#include "vinemap/association.hpp"
#include "vinemap/commands.hpp"
#include "vinemap/config.hpp"
#include "vinemap/errors.hpp"
#include "vinemap/evaluation.hpp"
#include "vinemap/factors.hpp"
#include "vinemap/io.hpp"
#include "vinemap/pipeline.hpp"
#include "vinemap/refinement.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace vinemap;

namespace {

using PointArray = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Vec3> to_points(const PointArray& a) {
  std::vector<Vec3> out(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) out[static_cast<std::size_t>(i)] = a.row(i).transpose();
  return out;
}

PointArray to_array(const std::vector<Vec3>& pts) {
  PointArray a(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return a;
}

AppConfig config_from(const std::optional<std::string>& json) { return json ? parse_config(*json) : AppConfig{}; }

GeodeticDatum datum_from(const std::tuple<double, double, double>& d) {
  return {std::get<0>(d), std::get<1>(d), std::get<2>(d)};
}

py::dict metrics_dict(const MapEvaluation& e) {
  py::dict out;
  for (const ClassEvaluation& c : e.classes) {
    py::list rows;
    for (const RowMetrics& m : c.metrics.cumulative) {
      py::dict r;
      r["rows"] = m.rows;
      r["mae"] = m.mae ? py::cast(*m.mae) : py::none();
      r["tp"] = m.tp;
      r["matched"] = m.matched;
      r["truth"] = m.truth;
      r["false_landmarks"] = m.false_landmarks;
      rows.append(r);
    }
    out[py::str(std::string(to_string(c.cls)))] = rows;
  }
  return out;
}

// Simulates a world from the configuration, maps it and scores the result.
py::dict simulate_and_map(const std::optional<std::string>& config_json) {
  const AppConfig cfg = config_from(config_json);
  WorldConfig world = cfg.simulation.world;
  world.seed = cfg.simulation.seed;
  std::vector<GroundTruthLandmark> truth;
  SimulatedLogs logs;
  MapResult map;
  {
    py::gil_scoped_release release;
    truth = generate_world(world);
    const Trajectory traj = generate_trajectory(world, cfg.simulation.trajectory);
    logs = synthesize_logs(world, truth, traj, cfg.simulation.noise, cfg.simulation.rig, cfg.simulation.seed);
    map = run_pipeline(logs.sensors, logs.detections, cfg.pipeline);
  }
  const MapEvaluation e =
      evaluate_map(map.landmarks, map.datum, truth, world.datum, cfg.evaluation.r_match, cfg.evaluation.classes);

  std::vector<Vec3> est, gt, traj;
  std::vector<std::string> est_cls, gt_cls;
  std::vector<std::size_t> support;
  for (const MappedLandmark& m : map.landmarks) {
    est.push_back(rebase_enu(m.position, map.datum, world.datum));
    est_cls.emplace_back(to_string(m.cls));
    support.push_back(m.support);
  }
  for (const GroundTruthLandmark& g : truth) {
    gt.push_back(g.position);
    gt_cls.emplace_back(to_string(g.cls));
  }
  for (const KeyframeEstimate& k : map.trajectory) traj.push_back(rebase_enu(k.pose.translation(), map.datum, world.datum));

  py::dict out;
  out["landmarks"] = to_array(est);
  out["classes"] = est_cls;
  out["support"] = support;
  out["truth"] = to_array(gt);
  out["truth_classes"] = gt_cls;
  out["trajectory"] = to_array(traj);
  out["metrics"] = metrics_dict(e);
  out["keyframes"] = map.diagnostics.keyframes;
  out["merges"] = map.diagnostics.merges;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Semantic landmark mapping on a factor graph";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<DataError> data_error(m, "DataError", PyExc_RuntimeError);
  static py::exception<SolverError> solver_error(m, "SolverError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      config_error(e.what());
    } catch (const DataError& e) {
      data_error(e.what());
    } catch (const SolverError& e) {
      solver_error(e.what());
    }
  });

  m.def("version", &version);

  m.def("so3_exp", [](const Vec3& w) { return so3_exp(w).matrix(); }, py::arg("omega"));
  m.def("so3_log", [](const Mat3& r) { return so3_log(Rotation(r)); }, py::arg("rotation"));
  m.def("tangent_basis", &tangent_basis, py::arg("u"));
  m.def(
      "geodetic_to_enu",
      [](double lat, double lon, double alt, const std::tuple<double, double, double>& datum) {
        return geodetic_to_enu(lat, lon, alt, datum_from(datum));
      },
      py::arg("lat"), py::arg("lon"), py::arg("alt"), py::arg("datum"));
  m.def(
      "enu_to_geodetic",
      [](const Vec3& enu, const std::tuple<double, double, double>& datum) {
        const GeodeticDatum g = enu_to_geodetic(enu, datum_from(datum));
        return std::make_tuple(g.latitude_deg, g.longitude_deg, g.altitude_m);
      },
      py::arg("enu"), py::arg("datum"));

  m.def(
      "cartesian_to_bearing_range",
      [](const Vec3& p, const Mat3& sigma) {
        const BearingRange br = cartesian_to_bearing_range(p, sigma);
        return py::make_tuple(br.bearing, br.range, br.covariance);
      },
      py::arg("point"), py::arg("sigma_xyz"), "Returns (bearing, range, covariance).");

  m.def("reference_point", [](const PointArray& c) { return reference_point(to_points(c)); }, py::arg("cloud"));
  m.def("centroid", [](const PointArray& c) { return centroid(to_points(c)); }, py::arg("cloud"));
  m.def(
      "mad_filter",
      [](const PointArray& p, double lambda_mad, double eps_mad) { return mad_filter(to_points(p), lambda_mad, eps_mad); },
      py::arg("positions"), py::arg("lambda_mad") = 1.5, py::arg("eps_mad") = 0.05);
  m.def("compute_epsilon", [](const PointArray& p) { return compute_epsilon(to_points(p)); }, py::arg("positions"));
  m.def(
      "dbscan", [](const PointArray& p, double eps, int min_pts) { return dbscan(to_points(p), eps, min_pts); },
      py::arg("points"), py::arg("epsilon"), py::arg("min_pts") = 2);
  m.def(
      "match_landmarks",
      [](const PointArray& est, const PointArray& truth, double r_match) {
        const Matching mt = match_landmarks(to_points(est), to_points(truth), r_match);
        std::vector<std::tuple<std::size_t, std::size_t, double>> pairs;
        for (const MatchPair& p : mt.pairs) pairs.emplace_back(p.estimate, p.truth, p.distance);
        return py::make_tuple(pairs, mt.unmatched_estimates, mt.unmatched_truth);
      },
      py::arg("estimated"), py::arg("truth"), py::arg("r_match") = 0.5,
      "Returns (pairs, unmatched_estimates, unmatched_truth); pairs are (estimate, truth, xy distance).");

  m.def("default_config", [] { return config_to_json(AppConfig{}); });
  m.def(
      "normalize_config", [](const std::string& json) { return config_to_json(parse_config(json)); },
      py::arg("config_json"));
  m.def("config_hash", [](const std::string& json) { return config_hash(parse_config(json)); },
        py::arg("config_json"));

  m.def("simulate_and_map", &simulate_and_map, py::arg("config_json") = py::none());

  m.def(
      "simulate",
      [](const std::string& out_dir, const std::optional<std::string>& cfg) { cmd_simulate(config_from(cfg), out_dir); },
      py::arg("out_dir"), py::arg("config_json") = py::none(), py::call_guard<py::gil_scoped_release>());
  m.def(
      "map_logs",
      [](const std::string& sensors, const std::string& detections, const std::string& out_dir,
         const std::optional<std::string>& cfg) { cmd_map(sensors, detections, config_from(cfg), out_dir); },
      py::arg("sensors"), py::arg("detections"), py::arg("out_dir"), py::arg("config_json") = py::none(),
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "evaluate",
      [](const std::string& map_csv, const std::string& truth_csv, const std::string& out_dir,
         const std::optional<std::string>& cfg) { cmd_evaluate(map_csv, truth_csv, config_from(cfg), out_dir); },
      py::arg("map_csv"), py::arg("truth_csv"), py::arg("out_dir"), py::arg("config_json") = py::none(),
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "ablate",
      [](const std::string& sensors, const std::string& detections, const std::string& truth_csv,
         const std::string& out_dir, const std::optional<std::string>& cfg) {
        cmd_ablate(sensors, detections, truth_csv, config_from(cfg), out_dir);
      },
      py::arg("sensors"), py::arg("detections"), py::arg("truth_csv"), py::arg("out_dir"),
      py::arg("config_json") = py::none(), py::call_guard<py::gil_scoped_release>());
  m.def(
      "render",
      [](const std::string& map_csv, const std::string& out_svg, const std::optional<std::string>& truth_csv,
         const std::optional<std::string>& trajectory_csv) { cmd_render(map_csv, truth_csv, trajectory_csv, out_svg); },
      py::arg("map_csv"), py::arg("out_svg"), py::arg("truth_csv") = py::none(), py::arg("trajectory_csv") = py::none(),
      py::call_guard<py::gil_scoped_release>());
}
