#pragma once

#include "vinemap/evaluation.hpp"
#include "vinemap/pipeline.hpp"
#include "vinemap/simulator.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vinemap {

/// Library version string, e.g. "0.1.0".
const char* version();

std::string sha256_hex(std::string_view data);
/// Hash of a file's bytes. Throws DataError when it cannot be read.
std::string file_sha256(const std::string& path);

/// Origin of an output file. Rendered as the first JSONL record or as
/// "#" comment lines at the top of CSV files.
struct Provenance {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::pair<std::string, std::string>> inputs;  ///< (name, sha256)
};

// Sensor log: a meta record followed by imu/gps/ahrs/mag records merged by
// time. Readers throw DataError on malformed lines or decreasing "t".
std::string sensor_log_to_jsonl(const SensorLog& log, const Provenance& prov);
SensorLog parse_sensor_log(std::string_view text);

// Detection log: a meta record, a camera header, then one record per frame.
std::string detection_log_to_jsonl(const DetectionLog& log, const Provenance& prov);
DetectionLog parse_detection_log(std::string_view text);

struct GroundTruthFile {
  GeodeticDatum datum;
  std::vector<GroundTruthLandmark> landmarks;
};

std::string ground_truth_to_csv(const GroundTruthFile& gt, const Provenance& prov);
GroundTruthFile parse_ground_truth_csv(std::string_view text);

struct MapFile {
  GeodeticDatum datum;
  std::vector<MappedLandmark> landmarks;  ///< covariance carries only the diagonal
};

std::string map_to_csv(const MapFile& map, const Provenance& prov);
MapFile parse_map_csv(std::string_view text);

struct TrajectoryFile {
  GeodeticDatum datum;
  std::vector<KeyframeEstimate> keyframes;
};

std::string trajectory_to_csv(const TrajectoryFile& traj, const Provenance& prov);
TrajectoryFile parse_trajectory_csv(std::string_view text);

std::string metrics_to_json(const MapEvaluation& evaluation, const Provenance& prov);

/// Long-format error samples: variant,truth_id,error. The error field is
/// empty when the variant produced no landmark of that class.
std::string ablation_errors_to_csv(std::span<const AblationOutcome> outcomes, const Provenance& prov);

std::string read_file(const std::string& path);
/// Writes bytes verbatim; creates missing parent directories.
void write_file(const std::string& path, std::string_view data);

}  // namespace vinemap
