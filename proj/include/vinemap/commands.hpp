#pragma once

#include "vinemap/config.hpp"

#include <optional>
#include <ostream>
#include <string>

namespace vinemap {

// File names used inside command output directories.
inline constexpr const char* kSensorLogFile = "sensor.jsonl";
inline constexpr const char* kDetectionLogFile = "detections.jsonl";
inline constexpr const char* kGroundTruthFile = "ground_truth.csv";
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kMapFile = "map.csv";
inline constexpr const char* kTrajectoryFile = "trajectory.csv";
inline constexpr const char* kRunFile = "run.json";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kAblationErrorsFile = "ablation_errors.csv";
inline constexpr const char* kAblationSummaryFile = "ablation_summary.json";

/// Progress sink; nullptr silences a command.
using LogStream = std::ostream*;

/// Writes sensor.jsonl, detections.jsonl, ground_truth.csv and config.json.
void cmd_simulate(const AppConfig& config, const std::string& out_dir, LogStream log = nullptr);

/// Writes map.csv, trajectory.csv and run.json.
void cmd_map(const std::string& sensor_log, const std::string& detection_log, const AppConfig& config,
             const std::string& out_dir, LogStream log = nullptr);

/// Writes metrics.json.
void cmd_evaluate(const std::string& map_csv, const std::string& truth_csv, const AppConfig& config,
                  const std::string& out_dir, LogStream log = nullptr);

/// Writes ablation_errors.csv and ablation_summary.json.
void cmd_ablate(const std::string& sensor_log, const std::string& detection_log, const std::string& truth_csv,
                const AppConfig& config, const std::string& out_dir, LogStream log = nullptr);

/// Writes one SVG file.
void cmd_render(const std::string& map_csv, const std::optional<std::string>& truth_csv,
                const std::optional<std::string>& trajectory_csv, const std::string& out_svg,
                LogStream log = nullptr);

}  // namespace vinemap
