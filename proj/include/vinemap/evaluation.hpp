#pragma once

#include "vinemap/pipeline.hpp"
#include "vinemap/simulator.hpp"
#include "vinemap/state.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vinemap {

struct MatchPair {
  std::size_t estimate = 0;
  std::size_t truth = 0;
  double distance = 0.0;  ///< xy
};

struct Matching {
  std::vector<MatchPair> pairs;  ///< in order of increasing distance
  std::vector<std::size_t> unmatched_estimates;
  std::vector<std::size_t> unmatched_truth;
};

/// Greedy globally-nearest matching in xy. Pairs farther than r_match are
/// never formed. Equal distances are resolved by (truth, estimate) index.
Matching match_landmarks(std::span<const Vec3> estimated, std::span<const Vec3> truth, double r_match);

struct RowMetrics {
  int rows = 0;                 ///< number of rows covered
  std::optional<double> mae;    ///< absent without matched pairs
  double tp = 0.0;              ///< matched truth / total truth
  std::size_t matched = 0;
  std::size_t truth = 0;
  std::size_t false_landmarks = 0;
};

struct MapMetrics {
  std::vector<RowMetrics> per_row;     ///< entry i covers row i only
  std::vector<RowMetrics> cumulative;  ///< entry i covers rows 0..i
};

/// Row of the nearest truth landmark (xy) for every estimate. Estimates
/// are given row -1 when `truth` is empty.
std::vector<int> assign_rows(std::span<const Vec3> estimated, std::span<const Vec3> truth,
                             std::span<const int> truth_rows);

/// MAE is the mean matched xy distance. An unmatched estimate counts as a
/// false landmark of its assigned row.
MapMetrics compute_metrics(const Matching& matching, std::span<const int> truth_rows,
                           std::span<const int> estimate_rows, int n_rows);

/// xy distance from every truth point to the nearest estimate, or nullopt
/// when there are no estimates.
std::vector<std::optional<double>> nearest_errors(std::span<const Vec3> estimated, std::span<const Vec3> truth);

struct ErrorSummary {
  std::size_t count = 0;
  std::optional<double> median;
  std::optional<double> q1;
  std::optional<double> q3;
  std::optional<double> mean;
  std::optional<double> max;
};

/// Quartiles by linear interpolation between order statistics.
ErrorSummary summarize_errors(std::vector<double> errors);

struct ClassEvaluation {
  LandmarkClass cls = LandmarkClass::kPole;
  MapMetrics metrics;
  Matching matching;
  std::vector<Vec3> estimates;  ///< map landmarks of this class in the truth frame
  std::vector<std::int64_t> estimate_ids;
  std::vector<std::int64_t> truth_ids;
  std::vector<std::optional<double>> nearest;  ///< per truth landmark
};

struct MapEvaluation {
  int rows = 0;
  std::vector<ClassEvaluation> classes;
};

/// Matches map and truth class by class after expressing the map in the
/// truth datum. Row count comes from the truth set.
MapEvaluation evaluate_map(std::span<const MappedLandmark> map, const GeodeticDatum& map_datum,
                           std::span<const GroundTruthLandmark> truth, const GeodeticDatum& truth_datum,
                           double r_match, std::span<const LandmarkClass> classes);

struct AblationVariant {
  std::string name;
  bool disable_rd = false;
  bool disable_rc = false;
};

/// full, no_rd, no_rc, no_rd_no_rc in that order.
std::vector<AblationVariant> ablation_variants();

/// Applies the variant switches to a base configuration.
PipelineConfig variant_config(const PipelineConfig& base, const AblationVariant& variant);

struct AblationOutcome {
  AblationVariant variant;
  std::vector<double> errors;  ///< nearest-estimate xy error per truth landmark of the ablation class
  std::size_t missing = 0;     ///< truth landmarks with no estimate of their class at all
  ErrorSummary summary;
  MapEvaluation evaluation;
  std::size_t landmarks = 0;
};

/// Runs every variant over the same logs.
std::vector<AblationOutcome> run_ablation(const SensorLog& sensors, const DetectionLog& detections,
                                          const PipelineConfig& base, std::span<const GroundTruthLandmark> truth,
                                          const GeodeticDatum& truth_datum, double r_match,
                                          LandmarkClass ablation_class,
                                          std::span<const AblationVariant> variants);

}  // namespace vinemap
