#pragma once

#include "vinemap/solver.hpp"

#include <optional>
#include <span>
#include <vector>

namespace vinemap {

struct RefinementConfig {
  bool enabled = true;
  double sigma_d = 0.1;
  int min_pts = 2;
};

struct ClusterReport {
  LandmarkClass cls = LandmarkClass::kPole;
  std::optional<double> epsilon;  ///< absent when the class has fewer than two landmarks
  std::vector<std::vector<std::int64_t>> clusters;
  std::vector<std::int64_t> noise;
};

struct RefinementResult {
  std::vector<ClusterReport> reports;
  std::size_t factors_added = 0;
  OptimizeReport optimization;
};

/// Half the mean xy nearest-neighbour distance. nullopt for fewer than two points.
std::optional<double> compute_epsilon(std::span<const Vec3> positions);

/// DBSCAN in xy. Labels are cluster indices in discovery order, -1 for noise.
std::vector<int> dbscan(std::span<const Vec3> points, double epsilon, int min_pts);

/// Clusters every class, ties each intra-cluster pair with a
/// zero-displacement factor and re-optimizes the whole graph.
RefinementResult consolidate(FactorGraph& graph, const RefinementConfig& config, const LmConfig& lm);

}  // namespace vinemap
