#pragma once

#include "vinemap/graph_types.hpp"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

namespace vinemap {

using FactorPtr = std::shared_ptr<const Factor>;

/// Variables, their current estimates, and the factors over them. Copying a
/// graph shares the (immutable) factors.
class FactorGraph {
 public:
  void add_pose(std::int64_t index, const Pose& initial);
  void add_velocity(std::int64_t index, const Vec3& initial);
  void add_landmark(std::int64_t index, LandmarkClass cls, const Vec3& initial);

  /// Throws std::invalid_argument if the factor references a missing key.
  void add_factor(FactorPtr factor);

  const Values& values() const { return values_; }
  Values& mutable_values() { return values_; }
  const std::vector<FactorPtr>& factors() const { return factors_; }

  std::optional<LandmarkClass> landmark_class(std::int64_t index) const;
  std::vector<std::int64_t> landmarks_of_class(LandmarkClass cls) const;
  std::size_t num_variables() const { return values_.size(); }

  /// Sum of robustified whitened squared residuals (0.5 * ||r||^2 per factor).
  double total_cost() const { return total_cost(values_); }
  double total_cost(const Values& values) const;

 private:
  void require_unused(const Key& key) const;

  Values values_;
  std::map<std::int64_t, LandmarkClass> landmark_classes_;
  std::vector<FactorPtr> factors_;
};

struct LmConfig {
  int max_iters = 100;
  double lambda_init = 1e-4;
  double tol = 1e-8;
  bool check_rank = true;
  /// Below this many variables the normal equations use a dense solver.
  std::size_t dense_threshold = 200;
};

struct OptimizeReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  std::vector<double> cost_history;  ///< cost after each accepted step, starting with the initial cost
};

/// Levenberg-Marquardt on the robustified objective. Estimates are written
/// back into the graph. Throws SolverError if the undamped normal equations
/// are singular at the first iteration (and check_rank is set).
OptimizeReport optimize(FactorGraph& graph, const LmConfig& config);

/// Like optimize, but only the listed variables move; all others are held
/// at their current estimates.
OptimizeReport optimize_subset(FactorGraph& graph, const LmConfig& config, const std::set<Key>& free_variables);

/// New variables and factors appended by one incremental step.
struct GraphUpdate {
  std::vector<std::pair<std::int64_t, Pose>> poses;
  std::vector<std::pair<std::int64_t, Vec3>> velocities;
  struct NewLandmark {
    std::int64_t index;
    LandmarkClass cls;
    Vec3 position;
  };
  std::vector<NewLandmark> landmarks;
  std::vector<FactorPtr> factors;

  bool empty() const { return poses.empty() && velocities.empty() && landmarks.empty() && factors.empty(); }
};

/// Applies the update and re-solves warm-started from the current estimate
/// with at most `max_iters` iterations. An empty update leaves the estimate
/// untouched.
OptimizeReport incremental_update(FactorGraph& graph, const GraphUpdate& update, const LmConfig& config);

/// Windowed variant: after applying the update only `free_variables` are
/// re-solved.
OptimizeReport incremental_update(FactorGraph& graph, const GraphUpdate& update, const LmConfig& config,
                                  const std::set<Key>& free_variables);

/// Gradient of the robustified cost at the current estimate (tangent order
/// of the variable ordering). Used to verify stationarity.
Eigen::VectorXd cost_gradient(const FactorGraph& graph);

/// Marginal 3x3 covariance of every landmark at the current estimate.
std::map<std::int64_t, Mat3> landmark_marginals(const FactorGraph& graph);

}  // namespace vinemap
