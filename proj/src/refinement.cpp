#include "vinemap/refinement.hpp"

#include "vinemap/factors.hpp"

#include <deque>
#include <limits>
#include <stdexcept>

namespace vinemap {

std::optional<double> compute_epsilon(std::span<const Vec3> positions) {
  if (positions.size() < 2) return std::nullopt;
  double sum = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < positions.size(); ++j) {
      if (i == j) continue;
      best = std::min(best, (positions[i].head<2>() - positions[j].head<2>()).norm());
    }
    sum += best;
  }
  return 0.5 * sum / static_cast<double>(positions.size());
}

std::vector<int> dbscan(std::span<const Vec3> points, double epsilon, int min_pts) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("dbscan: epsilon must be positive");
  if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be at least 1");
  const std::size_t n = points.size();
  auto neighbours = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j)
      if ((points[i].head<2>() - points[j].head<2>()).norm() <= epsilon) out.push_back(j);
    return out;
  };
  constexpr int kUnvisited = -2;
  std::vector<int> label(n, kUnvisited);
  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    const auto seed = neighbours(i);
    if (static_cast<int>(seed.size()) < min_pts) {
      label[i] = -1;
      continue;
    }
    label[i] = cluster;
    std::deque<std::size_t> queue(seed.begin(), seed.end());
    while (!queue.empty()) {
      const std::size_t j = queue.front();
      queue.pop_front();
      if (label[j] == -1) label[j] = cluster;  // border point
      if (label[j] != kUnvisited) continue;
      label[j] = cluster;
      const auto nb = neighbours(j);
      if (static_cast<int>(nb.size()) >= min_pts) queue.insert(queue.end(), nb.begin(), nb.end());
    }
    ++cluster;
  }
  return label;
}

RefinementResult consolidate(FactorGraph& graph, const RefinementConfig& config, const LmConfig& lm) {
  RefinementResult result;
  const NoiseModel noise = NoiseModel::isotropic(3, config.sigma_d);
  for (LandmarkClass cls : kAllClasses) {
    ClusterReport report;
    report.cls = cls;
    const std::vector<std::int64_t> ids = graph.landmarks_of_class(cls);
    std::vector<Vec3> pos;
    for (std::int64_t id : ids) pos.push_back(graph.values().landmark(id));
    report.epsilon = compute_epsilon(pos);
    if (!report.epsilon || !(*report.epsilon > 0.0)) {
      report.noise = ids;
      result.reports.push_back(std::move(report));
      continue;
    }
    const std::vector<int> labels = dbscan(pos, *report.epsilon, config.min_pts);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (labels[i] < 0) {
        report.noise.push_back(ids[i]);
        continue;
      }
      if (static_cast<std::size_t>(labels[i]) >= report.clusters.size()) report.clusters.resize(labels[i] + 1);
      report.clusters[labels[i]].push_back(ids[i]);
    }
    for (const auto& c : report.clusters) {
      for (std::size_t a = 0; a < c.size(); ++a)
        for (std::size_t b = a + 1; b < c.size(); ++b) {
          graph.add_factor(std::make_shared<ZeroDisplacementFactor>(c[a], c[b], noise));
          ++result.factors_added;
        }
    }
    result.reports.push_back(std::move(report));
  }
  result.optimization = optimize(graph, lm);
  return result;
}

}  // namespace vinemap
