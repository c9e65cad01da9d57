#include "vinemap/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace vinemap {

namespace {

double xy_distance(const Vec3& a, const Vec3& b) { return (a.head<2>() - b.head<2>()).norm(); }

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

Matching match_landmarks(std::span<const Vec3> estimated, std::span<const Vec3> truth, double r_match) {
  if (!(r_match > 0.0)) throw std::invalid_argument("match_landmarks: r_match must be positive");
  struct Candidate {
    double d;
    std::size_t truth, estimate;
  };
  std::vector<Candidate> cands;
  for (std::size_t t = 0; t < truth.size(); ++t)
    for (std::size_t e = 0; e < estimated.size(); ++e) {
      const double d = xy_distance(estimated[e], truth[t]);
      if (d <= r_match) cands.push_back({d, t, e});
    }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.d, a.truth, a.estimate) < std::tie(b.d, b.truth, b.estimate);
  });
  std::vector<bool> used_t(truth.size(), false), used_e(estimated.size(), false);
  Matching m;
  for (const Candidate& c : cands) {
    if (used_t[c.truth] || used_e[c.estimate]) continue;
    used_t[c.truth] = used_e[c.estimate] = true;
    m.pairs.push_back({c.estimate, c.truth, c.d});
  }
  for (std::size_t e = 0; e < estimated.size(); ++e)
    if (!used_e[e]) m.unmatched_estimates.push_back(e);
  for (std::size_t t = 0; t < truth.size(); ++t)
    if (!used_t[t]) m.unmatched_truth.push_back(t);
  return m;
}

std::vector<int> assign_rows(std::span<const Vec3> estimated, std::span<const Vec3> truth,
                             std::span<const int> truth_rows) {
  if (truth.size() != truth_rows.size()) throw std::invalid_argument("assign_rows: size mismatch");
  std::vector<int> out;
  out.reserve(estimated.size());
  for (const Vec3& e : estimated) {
    int row = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double d = xy_distance(e, truth[t]);
      if (d < best) {
        best = d;
        row = truth_rows[t];
      }
    }
    out.push_back(row);
  }
  return out;
}

MapMetrics compute_metrics(const Matching& matching, std::span<const int> truth_rows,
                           std::span<const int> estimate_rows, int n_rows) {
  if (n_rows < 0) throw std::invalid_argument("compute_metrics: negative row count");
  struct Acc {
    double sum = 0.0;
    std::size_t matched = 0, truth = 0, false_lm = 0;
  };
  std::vector<Acc> rows(static_cast<std::size_t>(n_rows));
  auto in_range = [&](int r) { return r >= 0 && r < n_rows; };
  for (int r : truth_rows)
    if (in_range(r)) ++rows[static_cast<std::size_t>(r)].truth;
  for (const MatchPair& p : matching.pairs) {
    const int r = truth_rows[p.truth];
    if (!in_range(r)) continue;
    rows[static_cast<std::size_t>(r)].sum += p.distance;
    ++rows[static_cast<std::size_t>(r)].matched;
  }
  for (std::size_t e : matching.unmatched_estimates) {
    const int r = e < estimate_rows.size() ? estimate_rows[e] : -1;
    if (in_range(r)) ++rows[static_cast<std::size_t>(r)].false_lm;
  }
  auto finish = [](const Acc& a, int covered) {
    RowMetrics m;
    m.rows = covered;
    m.matched = a.matched;
    m.truth = a.truth;
    m.false_landmarks = a.false_lm;
    m.tp = a.truth > 0 ? static_cast<double>(a.matched) / static_cast<double>(a.truth) : 0.0;
    if (a.matched > 0) m.mae = a.sum / static_cast<double>(a.matched);
    return m;
  };
  MapMetrics out;
  Acc total;
  for (int r = 0; r < n_rows; ++r) {
    const Acc& a = rows[static_cast<std::size_t>(r)];
    out.per_row.push_back(finish(a, 1));
    total.sum += a.sum;
    total.matched += a.matched;
    total.truth += a.truth;
    total.false_lm += a.false_lm;
    out.cumulative.push_back(finish(total, r + 1));
  }
  return out;
}

std::vector<std::optional<double>> nearest_errors(std::span<const Vec3> estimated, std::span<const Vec3> truth) {
  std::vector<std::optional<double>> out;
  out.reserve(truth.size());
  for (const Vec3& t : truth) {
    std::optional<double> best;
    for (const Vec3& e : estimated) {
      const double d = xy_distance(e, t);
      if (!best || d < *best) best = d;
    }
    out.push_back(best);
  }
  return out;
}

ErrorSummary summarize_errors(std::vector<double> errors) {
  ErrorSummary s;
  s.count = errors.size();
  if (errors.empty()) return s;
  std::sort(errors.begin(), errors.end());
  s.median = quantile(errors, 0.5);
  s.q1 = quantile(errors, 0.25);
  s.q3 = quantile(errors, 0.75);
  s.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
  s.max = errors.back();
  return s;
}

MapEvaluation evaluate_map(std::span<const MappedLandmark> map, const GeodeticDatum& map_datum,
                           std::span<const GroundTruthLandmark> truth, const GeodeticDatum& truth_datum,
                           double r_match, std::span<const LandmarkClass> classes) {
  MapEvaluation out;
  for (const GroundTruthLandmark& g : truth) out.rows = std::max(out.rows, g.row + 1);
  for (LandmarkClass cls : classes) {
    ClassEvaluation ce;
    ce.cls = cls;
    std::vector<Vec3> gt;
    std::vector<int> gt_rows;
    for (const GroundTruthLandmark& g : truth) {
      if (g.cls != cls) continue;
      gt.push_back(g.position);
      gt_rows.push_back(g.row);
      ce.truth_ids.push_back(g.id);
    }
    for (const MappedLandmark& m : map) {
      if (m.cls != cls) continue;
      ce.estimates.push_back(rebase_enu(m.position, map_datum, truth_datum));
      ce.estimate_ids.push_back(m.id);
    }
    ce.matching = match_landmarks(ce.estimates, gt, r_match);
    const std::vector<int> est_rows = assign_rows(ce.estimates, gt, gt_rows);
    ce.metrics = compute_metrics(ce.matching, gt_rows, est_rows, out.rows);
    ce.nearest = nearest_errors(ce.estimates, gt);
    out.classes.push_back(std::move(ce));
  }
  return out;
}

std::vector<AblationVariant> ablation_variants() {
  return {{"full", false, false}, {"no_rd", true, false}, {"no_rc", false, true}, {"no_rd_no_rc", true, true}};
}

PipelineConfig variant_config(const PipelineConfig& base, const AblationVariant& variant) {
  PipelineConfig c = base;
  if (variant.disable_rd) c.perception.use_reference_point = false;
  if (variant.disable_rc) c.deferred_commitment = false;
  return c;
}

std::vector<AblationOutcome> run_ablation(const SensorLog& sensors, const DetectionLog& detections,
                                          const PipelineConfig& base, std::span<const GroundTruthLandmark> truth,
                                          const GeodeticDatum& truth_datum, double r_match,
                                          LandmarkClass ablation_class,
                                          std::span<const AblationVariant> variants) {
  std::vector<AblationOutcome> out;
  const LandmarkClass classes[] = {ablation_class};
  for (const AblationVariant& v : variants) {
    const MapResult map = run_pipeline(sensors, detections, variant_config(base, v));
    AblationOutcome o;
    o.variant = v;
    o.landmarks = map.landmarks.size();
    o.evaluation = evaluate_map(map.landmarks, map.datum, truth, truth_datum, r_match, classes);
    for (const std::optional<double>& e : o.evaluation.classes.front().nearest) {
      if (e) {
        o.errors.push_back(*e);
      } else {
        ++o.missing;
      }
    }
    o.summary = summarize_errors(o.errors);
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace vinemap
