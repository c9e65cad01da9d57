#include "vinemap/evaluation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace vinemap;

namespace {

std::vector<Vec3> random_points(std::mt19937_64& rng, int n, double extent) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i) out.emplace_back(u(rng), u(rng), u(rng));
  return out;
}

std::vector<double> sorted_distances(const Matching& m) {
  std::vector<double> d;
  for (const auto& p : m.pairs) d.push_back(p.distance);
  std::sort(d.begin(), d.end());
  return d;
}

// Largest number of pairs within r over every injective assignment.
std::size_t brute_force_max_pairs(const std::vector<Vec3>& est, const std::vector<Vec3>& gt, double r) {
  std::vector<int> perm(est.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t n = 0;
    for (std::size_t t = 0; t < gt.size() && t < perm.size(); ++t)
      if ((est[perm[t]] - gt[t]).head<2>().norm() <= r) ++n;
    best = std::max(best, n);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

GroundTruthLandmark gt(std::int64_t id, LandmarkClass cls, int row, const Vec3& p) {
  GroundTruthLandmark g;
  g.id = id;
  g.cls = cls;
  g.row = row;
  g.position = p;
  return g;
}

}  // namespace

TEST(MatchLandmarks, IdenticalSets) {
  std::mt19937_64 rng(1);
  const auto pts = random_points(rng, 20, 50.0);
  const Matching m = match_landmarks(pts, pts, 0.5);
  EXPECT_EQ(m.pairs.size(), 20u);
  for (const auto& p : m.pairs) EXPECT_EQ(p.distance, 0.0);
}

TEST(MatchLandmarks, RigidShift) {
  std::vector<Vec3> truth, est;
  for (int i = 0; i < 17; ++i) {
    truth.emplace_back(6.0 * i, 0.0, 0.0);
    est.emplace_back(6.0 * i + 0.1, 0.0, 0.3);
  }
  const Matching m = match_landmarks(est, truth, 0.5);
  const std::vector<int> rows(17, 0);
  const MapMetrics metrics = compute_metrics(m, rows, std::vector<int>(17, 0), 1);
  EXPECT_EQ(metrics.cumulative[0].matched, 17u);
  EXPECT_NEAR(*metrics.cumulative[0].mae, 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(metrics.cumulative[0].tp, 1.0);
}

TEST(MatchLandmarks, TwoEstimatesOneTruth) {
  const std::vector<Vec3> truth{{0, 0, 0}};
  const std::vector<Vec3> est{{0.1, 0, 0}, {0.2, 0, 0}};
  const Matching m = match_landmarks(est, truth, 0.5);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].estimate, 0u);
  EXPECT_EQ(m.unmatched_estimates, std::vector<std::size_t>{1});
  EXPECT_EQ(brute_force_max_pairs(est, truth, 0.5), 1u);
  const MapMetrics metrics = compute_metrics(m, std::vector<int>{0}, std::vector<int>{0, 0}, 1);
  EXPECT_EQ(metrics.per_row[0].false_landmarks, 1u);
}

TEST(MatchLandmarks, GreedyAgreesWithBruteForceOnSparseSets) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    // spacing well above r_match, as in vineyard rows
    std::vector<Vec3> truth, est;
    std::normal_distribution<double> n(0.0, 0.2);
    for (int i = 0; i < 5; ++i) truth.emplace_back(3.0 * i, 0.0, 0.0);
    for (int i = 0; i < 6; ++i) est.emplace_back(3.0 * (i % 5) + n(rng), n(rng), 0.0);
    const Matching m = match_landmarks(est, truth, 0.5);
    EXPECT_EQ(m.pairs.size(), brute_force_max_pairs(est, truth, 0.5));
  }
}

TEST(MatchLandmarks, RadiusIsRespected) {
  const std::vector<Vec3> truth{{0, 0, 0}};
  EXPECT_TRUE(match_landmarks(std::vector<Vec3>{{0.51, 0, 0}}, truth, 0.5).pairs.empty());
  EXPECT_EQ(match_landmarks(std::vector<Vec3>{{0.5, 0, 0}}, truth, 0.5).pairs.size(), 1u);
  EXPECT_THROW(match_landmarks(truth, truth, 0.0), std::invalid_argument);
}

TEST(MatchLandmarks, SymmetricInRoles) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_points(rng, 30, 10.0);
    const auto b = random_points(rng, 25, 10.0);
    EXPECT_EQ(sorted_distances(match_landmarks(a, b, 0.8)), sorted_distances(match_landmarks(b, a, 0.8)));
  }
}

TEST(ComputeMetrics, TranslationCovariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.1);
  std::vector<Vec3> truth, est;
  for (int i = 0; i < 30; ++i) {
    truth.emplace_back(2.0 * i, 0.0, 0.0);
    est.push_back(truth.back() + Vec3(n(rng), n(rng), 0.0));
  }
  const std::vector<int> rows(30, 0);
  const double mae = *compute_metrics(match_landmarks(est, truth, 0.5), rows, rows, 1).cumulative[0].mae;
  const Vec3 shift(123.4, -56.7, 8.0);
  for (auto& p : truth) p += shift;
  for (auto& p : est) p += shift;
  EXPECT_NEAR(*compute_metrics(match_landmarks(est, truth, 0.5), rows, rows, 1).cumulative[0].mae, mae, 1e-9);
}

TEST(ComputeMetrics, CumulativeEqualsUnionRecomputation) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 0.1);  // keeps every true estimate within r_match
  std::vector<Vec3> truth, est;
  std::vector<int> rows;
  for (int r = 0; r < 3; ++r)
    for (int i = 0; i < 17; ++i) {
      truth.emplace_back(6.0 * i, 2.5 * r, 0.0);
      rows.push_back(r);
      if ((i + r) % 7) est.push_back(truth.back() + Vec3(n(rng), n(rng), 0.0));
    }
  est.emplace_back(3.0, 2.5, 0.0);  // one false landmark in row 1
  const Matching m = match_landmarks(est, truth, 0.5);
  const auto est_rows = assign_rows(est, truth, rows);
  const MapMetrics metrics = compute_metrics(m, rows, est_rows, 3);
  for (int upto = 0; upto < 3; ++upto) {
    std::vector<Vec3> t_sub, e_sub;
    std::vector<int> r_sub, er_sub;
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (rows[i] <= upto) {
        t_sub.push_back(truth[i]);
        r_sub.push_back(rows[i]);
      }
    for (std::size_t i = 0; i < est.size(); ++i)
      if (est_rows[i] <= upto) {
        e_sub.push_back(est[i]);
        er_sub.push_back(est_rows[i]);
      }
    const MapMetrics sub = compute_metrics(match_landmarks(e_sub, t_sub, 0.5), r_sub, er_sub, upto + 1);
    const RowMetrics& a = metrics.cumulative[upto];
    const RowMetrics& b = sub.cumulative[upto];
    EXPECT_EQ(a.matched, b.matched);
    EXPECT_EQ(a.truth, b.truth);
    EXPECT_EQ(a.false_landmarks, b.false_landmarks);
    EXPECT_NEAR(*a.mae, *b.mae, 1e-12);
    EXPECT_EQ(a.rows, upto + 1);
  }
  std::size_t matched = 0, false_lm = 0;
  for (const auto& r : metrics.per_row) {
    matched += r.matched;
    false_lm += r.false_landmarks;
  }
  EXPECT_EQ(matched, metrics.cumulative.back().matched);
  EXPECT_EQ(false_lm, 1u);
}

TEST(ComputeMetrics, EmptyMatching) {
  const MapMetrics m = compute_metrics(Matching{}, std::vector<int>{0, 0}, std::vector<int>{}, 1);
  EXPECT_FALSE(m.cumulative[0].mae);
  EXPECT_DOUBLE_EQ(m.cumulative[0].tp, 0.0);
}

TEST(ComputeMetrics, SeventeenOfSeventeen) {
  std::vector<Vec3> truth;
  for (int i = 0; i < 17; ++i) truth.emplace_back(6.0 * i, 0, 0);
  const std::vector<int> rows(17, 0);
  EXPECT_DOUBLE_EQ(compute_metrics(match_landmarks(truth, truth, 0.5), rows, rows, 1).per_row[0].tp, 1.0);
}

TEST(ComputeMetrics, MaeIsArithmeticMean) {
  const std::vector<Vec3> truth{{0, 0, 0}, {5, 0, 0}, {10, 0, 0}};
  const std::vector<Vec3> est{{0.1, 0, 0}, {5.2, 0, 0}, {10.3, 0, 0}};
  const std::vector<int> rows(3, 0);
  EXPECT_NEAR(*compute_metrics(match_landmarks(est, truth, 0.5), rows, rows, 1).cumulative[0].mae, 0.2, 1e-12);
}

TEST(SummarizeErrors, Quartiles) {
  const ErrorSummary s = summarize_errors({4, 1, 3, 2, 5});
  EXPECT_EQ(s.count, 5u);
  EXPECT_DOUBLE_EQ(*s.median, 3.0);
  EXPECT_DOUBLE_EQ(*s.q1, 2.0);
  EXPECT_DOUBLE_EQ(*s.q3, 4.0);
  EXPECT_DOUBLE_EQ(*s.mean, 3.0);
  EXPECT_DOUBLE_EQ(*s.max, 5.0);
  EXPECT_DOUBLE_EQ(*summarize_errors({1, 2, 3, 4}).median, 2.5);
  EXPECT_FALSE(summarize_errors({}).median);
}

TEST(EvaluateMap, ClassesAndDatumRebase) {
  const GeodeticDatum truth_datum{44.4949, 11.3426, 54.0};
  const GeodeticDatum map_datum{44.4950, 11.3427, 55.0};
  std::vector<GroundTruthLandmark> truth;
  std::vector<MappedLandmark> map;
  for (int i = 0; i < 10; ++i) {
    const LandmarkClass cls = i % 2 ? LandmarkClass::kPole : LandmarkClass::kTrunk;
    truth.push_back(gt(i, cls, i / 5, Vec3(3.0 * i, 2.5 * (i / 5), 0.0)));
    MappedLandmark m;
    m.id = 100 + i;
    m.cls = cls;
    m.position = rebase_enu(truth.back().position + Vec3(0.05, 0, 0), truth_datum, map_datum);
    map.push_back(m);
  }
  const LandmarkClass classes[] = {LandmarkClass::kPole, LandmarkClass::kTrunk};
  const MapEvaluation e = evaluate_map(map, map_datum, truth, truth_datum, 0.5, classes);
  EXPECT_EQ(e.rows, 2);
  ASSERT_EQ(e.classes.size(), 2u);
  for (const ClassEvaluation& c : e.classes) {
    EXPECT_EQ(c.metrics.cumulative.back().matched, 5u);
    EXPECT_NEAR(*c.metrics.cumulative.back().mae, 0.05, 1e-6);
    for (const auto& d : c.nearest) EXPECT_NEAR(*d, 0.05, 1e-6);
  }
}

TEST(EvaluateMap, PermutationInvariant) {
  const GeodeticDatum datum{44.4949, 11.3426, 54.0};
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 0.1);
  std::vector<GroundTruthLandmark> truth;
  std::vector<MappedLandmark> map;
  for (int i = 0; i < 30; ++i) {
    truth.push_back(gt(i, LandmarkClass::kPole, i / 10, Vec3(6.0 * (i % 10), 2.5 * (i / 10), 0)));
    MappedLandmark m;
    m.id = i;
    m.position = truth.back().position + Vec3(n(rng), n(rng), 0);
    map.push_back(m);
  }
  const LandmarkClass classes[] = {LandmarkClass::kPole};
  const MapEvaluation a = evaluate_map(map, datum, truth, datum, 0.5, classes);
  std::shuffle(map.begin(), map.end(), rng);
  std::shuffle(truth.begin(), truth.end(), rng);
  const MapEvaluation b = evaluate_map(map, datum, truth, datum, 0.5, classes);
  for (int r = 0; r < 3; ++r) {
    EXPECT_EQ(a.classes[0].metrics.cumulative[r].matched, b.classes[0].metrics.cumulative[r].matched);
    EXPECT_NEAR(*a.classes[0].metrics.cumulative[r].mae, *b.classes[0].metrics.cumulative[r].mae, 1e-12);
  }
}

TEST(Ablation, VariantSwitches) {
  const auto variants = ablation_variants();
  ASSERT_EQ(variants.size(), 4u);
  const PipelineConfig base;
  for (const auto& v : variants) {
    const PipelineConfig c = variant_config(base, v);
    EXPECT_EQ(c.perception.use_reference_point, !v.disable_rd);
    EXPECT_EQ(c.deferred_commitment, !v.disable_rc);
  }
  EXPECT_EQ(variants[0].name, "full");
  EXPECT_TRUE(variants[3].disable_rd && variants[3].disable_rc);
}

TEST(Ablation, NoiselessVariantsAgree) {
  WorldConfig w;
  w.rows = 1;
  w.row_length = 30.0;
  const auto truth = generate_world(w);
  const Trajectory traj(w, TrajectoryConfig{});
  const SimulatedLogs logs = synthesize_logs(w, truth, traj, NoiseConfig::noiseless(), SensorRig{}, 1);
  const auto outcomes = run_ablation(logs.sensors, logs.detections, PipelineConfig{}, truth, w.datum, 0.5,
                                     LandmarkClass::kPole, ablation_variants());
  ASSERT_EQ(outcomes.size(), 4u);
  for (const AblationOutcome& o : outcomes) {
    EXPECT_EQ(o.missing, 0u) << o.variant.name;
    ASSERT_EQ(o.errors.size(), outcomes[0].errors.size());
    for (std::size_t i = 0; i < o.errors.size(); ++i) EXPECT_NEAR(o.errors[i], outcomes[0].errors[i], 1e-3);
  }
}
