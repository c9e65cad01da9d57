#include "vinemap/solver.hpp"

#include "vinemap/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vinemap {

void FactorGraph::require_unused(const Key& key) const {
  if (values_.contains(key)) throw std::invalid_argument("duplicate variable " + to_string(key));
}

void FactorGraph::add_pose(std::int64_t index, const Pose& initial) {
  require_unused(pose_key(index));
  values_.poses.emplace(index, initial);
}

void FactorGraph::add_velocity(std::int64_t index, const Vec3& initial) {
  require_unused(velocity_key(index));
  values_.velocities.emplace(index, initial);
}

void FactorGraph::add_landmark(std::int64_t index, LandmarkClass cls, const Vec3& initial) {
  require_unused(landmark_key(index));
  values_.landmarks.emplace(index, initial);
  landmark_classes_.emplace(index, cls);
}

void FactorGraph::add_factor(FactorPtr factor) {
  if (!factor) throw std::invalid_argument("null factor");
  for (const Key& k : factor->keys()) {
    if (!values_.contains(k))
      throw std::invalid_argument(std::string(factor->name()) + " factor references missing " + to_string(k));
  }
  factors_.push_back(std::move(factor));
}

std::optional<LandmarkClass> FactorGraph::landmark_class(std::int64_t index) const {
  auto it = landmark_classes_.find(index);
  if (it == landmark_classes_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::int64_t> FactorGraph::landmarks_of_class(LandmarkClass cls) const {
  std::vector<std::int64_t> out;
  for (const auto& [idx, c] : landmark_classes_)
    if (c == cls) out.push_back(idx);
  return out;
}

double FactorGraph::total_cost(const Values& values) const {
  double cost = 0.0;
  Eigen::VectorXd r;
  for (const FactorPtr& f : factors_) {
    if (!f->evaluate(values, r, nullptr)) continue;
    const double e = f->noise().whiten(r).norm();
    cost += f->noise().robust_cost(e);
  }
  return cost;
}

namespace {

struct Ordering {
  std::map<Key, int> offset;
  std::vector<Key> keys;
  int dim = 0;
};

template <typename Pred>
Ordering make_ordering(const Values& values, Pred is_free) {
  Ordering o;
  auto push = [&](const Key& k) {
    if (!is_free(k)) return;
    o.offset.emplace(k, o.dim);
    o.keys.push_back(k);
    o.dim += tangent_dim(k.kind);
  };
  for (const auto& [i, _] : values.poses) push(pose_key(i));
  for (const auto& [i, _] : values.velocities) push(velocity_key(i));
  for (const auto& [i, _] : values.landmarks) push(landmark_key(i));
  return o;
}

Ordering make_ordering(const Values& values) {
  return make_ordering(values, [](const Key&) { return true; });
}

void retract_in_place(Values& out, const Ordering& ordering, const Eigen::VectorXd& delta) {
  for (const Key& k : ordering.keys) {
    const int off = ordering.offset.at(k);
    switch (k.kind) {
      case VarKind::kPose: {
        Pose& p = out.poses.at(k.index);
        p = p.retract(delta.segment<6>(off));
        break;
      }
      case VarKind::kVelocity: out.velocities.at(k.index) += delta.segment<3>(off); break;
      case VarKind::kLandmark: out.landmarks.at(k.index) += delta.segment<3>(off); break;
    }
  }
}

// The factors touching at least one free variable, with the tangent offset
// of each key (-1 for variables held fixed).
struct Problem {
  Ordering ordering;
  std::vector<const Factor*> factors;
  std::vector<std::vector<int>> offsets;
  bool dense = false;

  // Sparse assembly: lower-triangle pattern and, for every emitted entry,
  // its slot in the compressed value array. Built on first linearization.
  Eigen::SparseMatrix<double> pattern;
  std::vector<int> slots;
  bool pattern_ready = false;
};

Problem make_problem(const FactorGraph& graph, Ordering ordering, bool dense) {
  Problem p;
  p.ordering = std::move(ordering);
  p.dense = dense;
  for (const FactorPtr& f : graph.factors()) {
    std::vector<int> offs;
    bool any = false;
    for (const Key& k : f->keys()) {
      auto it = p.ordering.offset.find(k);
      offs.push_back(it == p.ordering.offset.end() ? -1 : it->second);
      any = any || offs.back() >= 0;
    }
    if (!any) continue;
    p.factors.push_back(f.get());
    p.offsets.push_back(std::move(offs));
  }
  return p;
}

double problem_cost(const Problem& p, const Values& values) {
  double cost = 0.0;
  Eigen::VectorXd r;
  for (const Factor* f : p.factors) {
    if (!f->evaluate(values, r, nullptr)) continue;
    cost += f->noise().robust_cost(f->noise().whiten(r).norm());
  }
  return cost;
}

// Gauss-Newton normal equations with IRLS weights. In sparse mode only the
// lower triangle is stored; inactive factors still contribute explicit zeros
// so the sparsity pattern is fixed for a given problem.
struct NormalEquations {
  bool dense = false;
  Eigen::MatrixXd h_dense;
  Eigen::SparseMatrix<double> h_sparse;
  Eigen::VectorXd g;
  double cost = 0.0;
};

// Visits every lower-triangle entry a factor contributes, in a fixed order.
template <typename Emit>
void for_each_entry(const Factor& f, const std::vector<int>& offs, Emit emit) {
  const auto& keys = f.keys();
  for (std::size_t a = 0; a < keys.size(); ++a) {
    if (offs[a] < 0) continue;
    for (std::size_t b = 0; b < keys.size(); ++b) {
      if (offs[b] < 0 || offs[a] < offs[b]) continue;
      const int da = tangent_dim(keys[a].kind), db = tangent_dim(keys[b].kind);
      for (int i = 0; i < da; ++i)
        for (int j = 0; j < db; ++j)
          if (offs[a] + i >= offs[b] + j) emit(a, b, i, j);
    }
  }
}

void build_pattern(Problem& p) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t n = 0; n < p.factors.size(); ++n) {
    const auto& offs = p.offsets[n];
    for_each_entry(*p.factors[n], offs, [&](std::size_t a, std::size_t b, int i, int j) {
      triplets.emplace_back(offs[a] + i, offs[b] + j, 0.0);
    });
  }
  const int n = p.ordering.dim;
  for (int c = 0; c < n; ++c) triplets.emplace_back(c, c, 0.0);
  p.pattern.resize(n, n);
  p.pattern.setFromTriplets(triplets.begin(), triplets.end());
  p.pattern.makeCompressed();
  p.slots.clear();
  p.slots.reserve(triplets.size());
  const int* outer = p.pattern.outerIndexPtr();
  const int* inner = p.pattern.innerIndexPtr();
  for (const auto& t : triplets) {
    const int* lo = inner + outer[t.col()];
    const int* hi = inner + outer[t.col() + 1];
    p.slots.push_back(static_cast<int>(std::lower_bound(lo, hi, t.row()) - inner));
  }
  p.pattern_ready = true;
}

NormalEquations linearize(Problem& p, const Values& values) {
  NormalEquations ne;
  ne.dense = p.dense;
  const int n = p.ordering.dim;
  ne.g = Eigen::VectorXd::Zero(n);
  double* hv = nullptr;
  if (p.dense) {
    ne.h_dense = Eigen::MatrixXd::Zero(n, n);
  } else {
    if (!p.pattern_ready) build_pattern(p);
    ne.h_sparse = p.pattern;
    std::fill(ne.h_sparse.valuePtr(), ne.h_sparse.valuePtr() + ne.h_sparse.nonZeros(), 0.0);
    hv = ne.h_sparse.valuePtr();
  }

  std::size_t slot = 0;
  Eigen::VectorXd r;
  std::vector<Eigen::MatrixXd> jac;
  std::vector<Eigen::MatrixXd> wj;
  for (std::size_t fi = 0; fi < p.factors.size(); ++fi) {
    const Factor& f = *p.factors[fi];
    const auto& offs = p.offsets[fi];
    const auto& keys = f.keys();
    const bool active = f.evaluate(values, r, &jac);
    if (!active) {
      if (!p.dense) for_each_entry(f, offs, [&](std::size_t, std::size_t, int, int) { ++slot; });
      continue;
    }
    const NoiseModel& noise = f.noise();
    Eigen::VectorXd rw = noise.whiten(r);
    const double e = rw.norm();
    ne.cost += noise.robust_cost(e);
    const double sw = std::sqrt(noise.robust_weight(e));
    rw *= sw;
    wj.resize(keys.size());
    for (std::size_t a = 0; a < keys.size(); ++a) {
      if (offs[a] < 0) continue;
      wj[a] = sw * noise.whiten(jac[a]);
      ne.g.segment(offs[a], wj[a].cols()) += wj[a].transpose() * rw;
    }
    for (std::size_t a = 0; a < keys.size(); ++a) {
      if (offs[a] < 0) continue;
      for (std::size_t b = 0; b < keys.size(); ++b) {
        if (offs[b] < 0 || offs[a] < offs[b]) continue;
        const Eigen::MatrixXd block = wj[a].transpose() * wj[b];
        if (p.dense) {
          ne.h_dense.block(offs[a], offs[b], block.rows(), block.cols()) += block;
          if (a != b) ne.h_dense.block(offs[b], offs[a], block.cols(), block.rows()) += block.transpose();
        } else {
          for (int i = 0; i < block.rows(); ++i)
            for (int j = 0; j < block.cols(); ++j)
              if (offs[a] + i >= offs[b] + j) hv[p.slots[slot++]] += block(i, j);
        }
      }
    }
  }
  // Cost of factors outside the problem is constant and excluded.
  return ne;
}

constexpr double kSingularPivot = 1e-12;

std::string describe_singular(const Ordering& ordering, int column) {
  for (auto it = ordering.keys.rbegin(); it != ordering.keys.rend(); ++it) {
    if (ordering.offset.at(*it) <= column) return to_string(*it);
  }
  return "?";
}

// Solves (H + lambda * D) x = rhs with D the clamped diagonal of H. The
// symbolic analysis is done once; the pattern never changes within a solve.
class LinearSolver {
 public:
  LinearSolver(const Problem& problem) : problem_(problem) {
    if (!problem.dense) {
      const auto& h = problem.pattern;
      const int n = problem.ordering.dim;
      diag_pos_.assign(n, -1);
      for (int c = 0; c < n; ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(h, c); it; ++it)
          if (it.row() == c) {
            diag_pos_[c] = static_cast<int>(&it.value() - h.valuePtr());
            break;
          }
      ldlt_.analyzePattern(h);
    }
  }

  void set(const NormalEquations& ne) {
    ne_ = &ne;
    const int n = problem_.ordering.dim;
    diag_.resize(n);
    if (ne.dense) {
      diag_ = ne.h_dense.diagonal();
    } else {
      const double* v = ne.h_sparse.valuePtr();
      for (int c = 0; c < n; ++c) diag_(c) = v[diag_pos_[c]];
    }
    for (int c = 0; c < n; ++c)
      if (!(diag_(c) > 0.0))
        throw SolverError("normal equations singular: no information on " + describe_singular(problem_.ordering, c));
    diag_ = diag_.cwiseMax(1e-6).cwiseMin(1e32);
  }

  void check_rank() {
    if (ne_->dense) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(ne_->h_dense);
      check_pivots(ldlt.vectorD(), ldlt.info() == Eigen::Success);
    } else {
      ldlt_.factorize(ne_->h_sparse);
      check_pivots(ldlt_.vectorD(), ldlt_.info() == Eigen::Success);
    }
  }

  bool solve(double lambda, const Eigen::VectorXd& rhs, Eigen::VectorXd& x) {
    if (ne_->dense) {
      Eigen::MatrixXd h = ne_->h_dense;
      h.diagonal() += lambda * diag_;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      if (ldlt.info() != Eigen::Success) return false;
      x = ldlt.solve(rhs);
    } else {
      Eigen::SparseMatrix<double> h = ne_->h_sparse;
      double* v = h.valuePtr();
      for (int c = 0; c < static_cast<int>(diag_pos_.size()); ++c) v[diag_pos_[c]] += lambda * diag_(c);
      ldlt_.factorize(h);
      if (ldlt_.info() != Eigen::Success) return false;
      x = ldlt_.solve(rhs);
    }
    return x.allFinite();
  }

 private:
  static void check_pivots(const Eigen::VectorXd& d, bool ok) {
    const double dmax = d.size() > 0 ? d.cwiseAbs().maxCoeff() : 0.0;
    int bad = 0;
    for (int i = 0; i < d.size(); ++i)
      if (!(d(i) > kSingularPivot * dmax)) ++bad;
    if (!ok || bad > 0) {
      throw SolverError("normal equations singular (" + std::to_string(bad) +
                        " null pivot(s)); the gauge is under-constrained");
    }
  }

  const Problem& problem_;
  const NormalEquations* ne_ = nullptr;
  Eigen::VectorXd diag_;
  std::vector<int> diag_pos_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

OptimizeReport run_lm(FactorGraph& graph, Problem& problem, const LmConfig& config) {
  OptimizeReport report;
  Values values = graph.values();
  const double fixed_cost = graph.total_cost(values) - problem_cost(problem, values);

  NormalEquations ne = linearize(problem, values);
  double cost = ne.cost;
  report.initial_cost = cost + fixed_cost;
  report.final_cost = report.initial_cost;
  report.cost_history.push_back(report.initial_cost);
  if (problem.ordering.dim == 0 || problem.factors.empty()) {
    report.converged = true;
    return report;
  }

  LinearSolver solver(problem);
  double lambda = config.lambda_init;
  Eigen::VectorXd delta;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    solver.set(ne);
    if (iter == 0 && config.check_rank) solver.check_rank();
    if (cost <= std::numeric_limits<double>::min()) {
      report.converged = true;
      break;
    }

    bool accepted = false;
    double new_cost = cost;
    Values candidate;
    while (!accepted) {
      if (solver.solve(lambda, -ne.g, delta)) {
        candidate = values;
        retract_in_place(candidate, problem.ordering, delta);
        new_cost = problem_cost(problem, candidate);
        if (std::isfinite(new_cost) && new_cost <= cost) {
          accepted = true;
          break;
        }
      }
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
    if (!accepted) {
      // No descent direction left at any damping: at a minimum to precision.
      report.converged = true;
      break;
    }

    const double rel = (cost - new_cost) / std::max(cost + fixed_cost, std::numeric_limits<double>::min());
    values = std::move(candidate);
    cost = new_cost;
    lambda = std::max(lambda * 0.1, 1e-12);
    ++report.iterations;
    report.cost_history.push_back(cost + fixed_cost);
    if (rel < config.tol) {
      report.converged = true;
      break;
    }
    if (iter + 1 < config.max_iters) ne = linearize(problem, values);
  }

  graph.mutable_values() = std::move(values);
  report.final_cost = cost + fixed_cost;
  return report;
}

bool use_dense(std::size_t variables, const LmConfig& config) { return variables < config.dense_threshold; }

}  // namespace

OptimizeReport optimize(FactorGraph& graph, const LmConfig& config) {
  Problem problem = make_problem(graph, make_ordering(graph.values()), use_dense(graph.num_variables(), config));
  return run_lm(graph, problem, config);
}

OptimizeReport optimize_subset(FactorGraph& graph, const LmConfig& config, const std::set<Key>& free_variables) {
  for (const Key& k : free_variables)
    if (!graph.values().contains(k)) throw std::invalid_argument("optimize_subset: unknown variable " + to_string(k));
  Ordering ordering = make_ordering(graph.values(), [&](const Key& k) { return free_variables.count(k) > 0; });
  Problem problem = make_problem(graph, std::move(ordering), use_dense(free_variables.size(), config));
  return run_lm(graph, problem, config);
}

namespace {

void apply_update(FactorGraph& graph, const GraphUpdate& update) {
  for (const auto& [i, p] : update.poses) graph.add_pose(i, p);
  for (const auto& [i, v] : update.velocities) graph.add_velocity(i, v);
  for (const auto& l : update.landmarks) graph.add_landmark(l.index, l.cls, l.position);
  for (const FactorPtr& f : update.factors) graph.add_factor(f);
}

OptimizeReport unchanged(const FactorGraph& graph) {
  OptimizeReport r;
  r.initial_cost = r.final_cost = graph.total_cost();
  r.cost_history.push_back(r.initial_cost);
  r.converged = true;
  return r;
}

}  // namespace

OptimizeReport incremental_update(FactorGraph& graph, const GraphUpdate& update, const LmConfig& config) {
  if (update.empty()) return unchanged(graph);
  apply_update(graph, update);
  return optimize(graph, config);
}

OptimizeReport incremental_update(FactorGraph& graph, const GraphUpdate& update, const LmConfig& config,
                                  const std::set<Key>& free_variables) {
  if (update.empty()) return unchanged(graph);
  apply_update(graph, update);
  return optimize_subset(graph, config, free_variables);
}

Eigen::VectorXd cost_gradient(const FactorGraph& graph) {
  Problem p = make_problem(graph, make_ordering(graph.values()), /*dense=*/false);
  return linearize(p, graph.values()).g;
}

std::map<std::int64_t, Mat3> landmark_marginals(const FactorGraph& graph) {
  std::map<std::int64_t, Mat3> out;
  if (graph.values().landmarks.empty()) return out;
  Problem p = make_problem(graph, make_ordering(graph.values()), /*dense=*/false);
  const Ordering& ordering = p.ordering;
  const NormalEquations ne = linearize(p, graph.values());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  ldlt.compute(ne.h_sparse);
  if (ldlt.info() != Eigen::Success) throw SolverError("landmark marginals: factorization failed");

  std::vector<std::int64_t> ids;
  for (const auto& [i, _] : graph.values().landmarks) ids.push_back(i);
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < ids.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, ids.size() - start);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(ordering.dim, static_cast<Eigen::Index>(3 * n));
    for (std::size_t k = 0; k < n; ++k) {
      const int off = ordering.offset.at(landmark_key(ids[start + k]));
      rhs.block<3, 3>(off, static_cast<Eigen::Index>(3 * k)) = Mat3::Identity();
    }
    const Eigen::MatrixXd x = ldlt.solve(rhs);
    for (std::size_t k = 0; k < n; ++k) {
      const int off = ordering.offset.at(landmark_key(ids[start + k]));
      Mat3 c = x.block<3, 3>(off, static_cast<Eigen::Index>(3 * k));
      out.emplace(ids[start + k], 0.5 * (c + c.transpose()));
    }
  }
  return out;
}

}  // namespace vinemap
