#pragma once

// Max-min discriminant-gain power allocation via successive convex
// approximation. Each outer iteration linearizes the quadratic-over-linear
// bound Q(b,T) = c s^2 / T at the current reference, solves the resulting
// convex program with the barrier solver, and interpolates
// b^{t+1} = b^t + alpha (b* - b^t). Also houses the two benchmark
// allocators (per-element average-gain SCA, channel-inversion MMSE).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "aircomp/discriminant.hpp"
#include "aircomp/errors.hpp"
#include "aircomp/model.hpp"
#include "aircomp/subproblem.hpp"

namespace aircomp {

struct ScaConfig {
  double step_size = 0.7;
  int max_iterations = 200;
  double objective_tolerance = 1e-6;
  double slack_floor = 1e-12;
  SubproblemSolverConfig solver;
};

// Feasible reference for one SCA iteration: precoder, per-(pair, element)
// slack table (rows follow enumerate_pairs), and the implied objective.
struct ReferencePoint {
  PrecodingMatrix b;
  MatrixXd slacks;
  double T = 0.0;
};

struct SubproblemSolution {
  PrecodingMatrix b;
  double T = 0.0;
  MatrixXd slacks;
  double kkt_residual = 0.0;
};

enum class TerminationReason { converged, max_iterations, solver_failure, degenerate };

inline const char* to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::converged: return "converged";
    case TerminationReason::max_iterations: return "max_iterations";
    case TerminationReason::solver_failure: return "solver_failure";
    case TerminationReason::degenerate: return "degenerate";
  }
  return "unknown";
}

struct IterationRecord {
  int iteration = 0;
  double t_sub = 0.0;
  double min_gain = 0.0;  // true min gain at the interpolated iterate
  double kkt = 0.0;
  bool accepted = false;  // became the best-so-far iterate
};

struct SolveTrace {
  std::vector<IterationRecord> iterations;
  PrecodingMatrix final_b;
  double final_min_gain = 0.0;
  double final_avg_gain = 0.0;
  TerminationReason reason = TerminationReason::converged;
};

namespace detail {

constexpr double kInteriorShrink = 1.0 - 1e-3;

// Elements contributing less than this fraction of their pair's dominant
// element are left out of the linearized subproblem. Their slack reference
// would otherwise drive coef_t ~ 1/gain^2 beyond what the Newton solve can
// certify, while their objective mass is below the solve tolerances.
constexpr double kComboRelCutoff = 1e-7;

// Slack entries whose shrunk value would sit on the floor carry no gain and
// are left out of the subproblem; a pair with no remaining element cannot
// support the epigraph constraint.
inline bool combo_active(double gain, double slack_floor) {
  return gain * kInteriorShrink > slack_floor;
}

}  // namespace detail

// Builds the reference point at `b`: slacks tightened to the true per-element
// gains (shrunk into the strict interior), T as the worst pair sum.
inline ReferencePoint tighten_reference(const SystemInstance& instance, const PrecodingMatrix& b,
                                        double slack_floor = 1e-12) {
  const GainTable table = gain_table(received_moments(instance, b));
  const auto pairs = enumerate_pairs(table.num_classes);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    bool any = false;
    for (int m = 0; m < table.num_features && !any; ++m) {
      any = detail::combo_active(table.element(static_cast<int>(p), m), slack_floor);
    }
    if (!any) {
      throw DegenerateInstanceError("class pair (" + std::to_string(pairs[p].first) + ", " +
                                    std::to_string(pairs[p].second) +
                                    ") has no discriminative feature element at this allocation");
    }
  }
  ReferencePoint ref;
  ref.b = b;
  ref.slacks = table.per_element.cwiseMax(slack_floor) * detail::kInteriorShrink;
  ref.T = ref.slacks.rowwise().sum().minCoeff();
  return ref;
}

// Strictly feasible starting point: every slot at the binding cap, backed off
// into the interior, with slacks tightened from the resulting true gains.
inline ReferencePoint initialize_feasible(const SystemInstance& instance,
                                          double slack_floor = 1e-12) {
  const int devices = instance.num_devices();
  const int features = instance.stats.num_features();
  PrecodingMatrix b = PrecodingMatrix::zero(devices, features);
  for (int k = 0; k < devices; ++k) {
    const double cap = std::min(std::sqrt(instance.budget.per_slot(k)),
                                std::sqrt(instance.budget.total(k) / features));
    b.b.row(k).setConstant(cap * detail::kInteriorShrink);
  }
  return tighten_reference(instance, b, slack_floor);
}

// First-order Taylor minorant of Q(b,T) = c (sum_k h_k b_{k,m})^2 / T at the
// reference: Q_hat(s,T) = coef_s * s - coef_t * T, exact at the reference.
struct AffineGainBound {
  double mean_gap_sq = 0.0;
  double s_ref = 0.0;
  double t_ref = 0.0;
  double coef_s = 0.0;
  double coef_t = 0.0;

  double operator()(double s, double t) const { return coef_s * s - coef_t * t; }
};

inline AffineGainBound linearize_q(const SystemInstance& instance, const VectorXd& b_column,
                                   double t_ref, int class_a, int class_b, int m,
                                   double slack_floor = 1e-12) {
  if (!(t_ref >= slack_floor)) {
    throw DomainError("linearization reference slack below floor");
  }
  AffineGainBound bound;
  const double gap =
      instance.stats.class_means(class_a, m) - instance.stats.class_means(class_b, m);
  bound.mean_gap_sq = gap * gap;
  bound.s_ref = instance.channel.gains.dot(b_column);
  bound.t_ref = t_ref;
  bound.coef_s = 2.0 * bound.mean_gap_sq * bound.s_ref / t_ref;
  bound.coef_t = bound.mean_gap_sq * bound.s_ref * bound.s_ref / (t_ref * t_ref);
  return bound;
}

// A constructed subproblem together with the (pair, element) combos its slack
// variables stand for.
struct SubproblemModel {
  ConvexSubproblem problem;
  struct Combo {
    int pair = 0;
    int element = 0;
    double gain = 0.0;  // tight per-element gain at the reference
  };
  std::vector<Combo> combos;
  std::vector<std::pair<int, int>> pairs;
};

namespace detail {

inline MatrixXd sensing_weight_matrix(const SystemInstance& instance) {
  return (instance.stats.sensing_noise_variances.array().colwise() *
          instance.channel.gains.array().square())
      .matrix();
}

}  // namespace detail

// Full max-min subproblem linearized at `b_ref`.
inline SubproblemModel make_maxmin_subproblem(const SystemInstance& instance,
                                              const PrecodingMatrix& b_ref,
                                              double slack_floor = 1e-12) {
  SubproblemModel model;
  const GainTable table = gain_table(received_moments(instance, b_ref));
  model.pairs = enumerate_pairs(table.num_classes);
  ConvexSubproblem& sp = model.problem;
  sp.num_devices = instance.num_devices();
  sp.num_columns = table.num_features;
  sp.has_t = true;
  sp.channel_gains = instance.channel.gains;
  sp.sigma2 = instance.stats.feature_variances;
  sp.sensing_weights = detail::sensing_weight_matrix(instance);
  sp.channel_noise = instance.channel.channel_noise_variance;
  sp.slot_cap = instance.budget.per_slot;
  sp.total_cap = instance.budget.total;
  sp.slack_floor = slack_floor;
  sp.pair_slacks.assign(model.pairs.size(), {});
  for (std::size_t p = 0; p < model.pairs.size(); ++p) {
    const double pair_max = table.per_element.row(static_cast<int>(p)).maxCoeff();
    for (int m = 0; m < table.num_features; ++m) {
      const double gain = table.element(static_cast<int>(p), m);
      if (!detail::combo_active(gain, slack_floor)) continue;
      if (gain < detail::kComboRelCutoff * pair_max) continue;
      const int slack = static_cast<int>(model.combos.size());
      model.combos.push_back({static_cast<int>(p), m, gain});
      const auto bound = linearize_q(instance, b_ref.b.col(m), gain, model.pairs[p].first,
                                     model.pairs[p].second, m, slack_floor);
      sp.gains.push_back({m, static_cast<int>(p), slack, bound.mean_gap_sq, bound.s_ref,
                          bound.t_ref, bound.coef_s, bound.coef_t});
      sp.pair_slacks[p].push_back(slack);
    }
    if (sp.pair_slacks[p].empty()) {
      throw DegenerateInstanceError("class pair (" + std::to_string(model.pairs[p].first) + ", " +
                                    std::to_string(model.pairs[p].second) +
                                    ") has no discriminative feature element at this allocation");
    }
  }
  sp.num_slacks = static_cast<int>(model.combos.size());
  sp.objective_coeffs = VectorXd::Zero(sp.num_vars());
  sp.objective_coeffs(sp.t_index()) = 1.0;
  return model;
}

// Per-element average-gain subproblem for column `element`: maximize the sum
// of all pair slacks of that element under the equal-split power caps.
inline SubproblemModel make_element_subproblem(const SystemInstance& instance,
                                               const PrecodingMatrix& b_ref, int element,
                                               double slack_floor = 1e-12) {
  SubproblemModel model;
  const GainTable table = gain_table(received_moments(instance, b_ref));
  model.pairs = enumerate_pairs(table.num_classes);
  ConvexSubproblem& sp = model.problem;
  const int devices = instance.num_devices();
  const int features = instance.stats.num_features();
  sp.num_devices = devices;
  sp.num_columns = 1;
  sp.has_t = false;
  sp.channel_gains = instance.channel.gains;
  sp.sigma2 = instance.stats.feature_variances.segment(element, 1);
  sp.sensing_weights = detail::sensing_weight_matrix(instance).col(element);
  sp.channel_noise = instance.channel.channel_noise_variance;
  sp.slot_cap =
      instance.budget.per_slot.cwiseMin(instance.budget.total / static_cast<double>(features));
  sp.slack_floor = slack_floor;
  const double column_max = table.per_element.col(element).maxCoeff();
  for (std::size_t p = 0; p < model.pairs.size(); ++p) {
    const double gain = table.element(static_cast<int>(p), element);
    if (!detail::combo_active(gain, slack_floor)) continue;
    if (gain < detail::kComboRelCutoff * column_max) continue;
    const int slack = static_cast<int>(model.combos.size());
    model.combos.push_back({static_cast<int>(p), element, gain});
    const auto bound = linearize_q(instance, b_ref.b.col(element), gain, model.pairs[p].first,
                                   model.pairs[p].second, element, slack_floor);
    sp.gains.push_back({0, static_cast<int>(p), slack, bound.mean_gap_sq, bound.s_ref, bound.t_ref,
                        bound.coef_s, bound.coef_t});
  }
  sp.num_slacks = static_cast<int>(model.combos.size());
  sp.objective_coeffs = VectorXd::Zero(sp.num_vars());
  for (int j = 0; j < sp.num_slacks; ++j) sp.objective_coeffs(sp.slack_index(j)) = 1.0;
  return model;
}

inline double kkt_residual(const SystemInstance&, const ConvexSubproblem& problem,
                           const VectorXd& candidate) {
  return problem.kkt_residual(candidate);
}

namespace detail {

inline VectorXd flatten_columns(const MatrixXd& b, int columns_from, int columns) {
  VectorXd x(b.rows() * columns);
  for (int m = 0; m < columns; ++m) x.segment(m * b.rows(), b.rows()) = b.col(columns_from + m);
  return x;
}

// Candidate at the reference itself, slacks tight: if this is already a KKT
// point of the linearized problem, the solve is a fixed point.
inline VectorXd fixed_point_candidate(const SubproblemModel& model, const MatrixXd& b_ref,
                                      int column_base) {
  const ConvexSubproblem& sp = model.problem;
  VectorXd x(sp.num_vars());
  x.head(sp.num_devices * sp.num_columns) =
      flatten_columns(b_ref, column_base, sp.num_columns);
  for (std::size_t j = 0; j < model.combos.size(); ++j) {
    x(sp.slack_index(static_cast<int>(j))) = model.combos[j].gain;
  }
  if (sp.has_t) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& slots : sp.pair_slacks) {
      double sum = 0.0;
      for (int j : slots) sum += x(sp.slack_index(j));
      worst = std::min(worst, sum);
    }
    x(sp.t_index()) = worst;
  }
  return x;
}

inline VectorXd interior_start(const SubproblemModel& model, const MatrixXd& b_ref,
                               int column_base) {
  VectorXd x = fixed_point_candidate(model, b_ref, column_base);
  const ConvexSubproblem& sp = model.problem;
  for (int j = 0; j < sp.num_slacks; ++j) x(sp.slack_index(j)) *= kInteriorShrink;
  if (sp.has_t) x(sp.t_index()) *= kInteriorShrink * kInteriorShrink;
  return x;
}

}  // namespace detail

inline SubproblemSolution solve_subproblem(const SystemInstance& instance,
                                           const ReferencePoint& reference,
                                           const SubproblemSolverConfig& config,
                                           double slack_floor = 1e-12) {
  const SubproblemModel model = make_maxmin_subproblem(instance, reference.b, slack_floor);
  const ConvexSubproblem& sp = model.problem;
  const int pairs = static_cast<int>(model.pairs.size());
  const int features = sp.num_columns;
  SubproblemSolution solution;
  solution.slacks = MatrixXd::Constant(pairs, features, slack_floor);

  const VectorXd candidate = detail::fixed_point_candidate(model, reference.b.b, 0);
  const double candidate_kkt = sp.kkt_residual(candidate);
  const auto fill = [&](const VectorXd& x, double kkt) {
    solution.b = PrecodingMatrix{reference.b.b};
    for (int m = 0; m < features; ++m) {
      solution.b.b.col(m) = x.segment(m * sp.num_devices, sp.num_devices);
    }
    for (std::size_t j = 0; j < model.combos.size(); ++j) {
      solution.slacks(model.combos[j].pair, model.combos[j].element) =
          x(sp.slack_index(static_cast<int>(j)));
    }
    solution.T = x(sp.t_index());
    solution.kkt_residual = kkt;
  };
  if (candidate_kkt <= config.kkt_tolerance) {
    fill(candidate, candidate_kkt);
    solution.T = solution.slacks.rowwise().sum().minCoeff();
    return solution;
  }

  const BarrierResult result = sp.solve(detail::interior_start(model, reference.b.b, 0), config);
  if (result.kkt_residual > config.kkt_tolerance) {
    throw SolverFailure("subproblem KKT residual above tolerance", result.x);
  }
  // the reference candidate is feasible for the subproblem, so the certified
  // optimum can never fall below its objective
  if (result.objective < sp.objective(candidate) - kFeasTol) {
    throw SolverFailure("subproblem objective regressed below the reference", result.x);
  }
  fill(result.x, result.kkt_residual);
  return solution;
}

inline SolveTrace sca_maxmin(const SystemInstance& instance, const ScaConfig& config = {}) {
  SolveTrace trace;
  ReferencePoint ref = initialize_feasible(instance, config.slack_floor);
  PrecodingMatrix best_b = ref.b;
  double best_gain = min_gain_of(instance, ref.b);
  double prev_t = std::numeric_limits<double>::quiet_NaN();
  trace.reason = TerminationReason::max_iterations;
  for (int it = 1; it <= config.max_iterations; ++it) {
    try {
      const SubproblemSolution sol = solve_subproblem(instance, ref, config.solver,
                                                      config.slack_floor);
      PrecodingMatrix next{ref.b.b + config.step_size * (sol.b.b - ref.b.b)};
      if (!feasible(next, instance.budget, kFeasTol)) {
        throw SolverFailure("interpolated iterate violates the power budget", VectorXd{});
      }
      const double gain = min_gain_of(instance, next);
      const bool accepted = gain > best_gain;
      if (accepted) {
        best_gain = gain;
        best_b = next;
      }
      trace.iterations.push_back({it, sol.T, gain, sol.kkt_residual, accepted});
      if (!std::isnan(prev_t) && std::abs(sol.T - prev_t) < config.objective_tolerance) {
        trace.reason = TerminationReason::converged;
        break;
      }
      prev_t = sol.T;
      ref = tighten_reference(instance, next, config.slack_floor);
    } catch (const SolverFailure&) {
      trace.reason = TerminationReason::solver_failure;
      break;
    } catch (const DegenerateInstanceError&) {
      if (trace.iterations.empty()) throw;
      trace.reason = TerminationReason::degenerate;
      break;
    }
  }
  trace.final_b = best_b;
  trace.final_min_gain = best_gain;
  trace.final_avg_gain = avg_gain_of(instance, best_b);
  return trace;
}

// Benchmark: maximize each element's summed pairwise gain independently under
// the equal energy split min(P_k, Phat_k/M), assembling the columns into one
// allocation. Shares the SCA iteration budget across elements.
inline SolveTrace optimize_average_baseline(const SystemInstance& instance,
                                            const ScaConfig& config = {}) {
  const int devices = instance.num_devices();
  const int features = instance.stats.num_features();
  SolveTrace trace;
  PrecodingMatrix b = PrecodingMatrix::zero(devices, features);
  for (int k = 0; k < devices; ++k) {
    const double cap = std::min(std::sqrt(instance.budget.per_slot(k)),
                                std::sqrt(instance.budget.total(k) / features));
    b.b.row(k).setConstant(cap * detail::kInteriorShrink);
  }
  const auto element_objective = [&](int m) {
    const GainTable table = gain_table(received_moments(instance, b));
    return table.per_element.col(m).sum();
  };
  int iterations_left = config.max_iterations;
  trace.reason = TerminationReason::converged;
  int global_iter = 0;
  for (int m = 0; m < features && iterations_left > 0; ++m) {
    VectorXd best_col = b.b.col(m);
    double best_obj = element_objective(m);
    double prev_obj = std::numeric_limits<double>::quiet_NaN();
    while (iterations_left > 0) {
      --iterations_left;
      ++global_iter;
      SubproblemModel model;
      try {
        model = make_element_subproblem(instance, b, m, config.slack_floor);
      } catch (const DegenerateInstanceError&) {
        break;
      }
      if (model.combos.empty()) break;  // element carries no usable gain
      const ConvexSubproblem& sp = model.problem;
      const VectorXd candidate = detail::fixed_point_candidate(model, b.b, m);
      double t_sub;
      double kkt = sp.kkt_residual(candidate);
      VectorXd solution_b;
      if (kkt <= config.solver.kkt_tolerance) {
        t_sub = sp.objective(candidate);
        solution_b = candidate.head(devices);
      } else {
        BarrierResult result;
        try {
          result = sp.solve(detail::interior_start(model, b.b, m), config.solver);
        } catch (const SolverFailure&) {
          trace.reason = TerminationReason::solver_failure;
          break;
        }
        if (result.kkt_residual > config.solver.kkt_tolerance) {
          trace.reason = TerminationReason::solver_failure;
          break;
        }
        t_sub = result.objective;
        kkt = result.kkt_residual;
        solution_b = result.x.head(devices);
      }
      b.b.col(m) += config.step_size * (solution_b - b.b.col(m));
      const double obj = element_objective(m);
      const bool accepted = obj > best_obj;
      if (accepted) {
        best_obj = obj;
        best_col = b.b.col(m);
      }
      trace.iterations.push_back({global_iter, t_sub, min_gain_of(instance, b), kkt, accepted});
      if (!std::isnan(prev_obj) && std::abs(t_sub - prev_obj) < config.objective_tolerance) break;
      prev_obj = t_sub;
    }
    b.b.col(m) = best_col;
    if (trace.reason == TerminationReason::solver_failure) break;
  }
  if (iterations_left == 0 && trace.reason == TerminationReason::converged) {
    trace.reason = TerminationReason::max_iterations;
  }
  trace.final_b = b;
  trace.final_min_gain = min_gain_of(instance, b);
  trace.final_avg_gain = avg_gain_of(instance, b);
  return trace;
}

// Channel-inversion AirComp benchmark: uniform aggregation weights, power set
// by the weakest device under either cap.
inline PrecodingMatrix mmse_allocation(const SystemInstance& instance) {
  const int devices = instance.num_devices();
  const int features = instance.stats.num_features();
  const auto& h = instance.channel.gains;
  double eta = std::numeric_limits<double>::infinity();
  for (int k = 0; k < devices; ++k) {
    const double h2 = h(k) * h(k);
    eta = std::min({eta, instance.budget.per_slot(k) * h2,
                    instance.budget.total(k) * h2 / static_cast<double>(features)});
  }
  PrecodingMatrix b = PrecodingMatrix::zero(devices, features);
  for (int k = 0; k < devices; ++k) b.b.row(k).setConstant(std::sqrt(eta) / h(k));
  return b;
}

}  // namespace aircomp
