#pragma once

// Convex inner subproblem and its solver. The subproblem maximizes a linear
// objective (the epigraph variable T, or a sum of per-pair slacks) subject to
//   - per-slot power caps        b_{k,m}^2 <= P_k
//   - total energy caps          sum_m b_{k,m}^2 <= Phat_k
//   - pair epigraph constraints  T <= sum_m T_{m,p}
//   - slack floors               T_{m,p} >= slack floor
//   - linearized gain bounds     sigma_hat_m^2(b) <= coef_s * s_m - coef_t * T_{m,p}
// where s_m = sum_k h_k b_{k,m}. All constraints are smooth and convex, so a
// primal log-barrier method with damped Newton steps solves it without any
// external dependency. Multipliers fall out of the barrier (lambda_i =
// 1/(t * -f_i)) and back an explicit KKT residual check.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aircomp/errors.hpp"

namespace aircomp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct SubproblemSolverConfig {
  double barrier_tolerance = 1e-8;  // stop once the duality gap m/t falls below this
  double kkt_tolerance = 1e-6;
  int max_newton_steps = 200;  // per centering stage
  double barrier_reduction = 10.0;
};

// Thrown when Newton centering stalls; carries the best feasible iterate.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, VectorXd best)
      : std::runtime_error(what), best_point(std::move(best)) {}

  VectorXd best_point;
};

struct BarrierResult {
  VectorXd x;
  VectorXd multipliers;  // one per constraint, barrier estimates
  double objective = 0.0;
  double kkt_residual = 0.0;
  double duality_gap = 0.0;
  int newton_steps = 0;
};

class ConvexSubproblem {
 public:
  // One linearized gain-bound constraint, tied to (column m, class pair p).
  struct GainConstraint {
    int m = 0;
    int pair = 0;
    int slack = 0;      // index into the slack block
    double gap_sq = 0;  // squared class-mean gap
    double s_ref = 0;   // aggregate gain at the linearization reference
    double slack_ref = 0;
    double coef_s = 0;  // 2 * gap_sq * s_ref / slack_ref
    double coef_t = 0;  // gap_sq * s_ref^2 / slack_ref^2
  };

  // Problem data (filled by the optimizer layer, then finalize()d).
  int num_devices = 0;
  int num_columns = 0;  // precoding columns in play (M, or 1 per-element)
  int num_slacks = 0;
  bool has_t = false;
  VectorXd channel_gains;          // K
  VectorXd sigma2;                 // per column
  MatrixXd sensing_weights;        // K x cols: h_k^2 * delta_{k,m}^2
  double channel_noise = 0.0;
  VectorXd slot_cap;               // K
  VectorXd total_cap;              // K, or empty when the cap is folded away
  double slack_floor = 1e-12;
  std::vector<GainConstraint> gains;
  std::vector<std::vector<int>> pair_slacks;  // per pair, slack indices (has_t only)
  VectorXd objective_coeffs;                  // maximize objective_coeffs . x

  int b_index(int k, int m) const { return m * num_devices + k; }
  int slack_index(int j) const { return num_devices * num_columns + j; }
  int t_index() const { return num_devices * num_columns + num_slacks; }
  int num_vars() const { return num_devices * num_columns + num_slacks + (has_t ? 1 : 0); }

  int num_constraints() const {
    return num_devices * num_columns + (total_cap.size() > 0 ? num_devices : 0) +
           (has_t ? static_cast<int>(pair_slacks.size()) : 0) + num_slacks +
           static_cast<int>(gains.size());
  }

  double objective(const VectorXd& x) const { return objective_coeffs.dot(x); }

  // Aggregate gain s_m = sum_k h_k b_{k,m} for column m.
  double aggregate(const VectorXd& x, int m) const {
    return channel_gains.dot(x.segment(m * num_devices, num_devices));
  }

  // Evaluates every constraint as f_i(x) <= 0 into `f` (size num_constraints).
  void eval_constraints(const VectorXd& x, VectorXd& f) const {
    f.resize(num_constraints());
    int i = 0;
    for (int m = 0; m < num_columns; ++m) {
      for (int k = 0; k < num_devices; ++k) {
        const double b = x(b_index(k, m));
        f(i++) = b * b - slot_cap(k);
      }
    }
    if (total_cap.size() > 0) {
      for (int k = 0; k < num_devices; ++k) {
        double acc = 0.0;
        for (int m = 0; m < num_columns; ++m) acc += x(b_index(k, m)) * x(b_index(k, m));
        f(i++) = acc - total_cap(k);
      }
    }
    if (has_t) {
      for (const auto& slots : pair_slacks) {
        double acc = x(t_index());
        for (int j : slots) acc -= x(slack_index(j));
        f(i++) = acc;
      }
    }
    for (int j = 0; j < num_slacks; ++j) f(i++) = slack_floor - x(slack_index(j));
    for (const auto& g : gains) {
      const double s = aggregate(x, g.m);
      double quad = sigma2(g.m) * s * s + channel_noise;
      for (int k = 0; k < num_devices; ++k) {
        const double b = x(b_index(k, g.m));
        quad += sensing_weights(k, g.m) * b * b;
      }
      f(i++) = quad - g.coef_s * s + g.coef_t * x(slack_index(g.slack));
    }
  }

  bool strictly_feasible(const VectorXd& x) const {
    VectorXd f;
    eval_constraints(x, f);
    return (f.array() < 0.0).all();
  }

  // Natural magnitude of each constraint, for scale-free residuals.
  void constraint_scales(VectorXd& scales) const {
    scales.resize(num_constraints());
    int i = 0;
    for (int m = 0; m < num_columns; ++m) {
      for (int k = 0; k < num_devices; ++k) scales(i++) = 1.0 + slot_cap(k);
    }
    if (total_cap.size() > 0) {
      for (int k = 0; k < num_devices; ++k) scales(i++) = 1.0 + total_cap(k);
    }
    if (has_t) {
      for (std::size_t p = 0; p < pair_slacks.size(); ++p) scales(i++) = 1.0;
    }
    for (int j = 0; j < num_slacks; ++j) scales(i++) = 1.0;
    for (const auto& g : gains) {
      scales(i++) = 1.0 + channel_noise + std::abs(g.coef_s * g.s_ref) +
                    std::abs(g.coef_t * g.slack_ref);
    }
  }

  // Gradient of constraint i at x (dense; used by the KKT diagnostics).
  VectorXd constraint_gradient(int index, const VectorXd& x) const {
    VectorXd grad = VectorXd::Zero(num_vars());
    int i = index;
    const int n_slot = num_devices * num_columns;
    if (i < n_slot) {
      const int m = i / num_devices;
      const int k = i % num_devices;
      grad(b_index(k, m)) = 2.0 * x(b_index(k, m));
      return grad;
    }
    i -= n_slot;
    if (total_cap.size() > 0) {
      if (i < num_devices) {
        for (int m = 0; m < num_columns; ++m) grad(b_index(i, m)) = 2.0 * x(b_index(i, m));
        return grad;
      }
      i -= num_devices;
    }
    if (has_t) {
      if (i < static_cast<int>(pair_slacks.size())) {
        grad(t_index()) = 1.0;
        for (int j : pair_slacks[static_cast<std::size_t>(i)]) grad(slack_index(j)) = -1.0;
        return grad;
      }
      i -= static_cast<int>(pair_slacks.size());
    }
    if (i < num_slacks) {
      grad(slack_index(i)) = -1.0;
      return grad;
    }
    i -= num_slacks;
    const auto& g = gains[static_cast<std::size_t>(i)];
    const double s = aggregate(x, g.m);
    for (int k = 0; k < num_devices; ++k) {
      grad(b_index(k, g.m)) = (2.0 * sigma2(g.m) * s - g.coef_s) * channel_gains(k) +
                              2.0 * sensing_weights(k, g.m) * x(b_index(k, g.m));
    }
    grad(slack_index(g.slack)) = g.coef_t;
    return grad;
  }

  BarrierResult solve(const VectorXd& start, const SubproblemSolverConfig& config,
                      double t_initial = 1.0) const {
    const int m_con = num_constraints();
    VectorXd x = start;
    VectorXd f(m_con);
    eval_constraints(x, f);
    if (!(f.array() < 0.0).all()) {
      throw DomainError("barrier start point is not strictly feasible");
    }
    BarrierResult result;
    double t = std::max(t_initial, 1e-6);
    // Multipliers from every late barrier stage are certificate candidates:
    // beyond t_cert their complementarity (= 1/t at the stage center) is
    // already tiny, while the stationarity floor of 1/(t(-f_i)) grows with t,
    // so the best-certifying stage is not always the last one.
    const double t_cert = 100.0 / config.kkt_tolerance;
    std::vector<VectorXd> stage_multipliers;
    for (int stage = 0; stage < 80; ++stage) {
      center(x, t, config, result.newton_steps);
      if (t >= t_cert) {
        eval_constraints(x, f);
        stage_multipliers.push_back((t * (-f).array()).inverse().matrix());
      }
      if (static_cast<double>(m_con) / t <= config.barrier_tolerance) break;
      t *= config.barrier_reduction;
    }
    eval_constraints(x, f);
    result.x = x;
    result.multipliers = (t * (-f).array()).inverse().matrix();
    result.objective = objective(x);
    result.duality_gap = static_cast<double>(m_con) / t;
    result.kkt_residual = kkt_residual(x, result.multipliers);
    const auto consider = [&](const VectorXd& lambda) {
      if (lambda.size() == 0 || result.kkt_residual <= 0.5 * config.kkt_tolerance) return;
      const double res = kkt_residual(x, lambda);
      if (res < result.kkt_residual) {
        result.multipliers = lambda;
        result.kkt_residual = res;
      }
    };
    for (const VectorXd& lambda : stage_multipliers) consider(lambda);
    if (result.kkt_residual > 0.5 * config.kkt_tolerance) {
      consider(estimate_multipliers(x, config.kkt_tolerance));
    }
    if (result.kkt_residual > 0.5 * config.kkt_tolerance) {
      consider(estimate_multipliers(x, config.kkt_tolerance, result.multipliers));
    }
    return result;
  }

  // KKT residual with supplied multipliers: max of scaled feasibility,
  // stationarity, and complementary-slackness violations. Stationarity is
  // measured per variable against the magnitude of the Lagrangian terms in
  // that coordinate, so that a near-degenerate constraint with a large
  // multiplier is judged by its relative cancellation quality.
  double kkt_residual(const VectorXd& x, const VectorXd& lambda) const {
    VectorXd f, scales;
    eval_constraints(x, f);
    constraint_scales(scales);
    double feas = 0.0, comp = 0.0;
    for (int i = 0; i < f.size(); ++i) {
      feas = std::max(feas, f(i) / scales(i));
      comp = std::max(comp, std::abs(lambda(i) * f(i)) / scales(i));
    }
    feas = std::max(feas, 0.0);
    VectorXd r = -objective_coeffs;  // gradient of the minimized objective
    VectorXd term_size =
        VectorXd::Constant(num_vars(), 1.0 + objective_coeffs.lpNorm<Eigen::Infinity>());
    for (int i = 0; i < f.size(); ++i) {
      if (lambda(i) == 0.0) continue;
      const VectorXd grad = constraint_gradient(i, x);
      r += lambda(i) * grad;
      term_size += lambda(i) * grad.cwiseAbs();
    }
    const double stat = (r.cwiseAbs().cwiseQuotient(term_size)).maxCoeff();
    return std::max({feas, stat, comp});
  }

  // Multipliers for a bare candidate point: bounded least squares on the
  // stationarity condition with every constraint as a candidate column, each
  // multiplier capped so its complementarity product stays within
  // `comp_target`. The caps do the active-set selection: slack constraints
  // get tiny caps and cannot soak up weight, tight ones are effectively
  // unbounded. The residual is judged per variable against the Lagrangian
  // term sizes, so the least squares is reweighted from the previous round's
  // estimate and the best-scoring round wins.
  VectorXd estimate_multipliers(const VectorXd& x, double comp_target = 1e-6,
                                const VectorXd& warm = VectorXd()) const {
    VectorXd f, scales;
    eval_constraints(x, f);
    constraint_scales(scales);
    const int count = static_cast<int>(f.size());
    VectorXd lambda = VectorXd::Zero(count);
    if (count == 0) return lambda;
    std::vector<VectorXd> grads;
    grads.reserve(static_cast<std::size_t>(count));
    VectorXd cap(count);
    for (int a = 0; a < count; ++a) {
      grads.push_back(constraint_gradient(a, x));
      const double dist = std::max(-f(a), 0.0);
      cap(a) = dist > 0.0 ? 0.4 * comp_target * scales(a) / dist
                          : std::numeric_limits<double>::infinity();
    }
    double best_res = std::numeric_limits<double>::infinity();
    VectorXd prev = warm.size() == count ? warm.cwiseMin(cap).cwiseMax(0.0) : VectorXd();
    VectorXd weights = VectorXd::Constant(num_vars(), 1.0 + objective_coeffs.lpNorm<Eigen::Infinity>());
    if (prev.size() == count) {
      for (int a = 0; a < count; ++a) {
        weights += prev(a) * grads[static_cast<std::size_t>(a)].cwiseAbs();
      }
    }
    for (int round = 0; round < 3; ++round) {
      // normalize columns so wildly scaled constraints do not break the
      // least-squares conditioning or the stopping test
      MatrixXd jac(num_vars(), count);
      VectorXd norms(count), bound(count);
      for (int a = 0; a < count; ++a) {
        const VectorXd col = grads[static_cast<std::size_t>(a)].cwiseQuotient(weights);
        const double norm = std::max(col.norm(), 1e-300);
        norms(a) = norm;
        jac.col(a) = col / norm;
        bound(a) = cap(a) * norm;
      }
      const VectorXd start = prev.size() == count ? VectorXd(prev.cwiseProduct(norms)) : VectorXd();
      const VectorXd fit = bvls(jac, objective_coeffs.cwiseQuotient(weights), bound, start);
      const VectorXd trial = fit.cwiseQuotient(norms);
      const double res = kkt_residual(x, trial);
      if (res < best_res) {
        best_res = res;
        lambda = trial;
      }
      prev = trial;
      weights = VectorXd::Constant(num_vars(), 1.0 + objective_coeffs.lpNorm<Eigen::Infinity>());
      for (int a = 0; a < count; ++a) {
        weights += trial(a) * grads[static_cast<std::size_t>(a)].cwiseAbs();
      }
    }
    return lambda;
  }

  double kkt_residual(const VectorXd& x) const { return kkt_residual(x, estimate_multipliers(x)); }

  // Stark-Parker bounded-variable least squares: min ||A z - y||, 0 <= z <= ub.
  // Entries of ub may be infinite. A warm start seeds the free set, which
  // matters when many near-parallel columns admit several plausible supports.
  static VectorXd bvls(const MatrixXd& a, const VectorXd& y, const VectorXd& ub,
                       const VectorXd& warm = VectorXd()) {
    const int cols = static_cast<int>(a.cols());
    VectorXd z = VectorXd::Zero(cols);
    // -1: at lower bound, +1: at upper bound, 0: free
    std::vector<signed char> state(static_cast<std::size_t>(cols), -1);
    bool need_fit = false;
    if (warm.size() == cols) {
      for (int j = 0; j < cols; ++j) {
        z(j) = std::min(std::max(warm(j), 0.0), ub(j));
        if (z(j) > 0.0 && z(j) < ub(j)) {
          state[static_cast<std::size_t>(j)] = 0;
          need_fit = true;
        } else if (z(j) > 0.0) {
          state[static_cast<std::size_t>(j)] = +1;
        }
      }
    }
    const double tol = 1e-10 * (1.0 + y.lpNorm<Eigen::Infinity>());
    for (int outer = 0; outer < 3 * cols + 10; ++outer) {
      if (!need_fit) {
        const VectorXd w = a.transpose() * (y - a * z);
        int enter = -1;
        double best_w = tol;
        for (int j = 0; j < cols; ++j) {
          const auto side = state[static_cast<std::size_t>(j)];
          if (side == -1 && ub(j) > 0.0 && w(j) > best_w) {
            best_w = w(j);
            enter = j;
          } else if (side == +1 && -w(j) > best_w) {
            best_w = -w(j);
            enter = j;
          }
        }
        if (enter < 0) break;
        state[static_cast<std::size_t>(enter)] = 0;
      }
      need_fit = false;
      // restore the bounds on the free set; each sweep pins at least one
      // index, so this terminates
      for (int inner = 0; inner <= cols; ++inner) {
        std::vector<int> idx;
        VectorXd rhs = y;
        for (int j = 0; j < cols; ++j) {
          if (state[static_cast<std::size_t>(j)] == 0) {
            idx.push_back(j);
          } else if (state[static_cast<std::size_t>(j)] == +1) {
            rhs -= ub(j) * a.col(j);
          }
        }
        if (idx.empty()) break;
        MatrixXd sub(a.rows(), static_cast<int>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) sub.col(static_cast<int>(j)) = a.col(idx[j]);
        const VectorXd sol = sub.colPivHouseholderQr().solve(rhs);
        bool inside = true;
        for (std::size_t j = 0; j < idx.size(); ++j) {
          const double sj = sol(static_cast<int>(j));
          if (sj <= 0.0 || sj >= ub(idx[j])) {
            inside = false;
            break;
          }
        }
        if (inside) {
          for (std::size_t j = 0; j < idx.size(); ++j) z(idx[j]) = sol(static_cast<int>(j));
          break;
        }
        // step toward the unconstrained fit until a free index hits a bound
        double alpha = 1.0;
        int pin = -1;
        signed char pin_side = 0;
        for (std::size_t j = 0; j < idx.size(); ++j) {
          const double zj = z(idx[j]);
          const double sj = sol(static_cast<int>(j));
          if (sj <= 0.0 && zj - sj > 0.0 && zj / (zj - sj) < alpha) {
            alpha = zj / (zj - sj);
            pin = idx[j];
            pin_side = -1;
          } else if (sj >= ub(idx[j]) && sj - zj > 0.0 && (ub(idx[j]) - zj) / (sj - zj) < alpha) {
            alpha = (ub(idx[j]) - zj) / (sj - zj);
            pin = idx[j];
            pin_side = +1;
          }
        }
        if (pin < 0) {
          // no blocking index: clamp and accept
          for (std::size_t j = 0; j < idx.size(); ++j) {
            z(idx[j]) = std::min(std::max(sol(static_cast<int>(j)), 0.0), ub(idx[j]));
          }
          break;
        }
        for (std::size_t j = 0; j < idx.size(); ++j) {
          const double stepped = z(idx[j]) + alpha * (sol(static_cast<int>(j)) - z(idx[j]));
          z(idx[j]) = std::min(std::max(stepped, 0.0), ub(idx[j]));
        }
        z(pin) = pin_side == +1 ? ub(pin) : 0.0;
        for (int j : idx) {
          if (z(j) == 0.0) {
            state[static_cast<std::size_t>(j)] = -1;
          } else if (z(j) == ub(j)) {
            state[static_cast<std::size_t>(j)] = +1;
          }
        }
      }
    }
    return z;
  }

 private:
  static constexpr double kNewtonDecrementTol = 1e-16;

  double barrier_value(const VectorXd& x, const VectorXd& f, double t) const {
    double phi = -t * objective(x);
    for (int i = 0; i < f.size(); ++i) phi -= std::log(-f(i));
    return phi;
  }

  // Newton gradient/Hessian of t*f0(x) - sum log(-f_i(x)).
  void assemble(const VectorXd& x, const VectorXd& f, double t, VectorXd& g, MatrixXd& h) const {
    const int n = num_vars();
    g = -t * objective_coeffs;
    h.setZero(n, n);
    int i = 0;
    for (int m = 0; m < num_columns; ++m) {
      for (int k = 0; k < num_devices; ++k) {
        const double inv = 1.0 / (-f(i++));
        const int idx = b_index(k, m);
        const double db = 2.0 * x(idx);
        g(idx) += inv * db;
        h(idx, idx) += inv * inv * db * db + inv * 2.0;
      }
    }
    if (total_cap.size() > 0) {
      for (int k = 0; k < num_devices; ++k) {
        const double inv = 1.0 / (-f(i++));
        for (int m1 = 0; m1 < num_columns; ++m1) {
          const int i1 = b_index(k, m1);
          const double d1 = 2.0 * x(i1);
          g(i1) += inv * d1;
          h(i1, i1) += inv * 2.0;
          for (int m2 = 0; m2 < num_columns; ++m2) {
            h(i1, b_index(k, m2)) += inv * inv * d1 * 2.0 * x(b_index(k, m2));
          }
        }
      }
    }
    if (has_t) {
      for (const auto& slots : pair_slacks) {
        const double inv = 1.0 / (-f(i++));
        const double inv2 = inv * inv;
        const int it = t_index();
        g(it) += inv;
        h(it, it) += inv2;
        for (int j1 : slots) {
          const int s1 = slack_index(j1);
          g(s1) -= inv;
          h(s1, it) -= inv2;
          h(it, s1) -= inv2;
          for (int j2 : slots) h(s1, slack_index(j2)) += inv2;
        }
      }
    }
    for (int j = 0; j < num_slacks; ++j) {
      const double inv = 1.0 / (-f(i++));
      const int idx = slack_index(j);
      g(idx) -= inv;
      h(idx, idx) += inv * inv;
    }
    VectorXd rank1(num_columns);  // per-column weight on the h h^T curvature
    rank1.setZero();
    VectorXd grad_buf(num_devices + 1);
    for (const auto& gc : gains) {
      const double inv = 1.0 / (-f(i++));
      const double s = aggregate(x, gc.m);
      const double lin = 2.0 * sigma2(gc.m) * s - gc.coef_s;
      for (int k = 0; k < num_devices; ++k) {
        grad_buf(k) = lin * channel_gains(k) + 2.0 * sensing_weights(k, gc.m) * x(b_index(k, gc.m));
      }
      grad_buf(num_devices) = gc.coef_t;
      const int base = gc.m * num_devices;
      const int sidx = slack_index(gc.slack);
      for (int k = 0; k < num_devices; ++k) g(base + k) += inv * grad_buf(k);
      g(sidx) += inv * grad_buf(num_devices);
      const double inv2 = inv * inv;
      for (int k1 = 0; k1 <= num_devices; ++k1) {
        const int i1 = (k1 == num_devices) ? sidx : base + k1;
        for (int k2 = 0; k2 <= num_devices; ++k2) {
          const int i2 = (k2 == num_devices) ? sidx : base + k2;
          h(i1, i2) += inv2 * grad_buf(k1) * grad_buf(k2);
        }
      }
      rank1(gc.m) += inv * 2.0 * sigma2(gc.m);
      for (int k = 0; k < num_devices; ++k) {
        h(base + k, base + k) += inv * 2.0 * sensing_weights(k, gc.m);
      }
    }
    for (int m = 0; m < num_columns; ++m) {
      if (rank1(m) == 0.0) continue;
      const int base = m * num_devices;
      for (int k1 = 0; k1 < num_devices; ++k1) {
        for (int k2 = 0; k2 < num_devices; ++k2) {
          h(base + k1, base + k2) += rank1(m) * channel_gains(k1) * channel_gains(k2);
        }
      }
    }
  }

  void center(VectorXd& x, double t, const SubproblemSolverConfig& config, int& steps) const {
    const int n = num_vars();
    VectorXd f(num_constraints()), fn(num_constraints());
    VectorXd g(n);
    MatrixXd h(n, n);
    for (int it = 0; it < config.max_newton_steps; ++it) {
      eval_constraints(x, f);
      assemble(x, f, t, g, h);
      Eigen::LLT<MatrixXd> llt(h);
      double ridge = 1e-13 * (1.0 + h.diagonal().maxCoeff());
      int tries = 0;
      while (llt.info() != Eigen::Success && tries++ < 12) {
        h.diagonal().array() += ridge;
        ridge *= 100.0;
        llt.compute(h);
      }
      if (llt.info() != Eigen::Success) {
        throw SolverFailure("Newton system not positive definite", x);
      }
      const VectorXd dx = llt.solve(-g);
      const double decrement_sq = -g.dot(dx);
      ++steps;
      if (!(decrement_sq > 2.0 * kNewtonDecrementTol)) return;
      const double phi0 = barrier_value(x, f, t);
      const double slope = g.dot(dx);
      // Armijo band at the floating-point resolution of phi, so the search
      // stays meaningful once t*f0 dwarfs the achievable decrease
      const double band = 4.0 * std::numeric_limits<double>::epsilon() * std::abs(phi0);
      double step = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 64; ++ls) {
        const VectorXd xn = x + step * dx;
        eval_constraints(xn, fn);
        if ((fn.array() < 0.0).all() &&
            barrier_value(xn, fn, t) <= phi0 + 0.25 * step * slope + band) {
          x = xn;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) return;  // progress below floating-point resolution
      if (step * dx.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
        return;
      }
    }
    throw SolverFailure("Newton centering exceeded max_newton_steps", x);
  }
};

}  // namespace aircomp
