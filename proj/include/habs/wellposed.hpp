/*
 * wellposed.hpp
 *
 *  Admissible time steps and cell diameters that keep the transition
 *  controllers below saturation, and the synthesizer that picks them.
 */
#pragma once

#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "habs/model.hpp"

namespace habs {

/// Per-agent design parameters chosen by the user.
struct DesignParams {
  std::vector<double> lambda;           ///< lambda(i) in [0, 1), indexed by agent position
  std::vector<std::vector<double>> mu;  ///< mu[i][k] = mu(j_k(i), i), aligned with neighbors
  std::optional<int> steps;             ///< fixed l; when empty the synthesizer searches upward
  int steps_hint = 1;
  int steps_cap = 100000;
  double margin = 0.999;

  /// lambda = 0, mu = 1 everywhere, no steps.
  static DesignParams defaults(const NetworkModel& model);
};

/// Reads per-agent "lambda" and "mu" keys plus the optional top-level
/// "discretization": {"steps", "margin"} block of a model document.
DesignParams parse_design(std::string_view document, const NetworkModel& model);

struct DiscretizationParams {
  double dt = 0.0;  ///< T / steps
  int steps = 0;
  std::vector<double> lambda;
  std::vector<std::vector<double>> mu;
  std::vector<double> d_max;
  double margin = 0.999;
};

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// (sum_j mu(j,i)^2)^(1/2)
double mu_norm(const NetworkModel& model, const std::vector<std::vector<double>>& mu, AgentId i);
/// (sum_j (M(j) + v_max(j))^2)^(1/2)
double M_norm(const NetworkModel& model, AgentId i);

/// (1 - lambda) v_max / (L1 Mnorm + L2 lambda v_max), or kUnbounded when the
/// denominator vanishes.
double dt_bound(const NetworkModel& model, double lambda, AgentId i);

struct DmaxBranches {
  double first;   ///< 2(1-l)v dt / (1 + (L1 mu + L2) dt)
  double second;  ///< (2(1-l)v dt - 2(L1 Mnorm + L2 l v) dt^2) / (1 + L1 mu dt)
  double second_numerator;
};

DmaxBranches dmax_branches(const NetworkModel& model, double lambda, double mu_n, AgentId i, double dt);

/// min of both branches; throws Error(Invalid) unless 0 < dt < dt_bound.
double dmax_bound(const NetworkModel& model, double lambda, double mu_n, AgentId i, double dt);

struct CycleViolation {
  std::vector<AgentId> cycle;  ///< i0 i1 ... i_{m-1}, closing back to i0
  double product = 0.0;
};

struct CycleReport {
  std::size_t cycles_checked = 0;
  std::vector<CycleViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Products of mu along every simple cycle must be >= 1.
CycleReport check_cycles(const NetworkModel& model, const std::vector<std::vector<double>>& mu);

/// Chooses l (fixed or searched upward), dt = T / l and d_max(i) at margin
/// times its bound, then enforces d_max(j) <= mu(j,i) d_max(i) by
/// propagation. Throws Error(Infeasible) naming the offending agent.
DiscretizationParams synthesize(const NetworkModel& model, const DesignParams& design);

/// Re-checks a parameter set strictly: dt < tau, dt < dt_bound(i),
/// 0 < d_max(i) < dmax_bound(i, dt), the mu edge constraints, cycles and
/// T = steps * dt. Throws Error(Infeasible) on the first violation.
void validate_discretization(const NetworkModel& model, const DiscretizationParams& params);

}  // namespace habs
