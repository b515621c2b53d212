/*
 * reach.hpp
 *
 *  Ball overapproximations of reachable sets. R_i([0,t]) for t in [T - tau, T]
 *  is the base ball grown by c_i(t - T + tau), c_i(s) = (M(i) + v_max(i)) s.
 */
#pragma once

#include "habs/model.hpp"

namespace habs {

struct Ball {
  Vec center;
  double radius = 0.0;

  bool contains(const Vec& x, double slack = 0.0) const { return (x - center).norm() <= radius + slack; }
};

/// Minkowski sum B(c; R) + B(r) = B(c; R + r).
Ball minkowski_ball_sum(const Ball& a, double r);

class ReachFamily {
public:
  ReachFamily(AgentId agent, Ball base, double c_rate, double tau, double horizon);

  /// Family for one agent of a model: base B(x0; reach_radius), rate M + v_max.
  static ReachFamily of(const NetworkModel& model, AgentId id);

  AgentId agent() const { return agent_; }
  const Ball& base() const { return base_; }
  double c_rate() const { return c_rate_; }
  double tau() const { return tau_; }
  double horizon() const { return horizon_; }

  /// c_i(sigma); throws for negative sigma.
  double c(double sigma) const;

  /// R_i([0,t]) for t in [T - tau, T]. The radius is computed as
  /// radius(T) - c(T - t), so radius(t) + c(T - t) reproduces radius(T) to 1 ulp.
  Ball reach_at(double t) const;

  /// R_i([0, T - dt]) for 0 < dt < tau.
  Ball inner_region(double dt) const;

  /// R_i([0,T]).
  Ball full() const { return reach_at(horizon_); }

private:
  AgentId agent_;
  Ball base_;
  double c_rate_;
  double tau_;
  double horizon_;
  double full_radius_;
};

}  // namespace habs
