/*
 * reach.cpp
 */
#include "habs/reach.hpp"

#include "habs/error.hpp"

namespace habs {

Ball minkowski_ball_sum(const Ball& a, double r) {
  if (r < 0.0) throw Error(ErrorKind::Invalid, "minkowski_ball_sum: negative radius");
  return Ball{a.center, a.radius + r};
}

ReachFamily::ReachFamily(AgentId agent, Ball base, double c_rate, double tau, double horizon)
  : agent_(agent), base_(std::move(base)), c_rate_(c_rate), tau_(tau), horizon_(horizon) {
  if (c_rate_ < 0.0) throw Error(ErrorKind::Invalid, "reach family: negative growth rate");
  if (base_.radius < 0.0) throw Error(ErrorKind::Invalid, "reach family: negative base radius");
  if (!(tau_ > 0.0) || !(tau_ < horizon_)) throw Error(ErrorKind::Invalid, "reach family: need 0 < tau < T");
  full_radius_ = base_.radius + c_rate_ * tau_;
}

ReachFamily ReachFamily::of(const NetworkModel& model, AgentId id) {
  const auto& a = model.agent(id);
  return ReachFamily(id, Ball{a.x0, a.reach_radius}, a.M + a.v_max, model.tau, model.horizon);
}

double ReachFamily::c(double sigma) const {
  if (sigma < 0.0) throw Error(ErrorKind::Invalid, "c_i: negative duration");
  return c_rate_ * sigma;
}

Ball ReachFamily::reach_at(double t) const {
  const double start = horizon_ - tau_;
  if (t < start || t > horizon_)
    throw Error(ErrorKind::Invalid, "reach_at: t outside [T - tau, T]");
  if (t == start) return base_;
  return Ball{base_.center, full_radius_ - c(horizon_ - t)};
}

Ball ReachFamily::inner_region(double dt) const {
  if (!(dt > 0.0) || !(dt < tau_)) throw Error(ErrorKind::Invalid, "inner_region: dt outside (0, tau)");
  return Ball{base_.center, full_radius_ - c(dt)};
}

}  // namespace habs
