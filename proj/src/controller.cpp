/*
 * controller.cpp
 */
#include "habs/controller.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "habs/detail/rk4.hpp"
#include "habs/error.hpp"

namespace habs {

namespace {

double max_abs(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

Vec saturate(const Vec& v, double r) {
  const double n = v.norm();
  if (n <= r) return v;
  return (r / n) * v;
}

Vec eval_g(const AgentModel& agent, const Vec& xi, const Vec& xj) { return saturate(eval_f(agent, xi, xj), agent.M); }

Vec ReferenceTrajectory::at(double t) const {
  const int steps = static_cast<int>(values.size()) - 1;
  if (t < -1e-12 * std::max(1.0, dt) || t > dt * (1.0 + 1e-12))
    throw Error(ErrorKind::Invalid, "reference trajectory queried outside [0, dt]");
  const double h = dt / steps;
  t = std::clamp(t, 0.0, dt);
  int k = static_cast<int>(std::floor(t / h));
  k = std::clamp(k, 0, steps - 1);
  const double s = (t - k * h) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * values[k] + (h10 * h) * slopes[k] + h01 * values[k + 1] + (h11 * h) * slopes[k + 1];
}

ReferenceTrajectory integrate_reference(const AgentModel& agent, const CellConfiguration& config,
                                        const Vec& own_reference, const Vec& neighbor_references, double dt,
                                        const IntegratorSettings& settings) {
  if (settings.substeps < 1) throw Error(ErrorKind::Invalid, "substeps must be positive");
  if (!(dt > 0.0)) throw Error(ErrorKind::Invalid, "dt must be positive");

  ReferenceTrajectory ref;
  ref.agent = agent.id;
  ref.config = config;
  ref.dt = dt;
  ref.own_reference = own_reference;
  ref.neighbor_references = neighbor_references;

  auto rhs = [&](double, const Vec& y) { return eval_g(agent, y, neighbor_references); };

  const int n = settings.substeps;
  const double h = dt / n;
  ref.values.reserve(n + 1);
  ref.slopes.reserve(n + 1);
  Vec y = own_reference;
  ref.values.push_back(y);
  ref.slopes.push_back(rhs(0.0, y));
  for (int k = 0; k < n; ++k) {
    y = detail::rk4_step(rhs, k * h, y, h);
    ref.values.push_back(y);
    ref.slopes.push_back(rhs((k + 1) * h, y));
  }

  // step-halving audit
  const Vec fine = detail::rk4_integrate(rhs, 0.0, own_reference, dt, 2 * n);
  ref.error_estimate = max_abs(ref.endpoint() - fine) * 16.0 / 15.0;
  if (ref.error_estimate > settings.integ_tol)
    throw Error(ErrorKind::Integration, "reference trajectory of agent " + std::to_string(agent.id.value) +
                                            ": error estimate " + std::to_string(ref.error_estimate) +
                                            " exceeds integ_tol; raise --substeps");
  return ref;
}

ReferenceTrajectory integrate_reference(const AgentModel& agent, const CellConfiguration& config,
                                        std::span<const CellDecomposition> decs, double dt,
                                        const IntegratorSettings& settings) {
  if (config.entries.size() != agent.neighbors.size() + 1)
    throw Error(ErrorKind::Invalid, "configuration size does not match the neighbor count");
  const int n = agent.dim;
  const Vec own = decs[agent.id.pos()].reference_point(config.entries[0]);
  Vec nb(static_cast<Eigen::Index>(n * agent.neighbors.size()));
  for (std::size_t k = 0; k < agent.neighbors.size(); ++k)
    nb.segment(static_cast<Eigen::Index>(k) * n, n) =
        decs[agent.neighbors[k].pos()].reference_point(config.entries[k + 1]);
  return integrate_reference(agent, config, own, nb, dt, settings);
}

double reach_radius_r(double lambda, double dt, double v_max) { return lambda * dt * v_max; }

Vec select_w(const ReferenceTrajectory& ref, const Vec& x, double lambda, double v_max) {
  const Vec diff = x - ref.endpoint();
  const double r = reach_radius_r(lambda, ref.dt, v_max);
  const double dist = diff.norm();
  if (lambda <= 0.0) {
    if (dist != 0.0) throw Error(ErrorKind::Invalid, "select_w: lambda = 0 and target differs from chi(dt)");
    return Vec::Zero(x.size());
  }
  if (dist > r * (1.0 + 1e-12)) throw Error(ErrorKind::Invalid, "select_w: target outside B(chi(dt); r_i)");
  Vec w = diff / (lambda * ref.dt);
  // boundary targets may overshoot v_max by rounding
  if (w.norm() > v_max) w *= v_max / w.norm();
  return w;
}

Vec closed_form_endpoint(const TransitionControl& ctrl, double t) {
  const double dt = ctrl.dt();
  if (t < 0.0 || t > dt) throw Error(ErrorKind::Invalid, "closed_form_endpoint: t outside [0, dt]");
  const auto& ref = *ctrl.reference;
  if (t == dt) return ref.endpoint() + (ctrl.lambda * dt) * ctrl.w;
  return ((dt - t) / dt) * (ctrl.x_i0 - ref.own_reference) + (ctrl.lambda * t) * ctrl.w + ref.at(t);
}

KComponents eval_k_components(const TransitionControl& ctrl, double t, const Vec& xi, const Vec& dj) {
  const auto& ref = *ctrl.reference;
  KComponents k;
  k.k1 = eval_g(*ctrl.agent, ref.at(t), ref.neighbor_references) - eval_g(*ctrl.agent, xi, dj);
  k.k2 = ctrl.lambda * ctrl.w;
  k.k3 = (ref.own_reference - ctrl.x_i0) / ctrl.dt();
  return k;
}

Vec eval_kbar(const TransitionControl& ctrl, double t, const Vec& xi, const Vec& dj) {
  return eval_k_components(ctrl, t, xi, dj).sum();
}

Vec eval_k(const TransitionControl& ctrl, double t, const Vec& xi, const Vec& dj) {
  return saturate(eval_kbar(ctrl, t, xi, dj), ctrl.agent->v_max);
}

Vec DisturbancePath::at(double t) const {
  if (times.size() == 1 || t <= times.front()) return points.front();
  if (t >= times.back()) return points.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
  const double s = (t - times[k]) / (times[k + 1] - times[k]);
  return (1.0 - s) * points[k] + s * points[k + 1];
}

Vec DisturbanceTube::at(double t, int dim) const {
  Vec out(static_cast<Eigen::Index>(paths.size()) * dim);
  for (std::size_t k = 0; k < paths.size(); ++k) out.segment(static_cast<Eigen::Index>(k) * dim, dim) = paths[k].at(t);
  return out;
}

DisturbancePath sample_disturbance(const CellDecomposition& dec, const CellIndex& cell, double c_rate, double dt,
                                   std::uint64_t seed, int knots) {
  if (knots < 2) throw Error(ErrorKind::Invalid, "sample_disturbance needs at least two knots");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Box box = dec.box(cell);
  const Ball& region = dec.region();
  const int n = dec.dim();

  // Fallback point of the clipped cell: the box point closest to the region center.
  const Vec fallback = region.center.cwiseMax(box.lo).cwiseMin(box.hi);

  auto cell_point = [&]() -> Vec {
    Vec p(n);
    for (int attempt = 0; attempt < 64; ++attempt) {
      for (int a = 0; a < n; ++a) p[a] = box.lo[a] + unif(rng) * (box.hi[a] - box.lo[a]);
      if (region.contains(p)) return p;
    }
    return fallback;
  };

  DisturbancePath path;
  path.c_rate = c_rate;
  for (int k = 0; k < knots; ++k) {
    const double t = dt * k / (knots - 1);
    const Vec q = cell_point();
    const Vec o = sample_ball(rng, Vec::Zero(n), c_rate * t);
    path.times.push_back(t);
    path.cell_points.push_back(q);
    path.offsets.push_back(o);
    path.points.push_back(q + o);
  }
  return path;
}

AuxiliaryResult integrate_auxiliary(const TransitionControl& ctrl, const DisturbanceTube& tube,
                                    const IntegratorSettings& settings,
                                    const std::optional<EnvelopeParams>& envelope) {
  const AgentModel& agent = *ctrl.agent;
  const auto& ref = *ctrl.reference;
  const int n = agent.dim;
  AuxiliaryResult res;

  auto rhs = [&](double t, const Vec& z) {
    t = std::clamp(t, 0.0, ref.dt);
    const Vec d = tube.at(t, n);
    const KComponents kc = eval_k_components(ctrl, t, z, d);
    const Vec kbar = kc.sum();
    const double ratio = kbar.norm() / agent.v_max;
    res.max_kbar_ratio = std::max(res.max_kbar_ratio, ratio);
    if (ratio > 1.0) ++res.saturations;
    res.max_k2 = std::max(res.max_k2, kc.k2.norm());
    res.max_k3 = std::max(res.max_k3, kc.k3.norm());
    if (envelope) {
      const double env = agent.L1 * (envelope->mu_norm * envelope->d_max / 2.0 + envelope->M_norm * t) +
                         agent.L2 * (z - ref.at(t)).norm();
      res.max_k1_excess = std::max(res.max_k1_excess, kc.k1.norm() - env);
    }
    return Vec(eval_g(agent, z, d) + saturate(kbar, agent.v_max));
  };

  res.endpoint = detail::rk4_integrate(rhs, 0.0, ctrl.x_i0, ref.dt, settings.substeps);
  res.closed_form = closed_form_endpoint(ctrl, ref.dt);
  res.deviation = max_abs(res.endpoint - res.closed_form);
  if (res.deviation > settings.integ_tol)
    throw Error(ErrorKind::Integration, "auxiliary endpoint misses the closed form by " +
                                            std::to_string(res.deviation));
  return res;
}

}  // namespace habs
