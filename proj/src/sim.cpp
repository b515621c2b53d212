/*
 * sim.cpp
 */
#include "habs/sim.hpp"

#include <algorithm>
#include <cmath>

#include "habs/detail/rk4.hpp"
#include "habs/error.hpp"

namespace habs {

namespace {

constexpr double kSnap = 1e-9;

Vec neighbor_block(const NetworkModel& model, const AgentModel& a, const Vec& y) {
  const int n = model.dim;
  Vec xj(static_cast<Eigen::Index>(a.neighbors.size()) * n);
  for (std::size_t k = 0; k < a.neighbors.size(); ++k)
    xj.segment(static_cast<Eigen::Index>(k) * n, n) =
        y.segment(static_cast<Eigen::Index>(a.neighbors[k].pos()) * n, n);
  return xj;
}

Vec stack(const std::vector<Vec>& xs) {
  const int n = static_cast<int>(xs.front().size());
  Vec y(static_cast<Eigen::Index>(xs.size()) * n);
  for (std::size_t i = 0; i < xs.size(); ++i) y.segment(static_cast<Eigen::Index>(i) * n, n) = xs[i];
  return y;
}

std::vector<Vec> unstack(const Vec& y, std::size_t agents, int n) {
  std::vector<Vec> out;
  for (std::size_t i = 0; i < agents; ++i) out.push_back(y.segment(static_cast<Eigen::Index>(i) * n, n));
  return out;
}

struct ClosedLoopRhs {
  const NetworkModel& model;
  const ControlSchedule& schedule;
  int step = 0;
  Vec y0;  // stacked state at step * dt

  TransitionControl control(std::size_t i) const {
    const auto& sc = schedule.controls[i][static_cast<std::size_t>(step)];
    TransitionControl c;
    c.agent = &model.agents[i];
    c.reference = sc.reference;
    c.x_i0 = y0.segment(static_cast<Eigen::Index>(i) * model.dim, model.dim);
    c.w = sc.w;
    c.lambda = sc.lambda;
    return c;
  }

  Vec input(std::size_t i, double t, const Vec& y) const {
    const auto& a = model.agents[i];
    const Vec xi = y.segment(static_cast<Eigen::Index>(i) * model.dim, model.dim);
    return eval_k(control(i), std::clamp(t, 0.0, schedule.dt), xi, neighbor_block(model, a, y));
  }

  Vec operator()(double t, const Vec& y) const {
    Vec dy(y.size());
    for (std::size_t i = 0; i < model.size(); ++i) {
      const auto& a = model.agents[i];
      const Vec xi = y.segment(static_cast<Eigen::Index>(i) * model.dim, model.dim);
      const Vec xj = neighbor_block(model, a, y);
      dy.segment(static_cast<Eigen::Index>(i) * model.dim, model.dim) =
          eval_f(a, xi, xj) + eval_k(control(i), std::clamp(t, 0.0, schedule.dt), xi, xj);
    }
    return dy;
  }
};

// Runs the schedule with `substeps` per interval; optionally records samples.
Vec run_closed_loop(const NetworkModel& model, const ControlSchedule& schedule, int substeps, Trajectory* traj,
                    SimulationDiagnostics* diag) {
  const int n = model.dim;
  const std::size_t N = model.size();
  std::vector<Vec> x0s;
  for (const auto& a : model.agents) x0s.push_back(a.x0);
  Vec y = stack(x0s);
  const double h = schedule.dt / substeps;

  auto record = [&](double t, const Vec& state, const ClosedLoopRhs* rhs, double local_t) {
    if (!traj) return;
    traj->times.push_back(t);
    traj->states.push_back(unstack(state, N, n));
    std::vector<Vec> v;
    for (std::size_t i = 0; i < N; ++i) {
      Vec u = rhs ? rhs->input(i, local_t, state) : Vec::Zero(n);
      if (diag) diag->max_input_ratio = std::max(diag->max_input_ratio, u.norm() / model.agents[i].v_max);
      v.push_back(std::move(u));
    }
    traj->inputs.push_back(std::move(v));
  };

  if (schedule.steps == 0) record(0.0, y, nullptr, 0.0);
  for (int k = 0; k < schedule.steps; ++k) {
    ClosedLoopRhs rhs{model, schedule, k, y};
    if (k == 0) record(0.0, y, &rhs, 0.0);
    for (int s = 0; s < substeps; ++s) {
      y = detail::rk4_step(rhs, s * h, y, h);
      const double local = (s + 1) * h;
      // the sample at the end of an interval is reported with the next interval's input
      if (s + 1 < substeps || k + 1 == schedule.steps) record(k * schedule.dt + local, y, &rhs, local);
    }
    if (diag) {
      std::vector<double> dev(N);
      for (std::size_t i = 0; i < N; ++i) {
        const auto& sc = schedule.controls[i][static_cast<std::size_t>(k)];
        dev[i] = (y.segment(static_cast<Eigen::Index>(i) * n, n) - sc.target_point).norm();
        diag->max_endpoint_deviation = std::max(diag->max_endpoint_deviation, dev[i]);
      }
      diag->endpoint_deviation.push_back(std::move(dev));
    }
    if (k + 1 < schedule.steps && traj) {
      ClosedLoopRhs next{model, schedule, k + 1, y};
      record((k + 1) * schedule.dt, y, &next, 0.0);
    }
  }
  return y;
}

}  // namespace

Trajectory simulate_closed_loop(const NetworkModel& model, const ControlSchedule& schedule,
                                const IntegratorSettings& settings, SimulationDiagnostics* diag) {
  if (schedule.controls.size() != model.size()) throw Error(ErrorKind::Invalid, "schedule does not match the model");
  for (const auto& c : schedule.controls)
    if (static_cast<int>(c.size()) != schedule.steps) throw Error(ErrorKind::Invalid, "schedule does not cover every step");

  Trajectory traj;
  traj.dim = model.dim;
  traj.samples_per_step = settings.substeps;
  SimulationDiagnostics local;
  SimulationDiagnostics* d = diag ? diag : &local;
  *d = SimulationDiagnostics{};
  const Vec coarse = run_closed_loop(model, schedule, settings.substeps, &traj, d);
  if (schedule.steps > 0) {
    const Vec fine = run_closed_loop(model, schedule, 2 * settings.substeps, nullptr, nullptr);
    d->audit_error = (coarse - fine).cwiseAbs().maxCoeff() * 16.0 / 15.0;
    if (d->audit_error > settings.integ_tol)
      throw Error(ErrorKind::Integration, "closed-loop audit estimate " + std::to_string(d->audit_error) +
                                              " exceeds integ_tol; raise --substeps");
  }
  return traj;
}

ValidationReport validate_plan(const Abstraction& abs, const Plan& plan, const Trajectory& traj) {
  const auto& model = abs.model();
  ValidationReport rep;
  rep.min_margin = std::numeric_limits<double>::infinity();
  if (traj.samples_per_step <= 0 && plan.steps > 0) throw Error(ErrorKind::Invalid, "trajectory has no step sampling");

  for (int k = 0; k <= plan.steps; ++k) {
    const auto& xs = traj.at_step(k);
    for (const auto& ap : plan.agents) {
      const auto& dec = abs.decomposition(ap.agent);
      const Vec& x = xs[ap.agent.pos()];
      MembershipEntry e;
      e.step = k;
      e.agent = ap.agent;
      e.planned = ap.cells[static_cast<std::size_t>(k)];
      if (dec.region().contains(x)) e.located = dec.locate(x);
      e.margin = cell_margin(dec, e.planned, x);
      if (e.located && *e.located == e.planned) {
        e.ok = true;
      } else if (e.margin >= -kSnap) {
        e.ok = true;
        e.snapped = true;
        ++rep.snapped;
      }
      if (!e.ok) {
        ++rep.mismatches;
        rep.failures.push_back("step " + std::to_string(k) + " agent " + std::to_string(ap.agent.value) +
                               ": state left the planned cell (margin " + std::to_string(e.margin) + ")");
      }
      // X0 sits on the lattice corner, so only controlled steps enter the minimum
      if (k > 0 || plan.steps == 0) rep.min_margin = std::min(rep.min_margin, e.margin);
      rep.entries.push_back(std::move(e));
    }
  }

  // per-step tubes and input bounds
  for (std::size_t s = 0; s < traj.size(); ++s) {
    for (const auto& a : model.agents) {
      const std::size_t i = a.id.pos();
      if (traj.inputs[s][i].norm() > a.v_max * (1.0 + 1e-12)) ++rep.input_violations;
      if (traj.samples_per_step > 0) {
        const int k = std::min<int>(static_cast<int>(s) / traj.samples_per_step, std::max(plan.steps - 1, 0));
        const std::size_t base = static_cast<std::size_t>(k * traj.samples_per_step);
        const double t = traj.times[s] - traj.times[base];
        if ((traj.states[s][i] - traj.states[base][i]).norm() > (a.M + a.v_max) * t + kSnap) ++rep.tube_violations;
      }
    }
  }
  if (rep.entries.empty()) rep.min_margin = 0.0;
  return rep;
}

Trajectory simulate_open_loop(const NetworkModel& model, const InputSignal& v, double duration, int steps) {
  if (steps < 1 || !(duration >= 0.0)) throw Error(ErrorKind::Invalid, "simulate_open_loop: bad duration or steps");
  const int n = model.dim;
  const std::size_t N = model.size();
  auto input = [&](double t, std::size_t i) {
    Vec u = v(t, i);
    if (u.size() != n) throw Error(ErrorKind::Invalid, "simulate_open_loop: input dimension mismatch");
    if (u.norm() > model.agents[i].v_max * (1.0 + 1e-12))
      throw Error(ErrorKind::Invalid, "simulate_open_loop: input of agent " + std::to_string(i + 1) + " exceeds v_max");
    return u;
  };
  auto rhs = [&](double t, const Vec& y) {
    Vec dy(y.size());
    for (std::size_t i = 0; i < N; ++i) {
      const auto& a = model.agents[i];
      dy.segment(static_cast<Eigen::Index>(i) * n, n) =
          eval_f(a, y.segment(static_cast<Eigen::Index>(i) * n, n), neighbor_block(model, a, y)) + input(t, i);
    }
    return dy;
  };
  std::vector<Vec> x0s;
  for (const auto& a : model.agents) x0s.push_back(a.x0);
  Vec y = stack(x0s);
  Trajectory traj;
  traj.dim = n;
  const double h = duration / steps;
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back(unstack(y, N, n));
    std::vector<Vec> us;
    for (std::size_t i = 0; i < N; ++i) us.push_back(input(t, i));
    traj.inputs.push_back(std::move(us));
  };
  record(0.0);
  for (int s = 0; s < steps; ++s) {
    y = detail::rk4_step(rhs, s * h, y, h);
    record((s + 1) * h);
  }
  return traj;
}

}  // namespace habs
