/*
 * wellposed.cpp
 */
#include "habs/wellposed.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "habs/error.hpp"
#include "json.hpp"

namespace habs {

using nlohmann::json;

namespace {

[[noreturn]] void infeasible(const std::string& msg) { throw Error(ErrorKind::Infeasible, msg); }

std::string agent_name(AgentId i) { return "agent " + std::to_string(i.value); }

}  // namespace

DesignParams DesignParams::defaults(const NetworkModel& model) {
  DesignParams d;
  d.lambda.assign(model.size(), 0.0);
  for (const auto& a : model.agents) d.mu.emplace_back(a.neighbors.size(), 1.0);
  return d;
}

DesignParams parse_design(std::string_view document, const NetworkModel& model) {
  DesignParams d = DesignParams::defaults(model);
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("design syntax error: ") + e.what());
  }
  for (const auto& ja : doc.at("agents")) {
    const AgentId id{ja.at("id").get<int>()};
    const auto& a = model.agent(id);
    if (ja.contains("lambda")) {
      if (!ja.at("lambda").is_number()) throw Error(ErrorKind::Invalid, agent_name(id) + ": lambda must be a number");
      d.lambda[id.pos()] = ja.at("lambda").get<double>();
    }
    if (ja.contains("mu")) {
      const auto& jm = ja.at("mu");
      auto& mu = d.mu[id.pos()];
      if (jm.is_array()) {
        if (jm.size() != a.neighbors.size())
          throw Error(ErrorKind::Invalid, agent_name(id) + ": mu array needs one entry per neighbor");
        for (std::size_t k = 0; k < jm.size(); ++k) mu[k] = jm[k].get<double>();
      } else if (jm.is_object()) {
        for (const auto& [key, val] : jm.items()) {
          const int nb = std::stoi(key);
          const auto it = std::find(a.neighbors.begin(), a.neighbors.end(), AgentId{nb});
          if (it == a.neighbors.end())
            throw Error(ErrorKind::Invalid, agent_name(id) + ": mu given for non-neighbor " + key);
          mu[static_cast<std::size_t>(it - a.neighbors.begin())] = val.get<double>();
        }
      } else {
        throw Error(ErrorKind::Invalid, agent_name(id) + ": mu must be an array or object");
      }
    }
  }
  if (doc.contains("discretization")) {
    const auto& jd = doc.at("discretization");
    if (jd.contains("steps")) d.steps = jd.at("steps").get<int>();
    if (jd.contains("margin")) d.margin = jd.at("margin").get<double>();
  }
  return d;
}

double mu_norm(const NetworkModel& model, const std::vector<std::vector<double>>& mu, AgentId i) {
  double s = 0.0;
  for (std::size_t k = 0; k < model.agent(i).neighbors.size(); ++k) s += mu[i.pos()][k] * mu[i.pos()][k];
  return std::sqrt(s);
}

double M_norm(const NetworkModel& model, AgentId i) {
  double s = 0.0;
  for (AgentId j : model.agent(i).neighbors) {
    const auto& a = model.agent(j);
    s += (a.M + a.v_max) * (a.M + a.v_max);
  }
  return std::sqrt(s);
}

double dt_bound(const NetworkModel& model, double lambda, AgentId i) {
  const auto& a = model.agent(i);
  const double den = a.L1 * M_norm(model, i) + a.L2 * lambda * a.v_max;
  if (den <= 0.0) return kUnbounded;
  return (1.0 - lambda) * a.v_max / den;
}

DmaxBranches dmax_branches(const NetworkModel& model, double lambda, double mu_n, AgentId i, double dt) {
  const auto& a = model.agent(i);
  const double reach = 2.0 * (1.0 - lambda) * a.v_max * dt;
  const double coupling = a.L1 * M_norm(model, i) + a.L2 * lambda * a.v_max;
  DmaxBranches b{};
  b.first = reach / (1.0 + (a.L1 * mu_n + a.L2) * dt);
  b.second_numerator = reach - 2.0 * coupling * dt * dt;
  b.second = b.second_numerator / (1.0 + a.L1 * mu_n * dt);
  return b;
}

double dmax_bound(const NetworkModel& model, double lambda, double mu_n, AgentId i, double dt) {
  const double sup = dt_bound(model, lambda, i);
  if (!(dt > 0.0) || !(dt < sup))
    throw Error(ErrorKind::Invalid, "dmax_bound: dt outside the admissible interval for " + agent_name(i));
  const auto b = dmax_branches(model, lambda, mu_n, i, dt);
  return std::min(b.first, b.second);
}

CycleReport check_cycles(const NetworkModel& model, const std::vector<std::vector<double>>& mu) {
  // edge j -> i carries mu(j,i); enumerate simple cycles rooted at their smallest vertex
  const std::size_t n = model.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> out(n);
  for (const auto& a : model.agents)
    for (std::size_t k = 0; k < a.neighbors.size(); ++k)
      out[a.neighbors[k].pos()].push_back({a.id.pos(), mu[a.id.pos()][k]});

  CycleReport report;
  std::vector<std::size_t> stack;
  std::vector<bool> on_stack(n, false);
  std::function<void(std::size_t, std::size_t, double)> dfs = [&](std::size_t root, std::size_t v, double prod) {
    for (const auto& [w, m] : out[v]) {
      if (w == root) {
        ++report.cycles_checked;
        const double p = prod * m;
        if (p < 1.0) {
          CycleViolation cv;
          for (auto s : stack) cv.cycle.push_back(AgentId::from_pos(s));
          cv.product = p;
          report.violations.push_back(std::move(cv));
        }
      } else if (w > root && !on_stack[w]) {
        on_stack[w] = true;
        stack.push_back(w);
        dfs(root, w, prod * m);
        stack.pop_back();
        on_stack[w] = false;
      }
    }
  };
  for (std::size_t r = 0; r < n; ++r) {
    on_stack[r] = true;
    stack = {r};
    dfs(r, r, 1.0);
    on_stack[r] = false;
  }
  return report;
}

namespace {

void check_design(const NetworkModel& model, const std::vector<double>& lambda,
                  const std::vector<std::vector<double>>& mu) {
  if (lambda.size() != model.size() || mu.size() != model.size())
    throw Error(ErrorKind::Invalid, "design parameters do not match the model size");
  for (const auto& a : model.agents) {
    const double l = lambda[a.id.pos()];
    if (!(l >= 0.0 && l < 1.0)) infeasible(agent_name(a.id) + ": lambda must lie in [0, 1)");
    if (mu[a.id.pos()].size() != a.neighbors.size())
      throw Error(ErrorKind::Invalid, agent_name(a.id) + ": mu size mismatch");
    for (double m : mu[a.id.pos()])
      if (!(m >= 0.0)) infeasible(agent_name(a.id) + ": mu must be non-negative");
  }
  const auto cycles = check_cycles(model, mu);
  if (!cycles.ok()) {
    std::string path;
    for (AgentId i : cycles.violations.front().cycle) path += std::to_string(i.value) + " ";
    infeasible("mu product below 1 on cycle " + path);
  }
}

// One pass of d(j) = min(d(j), mu(j,i) d(i)) over all edges; returns whether anything changed.
bool propagate_once(const NetworkModel& model, const std::vector<std::vector<double>>& mu, std::vector<double>& d) {
  bool changed = false;
  for (const auto& a : model.agents)
    for (std::size_t k = 0; k < a.neighbors.size(); ++k) {
      const std::size_t j = a.neighbors[k].pos();
      const double cap = mu[a.id.pos()][k] * d[a.id.pos()];
      if (cap < d[j]) {
        d[j] = cap;
        changed = true;
      }
    }
  return changed;
}

}  // namespace

DiscretizationParams synthesize(const NetworkModel& model, const DesignParams& design) {
  check_design(model, design.lambda, design.mu);
  if (!(design.margin > 0.0 && design.margin < 1.0)) infeasible("margin must lie in (0, 1)");

  std::vector<double> bounds(model.size());
  double tightest = kUnbounded;
  for (const auto& a : model.agents) {
    bounds[a.id.pos()] = dt_bound(model, design.lambda[a.id.pos()], a.id);
    tightest = std::min(tightest, bounds[a.id.pos()]);
  }

  int steps = 0;
  if (design.steps) {
    steps = *design.steps;
    if (steps < 1) infeasible("steps must be positive");
    const double dt = model.horizon / steps;
    if (!(dt < model.tau)) infeasible("dt = T/steps is not below tau");
    for (const auto& a : model.agents)
      if (!(dt < bounds[a.id.pos()]))
        infeasible(agent_name(a.id) + ": dt = " + std::to_string(dt) + " is not below its bound " +
                   std::to_string(bounds[a.id.pos()]));
  } else {
    const double cap = std::isinf(tightest) ? 0.5 * model.tau : tightest;
    for (int l = std::max(1, design.steps_hint); l <= design.steps_cap; ++l) {
      const double dt = model.horizon / l;
      if (dt < model.tau && dt < tightest && dt <= cap) {
        steps = l;
        break;
      }
    }
    if (steps == 0) infeasible("no admissible number of steps up to " + std::to_string(design.steps_cap));
  }

  DiscretizationParams p;
  p.steps = steps;
  p.dt = model.horizon / steps;
  p.lambda = design.lambda;
  p.mu = design.mu;
  p.margin = design.margin;
  p.d_max.resize(model.size());
  for (const auto& a : model.agents) {
    const double b = dmax_bound(model, p.lambda[a.id.pos()], mu_norm(model, p.mu, a.id), a.id, p.dt);
    if (!(b > 0.0)) infeasible(agent_name(a.id) + ": empty d_max interval");
    p.d_max[a.id.pos()] = design.margin * b;
  }
  const std::size_t passes = std::max<std::size_t>(1, model.size() * model.size());
  bool changed = true;
  for (std::size_t it = 0; it < passes && changed; ++it) changed = propagate_once(model, p.mu, p.d_max);
  if (changed && propagate_once(model, p.mu, p.d_max)) infeasible("mu constraints did not reach a fixed point");
  for (const auto& a : model.agents)
    if (!(p.d_max[a.id.pos()] > 0.0)) infeasible(agent_name(a.id) + ": mu constraints force d_max to zero");
  return p;
}

void validate_discretization(const NetworkModel& model, const DiscretizationParams& p) {
  check_design(model, p.lambda, p.mu);
  if (p.d_max.size() != model.size()) throw Error(ErrorKind::Invalid, "d_max size mismatch");
  if (!(p.dt > 0.0) || !(p.dt < model.tau)) infeasible("dt must satisfy 0 < dt < tau");
  for (const auto& a : model.agents) {
    const auto i = a.id.pos();
    const double b = dt_bound(model, p.lambda[i], a.id);
    if (!(p.dt < b))
      infeasible(agent_name(a.id) + ": dt = " + std::to_string(p.dt) + " is not below its bound " + std::to_string(b));
    const double db = dmax_bound(model, p.lambda[i], mu_norm(model, p.mu, a.id), a.id, p.dt);
    if (!(p.d_max[i] > 0.0) || !(p.d_max[i] < db))
      infeasible(agent_name(a.id) + ": d_max = " + std::to_string(p.d_max[i]) + " is not inside (0, " +
                 std::to_string(db) + ")");
    for (std::size_t k = 0; k < a.neighbors.size(); ++k) {
      const std::size_t j = a.neighbors[k].pos();
      if (p.d_max[j] > p.mu[i][k] * p.d_max[i])
        infeasible("edge " + std::to_string(j + 1) + "->" + std::to_string(a.id.value) +
                   ": d_max(j) exceeds mu(j,i) d_max(i)");
    }
  }
  const double steps = model.horizon / p.dt;
  if (p.steps < 1 || std::abs(steps - p.steps) > 1e-9 * std::max(1.0, steps))
    infeasible("T is not an integer multiple of dt");
}

}  // namespace habs
