/*
 * model.cpp
 */
#include "habs/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "habs/error.hpp"
#include "json.hpp"

namespace habs {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::Invalid, msg); }

double get_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) invalid(where + ": missing key '" + key + "'");
  if (!j.at(key).is_number()) invalid(where + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

Vec get_vector(const json& j, int dim, const std::string& where) {
  if (!j.is_array()) invalid(where + ": expected an array");
  if (static_cast<int>(j.size()) != dim)
    invalid(where + ": expected " + std::to_string(dim) + " entries, got " + std::to_string(j.size()));
  Vec v(dim);
  for (int k = 0; k < dim; ++k) {
    if (!j[k].is_number()) invalid(where + ": entries must be numbers");
    v[k] = j[k].get<double>();
  }
  return v;
}

Eigen::MatrixXd get_matrix(const json& j, int dim, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) invalid(where + ": expected " + std::to_string(dim) + " rows");
  Eigen::MatrixXd m(dim, dim);
  for (int r = 0; r < dim; ++r) m.row(r) = get_vector(j[r], dim, where).transpose();
  return m;
}

DynamicsSpec parse_dynamics(const json& j, int dim, std::size_t num_neighbors, const std::string& where) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    invalid(where + ": dynamics must be an object with a string 'type'");
  const std::string type = j.at("type").get<std::string>();
  if (type == "zero") return ZeroDynamics{};
  if (type == "linear-consensus") {
    ConsensusDynamics c;
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      if (!w.is_array() || w.size() != num_neighbors)
        invalid(where + ": linear-consensus needs one weight per neighbor");
      for (const auto& x : w) {
        if (!x.is_number()) invalid(where + ": weights must be numbers");
        c.weights.push_back(x.get<double>());
      }
    } else {
      c.weights.assign(num_neighbors, 1.0);
    }
    return c;
  }
  if (type == "gradient-hill") {
    HillDynamics h;
    h.C = get_number(j, "C", where);
    h.R = get_number(j, "R", where);
    if (!(h.R > 0.0)) invalid(where + ": gradient-hill radius R must be positive");
    h.center = j.contains("center") ? get_vector(j.at("center"), dim, where + ".center") : Vec::Zero(dim);
    return h;
  }
  if (type == "affine") {
    AffineDynamics a;
    a.A = j.contains("A") ? get_matrix(j.at("A"), dim, where + ".A") : Eigen::MatrixXd::Zero(dim, dim);
    if (j.contains("B")) {
      const auto& b = j.at("B");
      if (!b.is_array() || b.size() != num_neighbors) invalid(where + ": affine 'B' needs one matrix per neighbor");
      for (const auto& m : b) a.B.push_back(get_matrix(m, dim, where + ".B"));
    } else {
      a.B.assign(num_neighbors, Eigen::MatrixXd::Zero(dim, dim));
    }
    a.b = j.contains("b") ? get_vector(j.at("b"), dim, where + ".b") : Vec::Zero(dim);
    return a;
  }
  if (type == "expression") {
    ExprContext ctx;
    ctx.dim = dim;
    ctx.num_neighbors = static_cast<int>(num_neighbors);
    if (j.contains("params")) {
      if (!j.at("params").is_object()) invalid(where + ": 'params' must be an object");
      for (const auto& [k, v] : j.at("params").items()) {
        if (!v.is_number()) invalid(where + ": parameter '" + k + "' must be a number");
        ctx.params[k] = v.get<double>();
      }
    }
    if (!j.contains("coords") || !j.at("coords").is_array() || static_cast<int>(j.at("coords").size()) != dim)
      invalid(where + ": expression dynamics need one string per state coordinate in 'coords'");
    ExpressionDynamics e;
    for (const auto& c : j.at("coords")) {
      if (!c.is_string()) invalid(where + ": coords entries must be strings");
      e.sources.push_back(c.get<std::string>());
      e.coords.push_back(parse_expression(e.sources.back(), ctx));
    }
    return e;
  }
  invalid(where + ": unknown dynamics variant '" + type + "'");
}

}  // namespace

const char* dynamics_name(const DynamicsSpec& d) {
  static const char* names[] = {"zero", "linear-consensus", "gradient-hill", "affine", "expression"};
  return names[d.index()];
}

double NetworkModel::region_radius(AgentId id) const {
  const auto& a = agent(id);
  return a.reach_radius + (a.M + a.v_max) * tau;
}

std::vector<AgentId> NetworkModel::children(AgentId id) const {
  std::vector<AgentId> out;
  for (const auto& a : agents)
    if (std::find(a.neighbors.begin(), a.neighbors.end(), id) != a.neighbors.end()) out.push_back(a.id);
  return out;
}

std::optional<std::vector<AgentId>> NetworkModel::topological_order() const {
  // Kahn's algorithm, smallest id first for reproducibility
  std::vector<std::size_t> indeg(size(), 0);
  for (const auto& a : agents) indeg[a.id.pos()] = a.neighbors.size();
  std::set<int> ready;
  for (std::size_t p = 0; p < size(); ++p)
    if (indeg[p] == 0) ready.insert(static_cast<int>(p) + 1);
  std::vector<AgentId> order;
  while (!ready.empty()) {
    const AgentId id{*ready.begin()};
    ready.erase(ready.begin());
    order.push_back(id);
    for (AgentId c : children(id))
      if (--indeg[c.pos()] == 0) ready.insert(c.value);
  }
  if (order.size() != size()) return std::nullopt;
  return order;
}

NetworkModel parse_model(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, "model syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) invalid("model document must be a JSON object");

  NetworkModel m;
  m.horizon = get_number(doc, "horizon", "model");
  if (!(m.horizon > 0.0)) invalid("model: horizon T must be positive");
  if (doc.contains("tau")) {
    m.tau = get_number(doc, "tau", "model");
  } else if (doc.contains("discretization") && doc.at("discretization").contains("steps")) {
    const int steps = doc.at("discretization").at("steps").get<int>();
    if (steps < 1) invalid("model: discretization.steps must be positive");
    m.tau = 2.0 * m.horizon / steps;
  } else {
    invalid("model: missing 'tau' and no discretization.steps to derive a default");
  }
  if (!(m.tau > 0.0) || !(m.tau < m.horizon)) invalid("model: tau must satisfy 0 < tau < T");

  if (!doc.contains("agents") || !doc.at("agents").is_array() || doc.at("agents").empty())
    invalid("model: 'agents' must be a non-empty array");
  const auto& jagents = doc.at("agents");
  const std::size_t n_agents = jagents.size();

  std::vector<std::optional<AgentModel>> slots(n_agents);
  for (const auto& ja : jagents) {
    if (!ja.is_object()) invalid("model: agent entries must be objects");
    if (!ja.contains("id") || !ja.at("id").is_number_integer()) invalid("model: agent without integer 'id'");
    const int id = ja.at("id").get<int>();
    const std::string where = "agent " + std::to_string(id);
    if (id < 1 || static_cast<std::size_t>(id) > n_agents)
      invalid(where + ": ids must be 1.." + std::to_string(n_agents));
    if (slots[id - 1]) invalid(where + ": duplicate id");

    AgentModel a;
    a.id = AgentId{id};
    if (!ja.contains("dim") || !ja.at("dim").is_number_integer()) invalid(where + ": missing integer 'dim'");
    a.dim = ja.at("dim").get<int>();
    if (a.dim < 1) invalid(where + ": dim must be positive");
    if (m.dim == 0) m.dim = a.dim;
    if (a.dim != m.dim) invalid(where + ": all agents must share the same state dimension");

    if (ja.contains("neighbors")) {
      if (!ja.at("neighbors").is_array()) invalid(where + ": neighbors must be an array");
      for (const auto& jn : ja.at("neighbors")) {
        if (!jn.is_number_integer()) invalid(where + ": neighbor ids must be integers");
        const int nb = jn.get<int>();
        if (nb < 1 || static_cast<std::size_t>(nb) > n_agents)
          invalid(where + ": dangling neighbor id " + std::to_string(nb));
        if (nb == id) invalid(where + ": an agent cannot be its own neighbor");
        if (std::find(a.neighbors.begin(), a.neighbors.end(), AgentId{nb}) != a.neighbors.end())
          invalid(where + ": duplicate neighbor id " + std::to_string(nb));
        a.neighbors.push_back(AgentId{nb});
      }
    }
    if (!ja.contains("dynamics")) invalid(where + ": missing 'dynamics'");
    a.dynamics = parse_dynamics(ja.at("dynamics"), a.dim, a.neighbors.size(), where);
    a.v_max = get_number(ja, "v_max", where);
    if (!(a.v_max > 0.0)) invalid(where + ": v_max must be positive");
    a.M = get_number(ja, "M", where);
    a.L1 = get_number(ja, "L1", where);
    a.L2 = get_number(ja, "L2", where);
    if (a.M < 0.0 || a.L1 < 0.0 || a.L2 < 0.0) invalid(where + ": M, L1, L2 must be non-negative");
    if (!ja.contains("x0")) invalid(where + ": missing 'x0'");
    a.x0 = get_vector(ja.at("x0"), a.dim, where + ".x0");
    if (ja.contains("reach_radius")) {
      a.reach_radius = get_number(ja, "reach_radius", where);
      if (!(a.reach_radius > 0.0)) invalid(where + ": reach_radius must be positive");
    } else {
      a.reach_radius = (a.M + a.v_max) * (m.horizon - m.tau);
    }
    slots[id - 1] = std::move(a);
  }
  for (auto& s : slots) m.agents.push_back(std::move(*s));
  return m;
}

namespace {

struct FEvaluator {
  const Vec& xi;
  const Vec& xj;
  int n;

  Vec operator()(const ZeroDynamics&) const { return Vec::Zero(n); }

  Vec operator()(const ConsensusDynamics& c) const {
    Vec out = Vec::Zero(n);
    for (std::size_t k = 0; k < c.weights.size(); ++k)
      out += c.weights[k] * (xj.segment(static_cast<Eigen::Index>(k) * n, n) - xi);
    return out;
  }

  Vec operator()(const HillDynamics& h) const {
    const Vec d = xi - h.center;
    const double rho = d.norm();
    if (rho >= h.R) return Vec::Zero(n);
    const double a = std::numbers::pi / h.R;
    // sin(a rho)/rho -> a at the origin
    if (rho < 1e-8) return (h.C * a * a * (1.0 - a * a * rho * rho / 6.0)) * d;
    return (h.C * a * std::sin(a * rho) / rho) * d;
  }

  Vec operator()(const AffineDynamics& af) const {
    Vec out = af.A * xi + af.b;
    for (std::size_t k = 0; k < af.B.size(); ++k)
      out += af.B[k] * xj.segment(static_cast<Eigen::Index>(k) * n, n);
    return out;
  }

  Vec operator()(const ExpressionDynamics& e) const {
    Vec out(n);
    const std::span<const double> si(xi.data(), static_cast<std::size_t>(xi.size()));
    const std::span<const double> sj(xj.data(), static_cast<std::size_t>(xj.size()));
    for (int k = 0; k < n; ++k) out[k] = e.coords[k].eval(si, sj);
    return out;
  }
};

Vec saturate(const Vec& v, double r) {
  const double nv = v.norm();
  if (nv <= r) return v;
  return (r / nv) * v;
}

}  // namespace

Vec eval_f(const AgentModel& agent, const Vec& xi, const Vec& xj) {
  const auto n = agent.dim;
  if (xi.size() != n || xj.size() != static_cast<Eigen::Index>(agent.neighbors.size()) * n)
    throw Error(ErrorKind::Invalid, "eval_f: dimension mismatch for agent " + std::to_string(agent.id.value));
  return std::visit(FEvaluator{xi, xj, n}, agent.dynamics);
}

bool BoundsReport::ok() const {
  return std::all_of(agents.begin(), agents.end(), [](const auto& a) { return a.violations.empty(); });
}

BoundsReport validate_bounds(const NetworkModel& model, std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw Error(ErrorKind::Invalid, "validate_bounds: samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = model.dim;
  BoundsReport report;
  constexpr double inf = std::numeric_limits<double>::infinity();

  for (const auto& a : model.agents) {
    AgentBoundsReport r;
    r.id = a.id;
    const Vec ci = a.x0;
    const double ri = model.region_radius(a.id);
    const auto nb = static_cast<Eigen::Index>(a.neighbors.size());
    auto sample_block = [&]() {
      Vec xj(nb * n);
      for (Eigen::Index k = 0; k < nb; ++k) {
        const auto& na = model.agent(a.neighbors[k]);
        xj.segment(k * n, n) = sample_ball(rng, na.x0, model.region_radius(na.id));
      }
      return xj;
    };
    // keeps a perturbed sample inside the product of regions
    auto pull_into = [&](Vec& x, const Vec& c, double rad) {
      const double d = (x - c).norm();
      if (d > rad) x = c + (rad / d) * (x - c);
    };
    auto g = [&](const Vec& xi, const Vec& xj) { return saturate(eval_f(a, xi, xj), a.M); };

    for (std::size_t s = 0; s < samples; ++s) {
      const Vec xi = sample_ball(rng, ci, ri);
      const Vec xj = sample_block();
      r.sup_f = std::max(r.sup_f, eval_f(a, xi, xj).norm());

      // half of the pairs are local perturbations, where quotients peak
      const bool local = (s % 2) == 1;
      const double scale = local ? 1e-3 * std::max(ri, 1e-12) : 0.0;
      Vec yi = local ? Vec(xi + scale * Vec::NullaryExpr(n, [&]() { return 2 * unif(rng) - 1; }))
                     : sample_ball(rng, ci, ri);
      pull_into(yi, ci, ri);
      const double dxi = (yi - xi).norm();
      if (dxi > 0.0) r.max_q2 = std::max(r.max_q2, (g(xi, xj) - g(yi, xj)).norm() / dxi);

      if (nb > 0) {
        Vec yj = local ? Vec(xj + scale * Vec::NullaryExpr(nb * n, [&]() { return 2 * unif(rng) - 1; }))
                       : sample_block();
        for (Eigen::Index k = 0; k < nb; ++k) {
          const auto& na = model.agent(a.neighbors[k]);
          Vec seg = yj.segment(k * n, n);
          pull_into(seg, na.x0, model.region_radius(na.id));
          yj.segment(k * n, n) = seg;
        }
        const double dxj = (yj - xj).norm();
        if (dxj > 0.0) r.max_q1 = std::max(r.max_q1, (g(xi, xj) - g(xi, yj)).norm() / dxj);
      }
    }

    auto ratio = [&](double observed, double declared) {
      if (declared > 0.0) return observed / declared;
      return observed > 0.0 ? inf : 0.0;
    };
    const double rm = ratio(r.sup_f, a.M), r1 = ratio(r.max_q1, a.L1), r2 = ratio(r.max_q2, a.L2);
    r.worst_ratio = std::max({rm, r1, r2});
    // quotients of exactly linear maps land a few ulps above their constant
    constexpr double tol = 1.0 + 1e-9;
    if (rm > tol) r.violations.push_back("sampled |f| " + std::to_string(r.sup_f) + " exceeds M " + std::to_string(a.M));
    if (r1 > tol) r.violations.push_back("sampled neighbor quotient " + std::to_string(r.max_q1) + " exceeds L1 " + std::to_string(a.L1));
    if (r2 > tol) r.violations.push_back("sampled own-state quotient " + std::to_string(r.max_q2) + " exceeds L2 " + std::to_string(a.L2));
    report.agents.push_back(std::move(r));
  }
  return report;
}

}  // namespace habs
