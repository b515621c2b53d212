/*
 * model.hpp
 *
 *  The coupled multi-agent network  x_i' = f_i(x_i, x_j) + v_i,  |v_i| <= v_max(i),
 *  together with the user-declared bounds M(i), L1(i), L2(i) that the
 *  abstraction relies on.
 */
#pragma once

#include <Eigen/Dense>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "habs/expression.hpp"

namespace habs {

using Vec = Eigen::VectorXd;

/// 1-based agent identifier as it appears in model files.
struct AgentId {
  int value = 1;
  std::size_t pos() const { return static_cast<std::size_t>(value - 1); }
  static AgentId from_pos(std::size_t p) { return AgentId{static_cast<int>(p) + 1}; }
  auto operator<=>(const AgentId&) const = default;
};

struct ZeroDynamics {};

/// f = sum_k w_k (x_jk - x_i)
struct ConsensusDynamics {
  std::vector<double> weights;
};

/// f = -grad h,  h(x) = C (1 + cos(pi |x - c| / R)) inside |x - c| < R, 0 outside.
struct HillDynamics {
  double C = 0.0;
  double R = 1.0;
  Vec center;
};

/// f = A x_i + sum_k B_k x_jk + b
struct AffineDynamics {
  Eigen::MatrixXd A;
  std::vector<Eigen::MatrixXd> B;
  Vec b;
};

struct ExpressionDynamics {
  std::vector<Expression> coords;
  std::vector<std::string> sources;
};

using DynamicsSpec =
    std::variant<ZeroDynamics, ConsensusDynamics, HillDynamics, AffineDynamics, ExpressionDynamics>;

const char* dynamics_name(const DynamicsSpec& d);

struct AgentModel {
  AgentId id;
  int dim = 0;
  std::vector<AgentId> neighbors;  ///< j(i), document order
  DynamicsSpec dynamics;
  double v_max = 0.0;
  double M = 0.0;
  double L1 = 0.0;
  double L2 = 0.0;
  Vec x0;
  double reach_radius = 0.0;  ///< radius of R_i([0, T - tau]) around x0
};

struct NetworkModel {
  std::vector<AgentModel> agents;  ///< agents[p].id.value == p + 1
  double horizon = 0.0;            ///< T
  double tau = 0.0;
  int dim = 0;

  std::size_t size() const { return agents.size(); }
  const AgentModel& agent(AgentId id) const { return agents.at(id.pos()); }

  /// Radius of R_i([0, T]): reach_radius + (M + v_max) tau.
  double region_radius(AgentId id) const;

  /// Agents that list `id` as a neighbor (edges id -> child).
  std::vector<AgentId> children(AgentId id) const;

  /// Topological order with neighbors before the agents they influence, or
  /// nullopt for cyclic graphs.
  std::optional<std::vector<AgentId>> topological_order() const;
};

/// Parses the JSON model document. Throws Error(Parse) on syntax errors (with
/// byte position) and Error(Invalid) on semantic errors such as unknown
/// dynamics variants, dangling neighbor ids or non-positive T, tau, v_max.
NetworkModel parse_model(std::string_view document);

/// f_i(x_i, x_j). `xj` stacks the neighbor states in j(i) order.
Vec eval_f(const AgentModel& agent, const Vec& xi, const Vec& xj);

/// Monte-Carlo check of the declared bounds over the product of the agents'
/// R([0,T]) balls.
struct AgentBoundsReport {
  AgentId id;
  double sup_f = 0.0;       ///< max sampled |f_i|
  double max_q1 = 0.0;      ///< max sampled neighbor-block difference quotient of g_i
  double max_q2 = 0.0;      ///< max sampled own-state difference quotient of g_i
  double worst_ratio = 0.0; ///< max of sup_f/M, max_q1/L1, max_q2/L2 (inf if a bound is 0 and exceeded)
  std::vector<std::string> violations;
};

struct BoundsReport {
  std::vector<AgentBoundsReport> agents;
  bool ok() const;
};

BoundsReport validate_bounds(const NetworkModel& model, std::size_t samples, std::uint64_t seed = 1);

/// Uniform sample from the closed ball B(center; radius).
template <class Rng>
Vec sample_ball(Rng& rng, const Vec& center, double radius);

}  // namespace habs

#include "habs/detail/sampling.hpp"
