/*
 * controller.hpp
 *
 *  Transition controllers. For a cell configuration the reference trajectory
 *  chi solves chi' = g_i(chi, x_G of the neighbors), chi(0) = x_G of the own
 *  cell, with g_i = sat_M(f_i). The feedback
 *
 *    kbar = [g_i(chi(t), xG_j) - g_i(x_i, x_j)] + lambda w + (x_G - x_i0)/dt
 *
 *  drives the agent to chi(dt) + lambda w dt from any x_i0 in its cell; the
 *  applied input is sat_{v_max}(kbar).
 */
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "habs/grid.hpp"
#include "habs/model.hpp"

namespace habs {

struct IntegratorSettings {
  int substeps = 100;      ///< RK4 steps per dt
  double integ_tol = 1e-8; ///< absolute, per component
};

/// sat_r(v)
Vec saturate(const Vec& v, double r);

/// g_i = sat_{M(i)}(f_i)
Vec eval_g(const AgentModel& agent, const Vec& xi, const Vec& xj);

class ReferenceTrajectory {
public:
  AgentId agent;
  CellConfiguration config;
  double dt = 0.0;
  Vec own_reference;        ///< x_{l_i,G}
  Vec neighbor_references;  ///< stacked x_{l_j,G}
  std::vector<Vec> values;  ///< chi at k dt / substeps, k = 0..substeps
  std::vector<Vec> slopes;  ///< g_i(chi, xG_j) at the same nodes
  double error_estimate = 0.0;

  const Vec& endpoint() const { return values.back(); }
  /// Cubic Hermite interpolation between the stored nodes; t in [0, dt].
  Vec at(double t) const;
};

/// Integrates the reference trajectory from explicit reference points.
/// Throws Error(Integration) when the step-halving estimate exceeds integ_tol.
ReferenceTrajectory integrate_reference(const AgentModel& agent, const CellConfiguration& config,
                                        const Vec& own_reference, const Vec& neighbor_references, double dt,
                                        const IntegratorSettings& settings);

/// Same, resolving reference points through the decompositions (indexed by agent position).
ReferenceTrajectory integrate_reference(const AgentModel& agent, const CellConfiguration& config,
                                        std::span<const CellDecomposition> decs, double dt,
                                        const IntegratorSettings& settings);

/// Radius lambda dt v_max of the ball of endpoints reachable by varying w.
double reach_radius_r(double lambda, double dt, double v_max);

/// w = (x - chi(dt)) / (lambda dt); requires |x - chi(dt)| <= r_i.
Vec select_w(const ReferenceTrajectory& ref, const Vec& x, double lambda, double v_max);

struct TransitionControl {
  const AgentModel* agent = nullptr;
  std::shared_ptr<const ReferenceTrajectory> reference;
  Vec x_i0;
  Vec w;
  double lambda = 0.0;

  double dt() const { return reference->dt; }
};

/// (dt - t)/dt (x_i0 - x_G) + lambda w t + chi(t)
Vec closed_form_endpoint(const TransitionControl& ctrl, double t);

struct KComponents {
  Vec k1, k2, k3;
  Vec sum() const { return k1 + k2 + k3; }
};

KComponents eval_k_components(const TransitionControl& ctrl, double t, const Vec& xi, const Vec& dj);
Vec eval_kbar(const TransitionControl& ctrl, double t, const Vec& xi, const Vec& dj);
/// sat_{v_max}(kbar)
Vec eval_k(const TransitionControl& ctrl, double t, const Vec& xi, const Vec& dj);

/// One neighbor's realized disturbance: piecewise linear through knots, each
/// knot = cell point + offset with |offset| <= c_rate * t.
struct DisturbancePath {
  std::vector<double> times;
  std::vector<Vec> points;
  std::vector<Vec> cell_points;
  std::vector<Vec> offsets;
  double c_rate = 0.0;

  Vec at(double t) const;
};

struct DisturbanceTube {
  std::vector<DisturbancePath> paths;  ///< one per neighbor, in neighbor order
  Vec at(double t, int dim) const;     ///< stacked neighbor block
};

/// Random path inside cell + B(c_rate t), deterministic per seed.
DisturbancePath sample_disturbance(const CellDecomposition& dec, const CellIndex& cell, double c_rate, double dt,
                                   std::uint64_t seed, int knots = 8);

/// Bounds entering the k1 envelope L1 (mu d_max / 2 + Mnorm t) + L2 |z - chi|.
struct EnvelopeParams {
  double mu_norm = 0.0;
  double M_norm = 0.0;
  double d_max = 0.0;
};

struct AuxiliaryResult {
  Vec endpoint;
  Vec closed_form;            ///< closed_form_endpoint at dt
  double deviation = 0.0;     ///< max-abs component of endpoint - closed_form
  double max_kbar_ratio = 0.0;///< max |kbar| / v_max over all evaluations
  std::size_t saturations = 0;
  double max_k1_excess = -1e300;  ///< max of |k1| - envelope (needs EnvelopeParams)
  double max_k2 = 0.0;
  double max_k3 = 0.0;
};

/// RK4 on z' = g_i(z, d(t)) + k(t, z, d(t)). Throws Error(Integration) if the
/// endpoint misses the closed form by more than integ_tol.
AuxiliaryResult integrate_auxiliary(const TransitionControl& ctrl, const DisturbanceTube& tube,
                                    const IntegratorSettings& settings,
                                    const std::optional<EnvelopeParams>& envelope = std::nullopt);

}  // namespace habs
