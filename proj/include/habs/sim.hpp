/*
 * sim.hpp
 *
 *  Closed-loop simulation of the full coupled network under a control
 *  schedule, and the per-step cell membership check of a plan.
 */
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "habs/planner.hpp"

namespace habs {

struct Trajectory {
  int dim = 0;
  std::vector<double> times;
  std::vector<std::vector<Vec>> states;  ///< [sample][agent position]
  std::vector<std::vector<Vec>> inputs;  ///< applied v_i at the same samples
  int samples_per_step = 0;              ///< samples between consecutive kdt, 0 for open loop

  std::size_t size() const { return times.size(); }
  /// State of every agent at step k (requires samples_per_step > 0).
  const std::vector<Vec>& at_step(int k) const { return states.at(static_cast<std::size_t>(k * samples_per_step)); }
};

struct SimulationDiagnostics {
  /// [step][agent]: |x_i((k+1)dt) - target point|, the closed form endpoint.
  std::vector<std::vector<double>> endpoint_deviation;
  double max_endpoint_deviation = 0.0;
  double max_input_ratio = 0.0;  ///< max |v_i| / v_max(i)
  double audit_error = 0.0;      ///< step-halving estimate on the final state
};

/// Monolithic RK4 of the coupled system, `substeps` steps per dt. On each
/// interval x_{i0} is the realized state at kdt. Throws Error(Integration)
/// when the step-halving estimate of the final state exceeds the tolerance.
Trajectory simulate_closed_loop(const NetworkModel& model, const ControlSchedule& schedule,
                                const IntegratorSettings& settings, SimulationDiagnostics* diag = nullptr);

struct MembershipEntry {
  int step = 0;
  AgentId agent;
  CellIndex planned;
  std::optional<CellIndex> located;  ///< empty when outside the region
  double margin = 0.0;               ///< signed distance to the planned cell boundary
  bool snapped = false;              ///< accepted within the 1e-9 face tolerance
  bool ok = false;
};

struct ValidationReport {
  std::vector<MembershipEntry> entries;
  std::size_t mismatches = 0;
  std::size_t snapped = 0;
  std::size_t tube_violations = 0;
  std::size_t input_violations = 0;
  double min_margin = 0.0;  ///< over steps 1..m (step 0 when m = 0)
  std::vector<std::string> failures;
  bool ok() const { return mismatches == 0; }
};

ValidationReport validate_plan(const Abstraction& abs, const Plan& plan, const Trajectory& traj);

/// v(t, agent position) -> input. Throws Error(Invalid) if an input exceeds v_max.
using InputSignal = std::function<Vec(double, std::size_t)>;

Trajectory simulate_open_loop(const NetworkModel& model, const InputSignal& v, double duration, int steps);

}  // namespace habs
