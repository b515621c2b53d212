/*
 * planner.hpp
 *
 *  Bounded timed reachability over the abstraction. Each agent has an ordered
 *  list of box goals with time windows; a relative window is counted from the
 *  step at which the previous goal was met (from step 0 for the first goal),
 *  an absolute one from step 0. Windows are checked at sampling instants only.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "habs/abstraction.hpp"

namespace habs {

struct Goal {
  Box box;
  double a = 0.0;
  double b = 0.0;
  bool relative = true;
};

struct TimedReachSpec {
  std::vector<std::vector<Goal>> goals;  ///< by agent position
};

/// Reads the "spec" array of a model document: [{"agent": id, "goals": [...]}].
/// Agents without an entry get no goals.
TimedReachSpec parse_spec(std::string_view document, const NetworkModel& model);

struct StepRange {
  int lo = 0;
  int hi = 0;
};

/// [ceil(a/dt), floor(b/dt)] with a 1e-9 tolerance on the quotients. Throws
/// Error(Unsatisfiable) if empty and Error(Invalid) unless 0 <= a <= b.
StepRange window_to_steps(double a, double b, double dt);

/// Cells whose box lies inside the goal box.
std::vector<CellIndex> label_cells(const CellDecomposition& dec, const Box& region);

/// Goals with their windows converted to steps and labels resolved.
struct CompiledGoal {
  StepRange window;
  bool relative = true;
  std::vector<CellIndex> cells;  ///< sorted
  bool contains(const CellIndex& l) const;
};

std::vector<CompiledGoal> compile_goals(const std::vector<Goal>& goals, const CellDecomposition& dec, double dt);

/// Worst-case step at which the last goal must be met.
int cumulative_deadline(const std::vector<CompiledGoal>& goals);

/// Search node: cell, goals met so far, step of the last satisfaction (-1 when irrelevant).
struct PlanNode {
  CellIndex cell;
  int met = 0;
  int last = -1;
  auto operator<=>(const PlanNode&) const = default;
};

/// Node sets per step Q^0 .. Q^m for one agent, given its neighbors' cell paths.
struct ForwardSets {
  std::vector<std::vector<PlanNode>> nodes;  ///< sorted per step
  std::vector<std::vector<CellIndex>> cells; ///< projections, sorted
};

/// neighbor_paths[k] is the cell path of the k-th neighbor, length m + 1.
ForwardSets forward_reach(const Abstraction& abs, AgentId id, const std::vector<CompiledGoal>& goals,
                          const std::vector<std::vector<CellIndex>>& neighbor_paths, int m);

struct PrunedSets {
  std::vector<std::vector<PlanNode>> nodes;
  std::vector<std::vector<CellIndex>> cells;
  std::vector<CellIndex> least_path;  ///< lexicographically least satisfying cell path
};

/// Keeps the nodes from which all goals can still be met by step m. Throws
/// Error(Unsatisfiable) naming the first goal that cannot be met.
PrunedSets backward_prune(const Abstraction& abs, AgentId id, const std::vector<CompiledGoal>& goals,
                          const std::vector<std::vector<CellIndex>>& neighbor_paths, const ForwardSets& fwd);

/// Satisfying cell paths in lexicographic order, at most `limit`.
std::vector<std::vector<CellIndex>> satisfying_paths(const Abstraction& abs, AgentId id,
                                                     const std::vector<CompiledGoal>& goals,
                                                     const std::vector<std::vector<CellIndex>>& neighbor_paths,
                                                     const PrunedSets& pruned, std::size_t limit);

/// Steps at which the goals are met along a fixed cell path (earliest
/// consistent choice), or nullopt.
std::optional<std::vector<int>> goal_steps(const std::vector<CellIndex>& path, const std::vector<CompiledGoal>& goals);

struct PlanStep {
  Vec w;
  Vec target_point;
  Vec chi_end;
};

struct AgentPlan {
  AgentId agent;
  std::vector<CellIndex> cells;  ///< l^0 .. l^m
  std::vector<PlanStep> steps;   ///< m entries
  std::vector<int> goal_steps;
};

struct SynthesisStats {
  std::string strategy;
  std::size_t paths_explored = 0;
  std::size_t backtracks = 0;
  std::size_t product_states = 0;
  double runtime_s = 0.0;
};

struct Plan {
  int steps = 0;  ///< m
  double dt = 0.0;
  std::vector<AgentPlan> agents;
  SynthesisStats stats;
};

struct PlannerSettings {
  std::size_t budget = 64;          ///< parent paths tried per child failure
  std::size_t state_cap = 1000000;  ///< product search nodes
};

/// Horizon m used for a spec: min(l, max over agents of the cumulative deadline).
int plan_horizon(const Abstraction& abs, const std::vector<std::vector<CompiledGoal>>& goals);

/// Agents in topological order, each planned against its neighbors' chosen
/// paths with conflict-directed backtracking. Throws Error(Invalid) on cyclic
/// graphs and Error(Unsatisfiable) when the budget is exhausted.
Plan cascade_synthesize(const Abstraction& abs, const TimedReachSpec& spec, const PlannerSettings& settings = {});

/// Breadth-first search over product states; returns a shortest plan.
/// Throws Error(Unsatisfiable) when no plan exists or the state cap is hit.
Plan product_synthesize(const Abstraction& abs, const TimedReachSpec& spec, const PlannerSettings& settings = {});

/// Fills w, target points and chi endpoints from the cell paths. Throws
/// Error(Inconsistent) naming the step and agent when a transition is not in Post.
void fill_controls(const Abstraction& abs, Plan& plan);

struct ScheduledControl {
  std::shared_ptr<const ReferenceTrajectory> reference;
  Vec w;
  Vec target_point;
  double lambda = 0.0;
};

struct ControlSchedule {
  double dt = 0.0;
  int steps = 0;
  std::vector<std::vector<ScheduledControl>> controls;  ///< [agent position][step]
};

/// Recomputes reference trajectories and w from the plan's cell paths.
ControlSchedule extract_controls(const Plan& plan, const Abstraction& abs);

}  // namespace habs
