/*
 * io.hpp
 *
 *  Text artifacts: plan files, trajectory CSV, SVG figures and chained models.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "habs/sim.hpp"

namespace habs {

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hash_hex(std::uint64_t h);

struct PlanFile {
  Plan plan;
  DiscretizationParams params;
  std::string model_hash;
};

/// Deterministic JSON text (no timings).
std::string plan_to_json(const Plan& plan, const DiscretizationParams& params, const std::string& model_hash);
/// Throws Error(Parse) on malformed plan files.
PlanFile parse_plan(std::string_view text, const NetworkModel& model);

/// Columns t, agent, x1..xn, v1..vn; one row per sample and agent.
std::string trajectory_to_csv(const Trajectory& traj);
/// Throws Error(Parse) on malformed rows.
Trajectory parse_trajectory_csv(std::string_view text, const NetworkModel& model);

/// Copy of the model document with every agent's x0 replaced by `states`.
std::string chain_model(std::string_view model_document, const std::vector<Vec>& states);

struct RenderInput {
  const Abstraction* abs = nullptr;
  const TimedReachSpec* spec = nullptr;
  const Plan* plan = nullptr;
  const Trajectory* traj = nullptr;
};

/// Planar figure: region circles, reachable/satisfying/selected cells, goal
/// boxes and trajectories. Throws Error(Invalid) unless n = 2.
std::string render_svg(const RenderInput& in);

}  // namespace habs
