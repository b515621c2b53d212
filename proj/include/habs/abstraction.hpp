/*
 * abstraction.hpp
 *
 *  Per-agent deterministic transition systems. The successors of a cell
 *  configuration are the cells meeting B(chi_i(dt); r_i); each successor is
 *  its own action class, represented by one w value. The product system is
 *  never built, successor sets are expanded on demand.
 */
#pragma once

#include <functional>
#include <memory>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "habs/controller.hpp"
#include "habs/grid.hpp"
#include "habs/wellposed.hpp"

namespace habs {

struct PostEntry {
  std::vector<CellIndex> cells;  ///< sorted
  Vec chi_end;                   ///< chi_i(dt)
  double r = 0.0;                ///< r_i
  std::size_t sampled_witnesses = 0;
};

/// Action ([w] class) leading from a configuration to one successor cell.
struct SuccessorAction {
  CellConfiguration config;
  CellIndex target;
  Vec target_point;  ///< in target cell and in B(chi(dt); r_i)
  Vec w;
  double margin = 0.0;  ///< distance of target_point to the cell boundary
};

using ProductState = std::vector<CellIndex>;  ///< one cell per agent, by position

struct AgentAbstractionStats {
  AgentId agent;
  std::size_t cells = 0;
  std::size_t initiating = 0;
  std::size_t evaluated_configs = 0;
  double mean_post = 0.0;
  std::size_t sampled_witnesses = 0;
};

class Abstraction {
public:
  Abstraction(const NetworkModel& model, DiscretizationParams params, IntegratorSettings settings = {});

  Abstraction(const Abstraction&) = delete;
  Abstraction& operator=(const Abstraction&) = delete;

  const NetworkModel& model() const { return *model_; }
  const DiscretizationParams& params() const { return params_; }
  const IntegratorSettings& settings() const { return settings_; }
  double dt() const { return params_.dt; }
  int steps() const { return params_.steps; }

  const CellDecomposition& decomposition(AgentId id) const { return decs_.at(id.pos()); }
  std::span<const CellDecomposition> decompositions() const { return decs_; }

  /// Cells containing X_{i0}, one per agent.
  ProductState initial_state() const;

  /// Memoized successor set. Throws Error(Invalid) for non-initiating
  /// configurations and Error(Infeasible) if B(chi(dt); r_i) leaves the region.
  std::shared_ptr<const PostEntry> post(AgentId id, const CellConfiguration& config) const;

  /// All entries of the configuration are initiating in their decompositions.
  bool initiating(AgentId id, const CellConfiguration& config) const;

  /// Fresh reference trajectory (never cached).
  ReferenceTrajectory reference(AgentId id, const CellConfiguration& config) const;

  /// Throws Error(Inconsistent) if target is not a successor.
  SuccessorAction successor_action(AgentId id, const CellConfiguration& config, const CellIndex& target) const;

  /// Per-agent successor lists of a product state (the product is their Cartesian product).
  std::vector<std::shared_ptr<const PostEntry>> product_post_factors(const ProductState& state) const;
  /// Materialized product successors, lexicographic.
  std::vector<ProductState> product_post(const ProductState& state) const;

  /// Depth-bounded traversal of product paths starting at `start`. Paths end
  /// early at states with a non-initiating configuration.
  void enumerate_paths(const ProductState& start, int length,
                       const std::function<void(const std::vector<ProductState>&)>& visitor) const;

  AgentAbstractionStats stats(AgentId id) const;

private:
  using Cache = std::unordered_map<CellConfiguration, std::shared_ptr<const PostEntry>, CellConfigurationHash>;

  const NetworkModel* model_;
  DiscretizationParams params_;
  IntegratorSettings settings_;
  std::vector<CellDecomposition> decs_;
  mutable std::vector<Cache> cache_;
  mutable std::unique_ptr<std::shared_mutex[]> locks_;
};

/// Signed distance from x to the boundary of the (clipped) cell; negative outside.
double cell_margin(const CellDecomposition& dec, const CellIndex& l, const Vec& x);

/// Target point inside cell ∩ B(center; r): the box center clamped into the
/// ball, or a point between the cell's closest point to the ball center and
/// the box center when that has the larger cell margin. nullopt if neither
/// lies in the intersection.
std::optional<Vec> choose_target_point(const CellDecomposition& dec, const CellIndex& l, const Ball& ball);

}  // namespace habs
