/*
 * grid.hpp
 *
 *  Uniform axis-aligned cell decompositions of an agent's R_i([0,T]) ball.
 *  Cells are half-open boxes anchor + side [k, k+1) clipped to the ball, so the
 *  decomposition is a partition. Reference points are full box centers.
 */
#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <vector>

#include "habs/reach.hpp"

namespace habs {

struct CellIndex {
  std::vector<std::int32_t> lattice;
  auto operator<=>(const CellIndex&) const = default;
};

struct CellIndexHash {
  std::size_t operator()(const CellIndex& c) const noexcept;
};

/// (l_i, l_j1, ..., l_jNi), ordered like the agent's neighbor tuple.
struct CellConfiguration {
  std::vector<CellIndex> entries;
  auto operator<=>(const CellConfiguration&) const = default;
};

struct CellConfigurationHash {
  std::size_t operator()(const CellConfiguration& c) const noexcept;
};

struct Box {
  Vec lo;
  Vec hi;
};

struct BallHits {
  std::vector<CellIndex> cells;       ///< sorted
  std::size_t sampled_witnesses = 0;  ///< clipped cells accepted via the sampling fallback
};

class CellDecomposition {
public:
  /// side = d_max / sqrt(n); inner = R_i([0, T - dt]).
  static CellDecomposition build(const ReachFamily& family, double d_max, double dt);

  AgentId agent() const { return agent_; }
  int dim() const { return dim_; }
  const Vec& anchor() const { return anchor_; }
  double side() const { return side_; }
  double d_max() const { return d_max_; }
  const Ball& region() const { return region_; }
  const Ball& inner() const { return inner_; }

  /// All valid indices in lexicographic order.
  const std::vector<CellIndex>& index_set() const { return index_set_; }
  std::size_t size() const { return index_set_.size(); }

  /// Box of the lattice index intersects the region ball.
  bool valid(const CellIndex& l) const;

  Box box(const CellIndex& l) const;

  /// Half-open lattice membership of x plus region membership.
  bool contains(const CellIndex& l, const Vec& x) const;

  /// Throws Error(Invalid) if x lies outside the region.
  CellIndex locate(const Vec& x) const;

  /// Box center; within d_max/2 of every point of the cell.
  Vec reference_point(const CellIndex& l) const;

  /// Every box corner lies in the inner ball, hence the cell does.
  bool initiating(const CellIndex& l) const;

  /// Valid cells whose clipped cell meets the closed ball b.
  BallHits cells_intersecting_ball(const Ball& b) const;

  /// Valid cells whose box is contained in the axis-aligned box [lo, hi].
  std::vector<CellIndex> cells_inside_box(const Box& goal) const;
  bool cell_inside_box(const CellIndex& l, const Box& goal) const;

private:
  void check(const CellIndex& l) const;
  std::int32_t axis_index(double x, int axis) const;

  AgentId agent_;
  int dim_ = 0;
  Vec anchor_;
  double side_ = 0.0;
  double d_max_ = 0.0;
  Ball region_;
  Ball inner_;
  std::vector<CellIndex> index_set_;
};

/// pr_i: the entries of `agent` and its neighbors, in neighbor order.
CellConfiguration pr(const std::vector<CellIndex>& all, const AgentModel& agent);

}  // namespace habs
