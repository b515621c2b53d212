/*
 * grid.cpp
 */
#include "habs/grid.hpp"

#include <algorithm>
#include <cmath>

#include "habs/error.hpp"

namespace habs {

namespace {

constexpr int kWitnessSamples = 256;

std::size_t mix(std::size_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

double radical_inverse(unsigned base, unsigned k) {
  double inv = 1.0 / base, f = inv, out = 0.0;
  while (k > 0) {
    out += f * (k % base);
    k /= base;
    f *= inv;
  }
  return out;
}

unsigned nth_prime(int i) {
  static const unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  return primes[i % 16];
}

// Calls fn(CellIndex) for every lattice point in [lo, hi] (inclusive), lexicographic.
template <class Fn>
void for_each_lattice(const std::vector<std::int32_t>& lo, const std::vector<std::int32_t>& hi, Fn&& fn) {
  const std::size_t n = lo.size();
  for (std::size_t k = 0; k < n; ++k)
    if (lo[k] > hi[k]) return;
  CellIndex cur{lo};
  for (;;) {
    fn(cur);
    std::size_t k = n;
    while (k > 0) {
      --k;
      if (cur.lattice[k] < hi[k]) {
        ++cur.lattice[k];
        for (std::size_t r = k + 1; r < n; ++r) cur.lattice[r] = lo[r];
        break;
      }
      if (k == 0) return;
    }
  }
}

double clamp_distance_sq(const Box& b, const Vec& p) {
  double d2 = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double q = std::clamp(p[k], b.lo[k], b.hi[k]);
    d2 += (p[k] - q) * (p[k] - q);
  }
  return d2;
}

double farthest_corner_sq(const Box& b, const Vec& p) {
  double d2 = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double a = std::max(std::abs(b.lo[k] - p[k]), std::abs(b.hi[k] - p[k]));
    d2 += a * a;
  }
  return d2;
}

}  // namespace

std::size_t CellIndexHash::operator()(const CellIndex& c) const noexcept {
  std::size_t h = 0;
  for (auto v : c.lattice) h = mix(h, static_cast<std::uint32_t>(v));
  return h;
}

std::size_t CellConfigurationHash::operator()(const CellConfiguration& c) const noexcept {
  std::size_t h = 0;
  for (const auto& e : c.entries) h = mix(h, CellIndexHash{}(e));
  return h;
}

CellDecomposition CellDecomposition::build(const ReachFamily& family, double d_max, double dt) {
  if (!(d_max > 0.0)) throw Error(ErrorKind::Invalid, "build_decomposition: d_max must be positive");
  CellDecomposition dec;
  dec.agent_ = family.agent();
  dec.region_ = family.full();
  dec.inner_ = family.inner_region(dt);
  dec.anchor_ = dec.region_.center;
  dec.dim_ = static_cast<int>(dec.anchor_.size());
  dec.d_max_ = d_max;
  dec.side_ = d_max / std::sqrt(static_cast<double>(dec.dim_));

  std::vector<std::int32_t> lo(dec.dim_), hi(dec.dim_);
  for (int k = 0; k < dec.dim_; ++k) {
    lo[k] = dec.axis_index(dec.region_.center[k] - dec.region_.radius, k);
    hi[k] = dec.axis_index(dec.region_.center[k] + dec.region_.radius, k);
  }
  for_each_lattice(lo, hi, [&](const CellIndex& l) {
    if (dec.valid(l)) dec.index_set_.push_back(l);
  });
  return dec;
}

std::int32_t CellDecomposition::axis_index(double x, int axis) const {
  return static_cast<std::int32_t>(std::floor((x - anchor_[axis]) / side_));
}

Box CellDecomposition::box(const CellIndex& l) const {
  Box b{Vec(dim_), Vec(dim_)};
  for (int k = 0; k < dim_; ++k) {
    b.lo[k] = anchor_[k] + side_ * l.lattice[k];
    b.hi[k] = anchor_[k] + side_ * (l.lattice[k] + 1);
  }
  return b;
}

bool CellDecomposition::valid(const CellIndex& l) const {
  if (static_cast<int>(l.lattice.size()) != dim_) return false;
  return clamp_distance_sq(box(l), region_.center) <= region_.radius * region_.radius;
}

void CellDecomposition::check(const CellIndex& l) const {
  if (!valid(l)) throw Error(ErrorKind::Invalid, "invalid cell index for agent " + std::to_string(agent_.value));
}

bool CellDecomposition::contains(const CellIndex& l, const Vec& x) const {
  if (static_cast<int>(l.lattice.size()) != dim_ || x.size() != dim_) return false;
  for (int k = 0; k < dim_; ++k)
    if (axis_index(x[k], k) != l.lattice[k]) return false;
  return region_.contains(x);
}

CellIndex CellDecomposition::locate(const Vec& x) const {
  if (x.size() != dim_) throw Error(ErrorKind::Invalid, "locate: dimension mismatch");
  if (!region_.contains(x))
    throw Error(ErrorKind::Invalid, "locate: point outside the region of agent " + std::to_string(agent_.value));
  CellIndex l;
  l.lattice.resize(dim_);
  for (int k = 0; k < dim_; ++k) l.lattice[k] = axis_index(x[k], k);
  return l;
}

Vec CellDecomposition::reference_point(const CellIndex& l) const {
  check(l);
  Vec c(dim_);
  for (int k = 0; k < dim_; ++k) c[k] = anchor_[k] + side_ * (l.lattice[k] + 0.5);
  return c;
}

bool CellDecomposition::initiating(const CellIndex& l) const {
  check(l);
  return farthest_corner_sq(box(l), inner_.center) <= inner_.radius * inner_.radius;
}

BallHits CellDecomposition::cells_intersecting_ball(const Ball& b) const {
  BallHits out;
  if ((b.center - region_.center).norm() > b.radius + region_.radius) return out;
  std::vector<std::int32_t> lo(dim_), hi(dim_);
  for (int k = 0; k < dim_; ++k) {
    lo[k] = std::max(axis_index(b.center[k] - b.radius, k), axis_index(region_.center[k] - region_.radius, k));
    hi[k] = std::min(axis_index(b.center[k] + b.radius, k), axis_index(region_.center[k] + region_.radius, k));
  }
  const double r2 = b.radius * b.radius;
  const double R2 = region_.radius * region_.radius;
  for_each_lattice(lo, hi, [&](const CellIndex& l) {
    const Box bx = box(l);
    if (clamp_distance_sq(bx, region_.center) > R2) return;
    if (clamp_distance_sq(bx, b.center) > r2) return;
    if (farthest_corner_sq(bx, region_.center) <= R2) {
      out.cells.push_back(l);
      return;
    }
    // clipped cell: the clamp point of b's center is a witness when it lies in the region
    Vec p(dim_);
    for (int k = 0; k < dim_; ++k) p[k] = std::clamp(b.center[k], bx.lo[k], bx.hi[k]);
    if ((p - region_.center).squaredNorm() <= R2) {
      out.cells.push_back(l);
      return;
    }
    for (int s = 1; s <= kWitnessSamples; ++s) {
      for (int k = 0; k < dim_; ++k)
        p[k] = bx.lo[k] + side_ * radical_inverse(nth_prime(k), static_cast<unsigned>(s));
      if ((p - region_.center).squaredNorm() <= R2 && (p - b.center).squaredNorm() <= r2) {
        out.cells.push_back(l);
        ++out.sampled_witnesses;
        return;
      }
    }
  });
  return out;
}

bool CellDecomposition::cell_inside_box(const CellIndex& l, const Box& goal) const {
  const Box bx = box(l);
  for (int k = 0; k < dim_; ++k)
    if (bx.lo[k] < goal.lo[k] || bx.hi[k] > goal.hi[k]) return false;
  return true;
}

std::vector<CellIndex> CellDecomposition::cells_inside_box(const Box& goal) const {
  std::vector<CellIndex> out;
  std::vector<std::int32_t> lo(dim_), hi(dim_);
  for (int k = 0; k < dim_; ++k) {
    lo[k] = axis_index(goal.lo[k], k);
    hi[k] = axis_index(goal.hi[k], k);
  }
  for_each_lattice(lo, hi, [&](const CellIndex& l) {
    if (valid(l) && cell_inside_box(l, goal)) out.push_back(l);
  });
  return out;
}

CellConfiguration pr(const std::vector<CellIndex>& all, const AgentModel& agent) {
  CellConfiguration c;
  c.entries.reserve(agent.neighbors.size() + 1);
  c.entries.push_back(all.at(agent.id.pos()));
  for (AgentId j : agent.neighbors) c.entries.push_back(all.at(j.pos()));
  return c;
}

}  // namespace habs
