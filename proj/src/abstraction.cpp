/*
 * abstraction.cpp
 */
#include "habs/abstraction.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "habs/error.hpp"

namespace habs {

namespace {

constexpr double kContainSlack = 1e-9;
constexpr int kTargetSamples = 512;

double radical_inverse(unsigned base, unsigned k) {
  double inv = 1.0 / base, f = inv, out = 0.0;
  while (k > 0) {
    out += f * (k % base);
    k /= base;
    f *= inv;
  }
  return out;
}

// Largest s in [0, 1] with |p + s d - c| <= r, assuming |p - c| <= r.
double segment_exit(const Vec& p, const Vec& d, const Ball& b) {
  const double dd = d.squaredNorm();
  if (dd == 0.0) return 1.0;
  const Vec q = p - b.center;
  const double qd = q.dot(d);
  const double qq = q.squaredNorm() - b.radius * b.radius;
  const double disc = qd * qd - dd * qq;
  if (disc < 0.0) return 0.0;
  const double s = (-qd + std::sqrt(disc)) / dd;
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace

double cell_margin(const CellDecomposition& dec, const CellIndex& l, const Vec& x) {
  const Box b = dec.box(l);
  double m = dec.region().radius - (x - dec.region().center).norm();
  for (int k = 0; k < dec.dim(); ++k) m = std::min({m, x[k] - b.lo[k], b.hi[k] - x[k]});
  return m;
}

std::optional<Vec> choose_target_point(const CellDecomposition& dec, const CellIndex& l, const Ball& ball) {
  const Box b = dec.box(l);
  const Vec ctr = dec.reference_point(l);
  std::optional<Vec> best;
  double best_margin = -1e300;
  auto consider = [&](const Vec& x) {
    if ((x - ball.center).norm() > ball.radius * (1.0 + 1e-12)) return;
    if (!dec.contains(l, x)) return;
    const double m = cell_margin(dec, l, x);
    if (m > best_margin) {
      best_margin = m;
      best = x;
    }
  };

  // box center clamped into the ball
  const Vec off = ctr - ball.center;
  const double dist = off.norm();
  if (dist <= ball.radius)
    consider(ctr);
  else
    consider(Vec(ball.center + (ball.radius / dist) * off));

  // closest cell point to the ball center, moved halfway along the feasible
  // part of the segment towards the box center
  Vec p = ball.center.cwiseMax(b.lo).cwiseMin(b.hi);
  if (dec.region().contains(p) && ball.contains(p)) {
    const Vec d = ctr - p;
    const double s = std::min(segment_exit(p, d, ball), segment_exit(p, d, dec.region()));
    consider(Vec(p + (0.5 * s) * d));
  }

  if (!best || best_margin <= 0.0) {
    Vec x(dec.dim());
    static const unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
    for (int s = 1; s <= kTargetSamples; ++s) {
      for (int k = 0; k < dec.dim(); ++k)
        x[k] = b.lo[k] + dec.side() * radical_inverse(primes[k % 8], static_cast<unsigned>(s));
      if (ball.contains(x) && dec.region().contains(x)) consider(x);
    }
  }
  return best;
}

Abstraction::Abstraction(const NetworkModel& model, DiscretizationParams params, IntegratorSettings settings)
  : model_(&model), params_(std::move(params)), settings_(settings) {
  validate_discretization(model, params_);
  decs_.reserve(model.size());
  for (const auto& a : model.agents)
    decs_.push_back(CellDecomposition::build(ReachFamily::of(model, a.id), params_.d_max[a.id.pos()], params_.dt));
  cache_.resize(model.size());
  locks_ = std::make_unique<std::shared_mutex[]>(model.size());
}

ProductState Abstraction::initial_state() const {
  ProductState s;
  for (const auto& a : model_->agents) s.push_back(decs_[a.id.pos()].locate(a.x0));
  return s;
}

bool Abstraction::initiating(AgentId id, const CellConfiguration& config) const {
  const auto& a = model_->agent(id);
  if (config.entries.size() != a.neighbors.size() + 1) return false;
  if (!decs_[id.pos()].initiating(config.entries[0])) return false;
  for (std::size_t k = 0; k < a.neighbors.size(); ++k)
    if (!decs_[a.neighbors[k].pos()].initiating(config.entries[k + 1])) return false;
  return true;
}

ReferenceTrajectory Abstraction::reference(AgentId id, const CellConfiguration& config) const {
  return integrate_reference(model_->agent(id), config, decs_, params_.dt, settings_);
}

std::shared_ptr<const PostEntry> Abstraction::post(AgentId id, const CellConfiguration& config) const {
  const std::size_t i = id.pos();
  {
    std::shared_lock lock(locks_[i]);
    const auto it = cache_[i].find(config);
    if (it != cache_[i].end()) return it->second;
  }
  if (!initiating(id, config))
    throw Error(ErrorKind::Invalid, "post: non-initiating configuration for agent " + std::to_string(id.value));

  const auto& a = model_->agent(id);
  const auto ref = reference(id, config);
  auto entry = std::make_shared<PostEntry>();
  entry->chi_end = ref.endpoint();
  entry->r = reach_radius_r(params_.lambda[i], params_.dt, a.v_max);
  const Ball& region = decs_[i].region();
  if ((entry->chi_end - region.center).norm() + entry->r > region.radius + kContainSlack)
    throw Error(ErrorKind::Infeasible, "post: B(chi(dt); r) leaves the region of agent " + std::to_string(id.value));
  auto hits = decs_[i].cells_intersecting_ball(Ball{entry->chi_end, entry->r});
  entry->cells = std::move(hits.cells);
  entry->sampled_witnesses = hits.sampled_witnesses;
  if (entry->cells.empty())
    throw Error(ErrorKind::Infeasible, "post: empty successor set for agent " + std::to_string(id.value));

  std::unique_lock lock(locks_[i]);
  auto [it, inserted] = cache_[i].emplace(config, std::move(entry));
  return it->second;
}

SuccessorAction Abstraction::successor_action(AgentId id, const CellConfiguration& config,
                                              const CellIndex& target) const {
  const auto entry = post(id, config);
  if (!std::binary_search(entry->cells.begin(), entry->cells.end(), target))
    throw Error(ErrorKind::Inconsistent, "successor_action: target is not a successor for agent " +
                                             std::to_string(id.value));
  const auto& a = model_->agent(id);
  const auto& dec = decs_[id.pos()];
  const auto point = choose_target_point(dec, target, Ball{entry->chi_end, entry->r});
  if (!point)
    throw Error(ErrorKind::Inconsistent, "successor_action: no target point in cell for agent " +
                                             std::to_string(id.value));
  SuccessorAction act;
  act.config = config;
  act.target = target;
  act.target_point = *point;
  act.margin = cell_margin(dec, target, *point);
  const double lambda = params_.lambda[id.pos()];
  if (lambda > 0.0) {
    act.w = (*point - entry->chi_end) / (lambda * params_.dt);
    if (act.w.norm() > a.v_max) act.w *= a.v_max / act.w.norm();
  } else {
    act.w = Vec::Zero(a.dim);
  }
  return act;
}

std::vector<std::shared_ptr<const PostEntry>> Abstraction::product_post_factors(const ProductState& state) const {
  std::vector<std::shared_ptr<const PostEntry>> out;
  out.reserve(model_->size());
  for (const auto& a : model_->agents) out.push_back(post(a.id, pr(state, a)));
  return out;
}

std::vector<ProductState> Abstraction::product_post(const ProductState& state) const {
  const auto factors = product_post_factors(state);
  std::vector<ProductState> out;
  ProductState cur(factors.size());
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == factors.size()) {
      out.push_back(cur);
      return;
    }
    for (const auto& c : factors[k]->cells) {
      cur[k] = c;
      rec(k + 1);
    }
  };
  rec(0);
  return out;
}

void Abstraction::enumerate_paths(const ProductState& start, int length,
                                  const std::function<void(const std::vector<ProductState>&)>& visitor) const {
  std::vector<ProductState> path{start};
  std::function<void()> rec = [&]() {
    const int depth = static_cast<int>(path.size()) - 1;
    bool live = depth < length;
    if (live)
      for (const auto& a : model_->agents)
        if (!initiating(a.id, pr(path.back(), a))) live = false;
    if (!live) {
      visitor(path);
      return;
    }
    for (auto& next : product_post(path.back())) {
      path.push_back(std::move(next));
      rec();
      path.pop_back();
    }
  };
  rec();
}

AgentAbstractionStats Abstraction::stats(AgentId id) const {
  AgentAbstractionStats s;
  s.agent = id;
  const auto& dec = decs_[id.pos()];
  s.cells = dec.size();
  for (const auto& l : dec.index_set())
    if (dec.initiating(l)) ++s.initiating;
  std::shared_lock lock(locks_[id.pos()]);
  s.evaluated_configs = cache_[id.pos()].size();
  std::size_t total = 0;
  for (const auto& [cfg, e] : cache_[id.pos()]) {
    total += e->cells.size();
    s.sampled_witnesses += e->sampled_witnesses;
  }
  s.mean_post = s.evaluated_configs ? static_cast<double>(total) / s.evaluated_configs : 0.0;
  return s;
}

}  // namespace habs
