/*
 * planner.cpp
 */
#include "habs/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "habs/detail/parallel.hpp"
#include "habs/error.hpp"
#include "json.hpp"

namespace habs {

using nlohmann::json;

namespace {

constexpr double kWindowTol = 1e-9;
constexpr std::size_t kMaxRecomputations = 20000;

std::string agent_name(AgentId i) { return "agent " + std::to_string(i.value); }

int goal_count(const std::vector<CompiledGoal>& goals) { return static_cast<int>(goals.size()); }

// `last` is only tracked while the next goal is relative.
int canonical_last(const std::vector<CompiledGoal>& goals, int met, int step) {
  return (met < goal_count(goals) && goals[met].relative) ? step : -1;
}

bool in_window(const CompiledGoal& g, int step, int last) {
  const int t = g.relative ? step - last : step;
  return t >= g.window.lo && t <= g.window.hi;
}

bool expired(const std::vector<CompiledGoal>& goals, int met, int step, int last) {
  if (met >= goal_count(goals)) return false;
  const auto& g = goals[met];
  return g.relative ? step - last > g.window.hi : step > g.window.hi;
}

bool can_advance(const std::vector<CompiledGoal>& goals, const PlanNode& n, int step) {
  return n.met < goal_count(goals) && in_window(goals[n.met], step, n.last) && goals[n.met].contains(n.cell);
}

PlanNode advanced(const std::vector<CompiledGoal>& goals, const PlanNode& n, int step) {
  return PlanNode{n.cell, n.met + 1, canonical_last(goals, n.met + 1, step)};
}

// Node plus every same-step goal advance, dropping expired nodes.
template <class Out>
void closure(const std::vector<CompiledGoal>& goals, PlanNode n, int step, Out&& out) {
  for (;;) {
    if (expired(goals, n.met, step, n.last)) return;
    out(n);
    if (!can_advance(goals, n, step)) return;
    n = advanced(goals, n, step);
  }
}

template <class T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

template <class T>
bool sorted_contains(const std::vector<T>& v, const T& x) {
  return std::binary_search(v.begin(), v.end(), x);
}

CellConfiguration config_at(const CellIndex& own, const std::vector<std::vector<CellIndex>>& neighbor_paths,
                            int step) {
  CellConfiguration c;
  c.entries.push_back(own);
  for (const auto& p : neighbor_paths) c.entries.push_back(p.at(static_cast<std::size_t>(step)));
  return c;
}

std::vector<CellIndex> project(const std::vector<PlanNode>& nodes) {
  std::vector<CellIndex> out;
  for (const auto& n : nodes) out.push_back(n.cell);
  sort_unique(out);
  return out;
}

// Post sets of the distinct cells of a node set at one step, evaluated in parallel.
// Non-initiating configurations map to nullptr.
std::map<CellIndex, std::shared_ptr<const PostEntry>> posts_at(
    const Abstraction& abs, AgentId id, const std::vector<CellIndex>& cells,
    const std::vector<std::vector<CellIndex>>& neighbor_paths, int step) {
  std::vector<std::shared_ptr<const PostEntry>> res(cells.size());
  detail::parallel_for(cells.size(), [&](std::size_t k) {
    const auto cfg = config_at(cells[k], neighbor_paths, step);
    if (abs.initiating(id, cfg)) res[k] = abs.post(id, cfg);
  });
  std::map<CellIndex, std::shared_ptr<const PostEntry>> out;
  for (std::size_t k = 0; k < cells.size(); ++k) out.emplace(cells[k], res[k]);
  return out;
}

// Alive nodes at step + 1 reachable from `from` through successor cell `next`, with closure.
std::vector<PlanNode> step_into(const std::vector<CompiledGoal>& goals, const std::vector<PlanNode>& from,
                                const CellIndex& next, const std::vector<PlanNode>& alive_next, int step_next) {
  std::vector<PlanNode> out;
  for (const auto& n : from) {
    PlanNode m{next, n.met, n.last};
    closure(goals, m, step_next, [&](const PlanNode& x) {
      if (sorted_contains(alive_next, x)) out.push_back(x);
    });
  }
  sort_unique(out);
  return out;
}

// Successor cells of a node set, each with the alive nodes they lead to, in lexicographic order.
std::map<CellIndex, std::vector<PlanNode>> expand(const std::vector<CompiledGoal>& goals,
                                                  const std::vector<PlanNode>& from,
                                                  const std::shared_ptr<const PostEntry>& post,
                                                  const std::vector<PlanNode>& alive_next, int step_next) {
  std::map<CellIndex, std::vector<PlanNode>> out;
  if (!post) return out;
  for (const auto& c : post->cells) {
    auto nodes = step_into(goals, from, c, alive_next, step_next);
    if (!nodes.empty()) out.emplace(c, std::move(nodes));
  }
  return out;
}

Box parse_box(const json& j, int dim, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorKind::Invalid, where + ": box must be [[lo...], [hi...]]");
  Box b{Vec(dim), Vec(dim)};
  for (int s = 0; s < 2; ++s) {
    const auto& v = j[static_cast<std::size_t>(s)];
    if (!v.is_array() || static_cast<int>(v.size()) != dim)
      throw Error(ErrorKind::Invalid, where + ": box corner has the wrong dimension");
    for (int k = 0; k < dim; ++k) (s == 0 ? b.lo : b.hi)[k] = v[static_cast<std::size_t>(k)].get<double>();
  }
  for (int k = 0; k < dim; ++k)
    if (b.lo[k] > b.hi[k]) throw Error(ErrorKind::Invalid, where + ": box lo exceeds hi");
  return b;
}

}  // namespace

TimedReachSpec parse_spec(std::string_view document, const NetworkModel& model) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("spec syntax error: ") + e.what());
  }
  TimedReachSpec spec;
  spec.goals.resize(model.size());
  if (!doc.contains("spec")) return spec;
  const auto& js = doc.at("spec");
  if (!js.is_array()) throw Error(ErrorKind::Invalid, "spec must be an array");
  for (const auto& entry : js) {
    const int id = entry.at("agent").get<int>();
    if (id < 1 || static_cast<std::size_t>(id) > model.size())
      throw Error(ErrorKind::Invalid, "spec: unknown agent " + std::to_string(id));
    const std::string where = "spec for agent " + std::to_string(id);
    for (const auto& jg : entry.at("goals")) {
      Goal g;
      g.box = parse_box(jg.at("box"), model.dim, where);
      const auto& w = jg.at("window");
      if (!w.is_array() || w.size() != 2) throw Error(ErrorKind::Invalid, where + ": window must be [a, b]");
      g.a = w[0].get<double>();
      g.b = w[1].get<double>();
      if (!(g.a >= 0.0 && g.a <= g.b)) throw Error(ErrorKind::Invalid, where + ": window needs 0 <= a <= b");
      if (jg.contains("relative")) g.relative = jg.at("relative").get<bool>();
      spec.goals[static_cast<std::size_t>(id - 1)].push_back(g);
    }
  }
  return spec;
}

StepRange window_to_steps(double a, double b, double dt) {
  if (!(a >= 0.0 && a <= b)) throw Error(ErrorKind::Invalid, "window needs 0 <= a <= b");
  if (!(dt > 0.0)) throw Error(ErrorKind::Invalid, "dt must be positive");
  StepRange r;
  r.lo = static_cast<int>(std::ceil(a / dt - kWindowTol));
  r.hi = static_cast<int>(std::floor(b / dt + kWindowTol));
  if (r.lo > r.hi)
    throw Error(ErrorKind::Unsatisfiable,
                "window [" + std::to_string(a) + ", " + std::to_string(b) + "] contains no multiple of dt");
  return r;
}

std::vector<CellIndex> label_cells(const CellDecomposition& dec, const Box& region) {
  return dec.cells_inside_box(region);
}

bool CompiledGoal::contains(const CellIndex& l) const { return sorted_contains(cells, l); }

std::vector<CompiledGoal> compile_goals(const std::vector<Goal>& goals, const CellDecomposition& dec, double dt) {
  std::vector<CompiledGoal> out;
  for (const auto& g : goals) {
    CompiledGoal c;
    c.window = window_to_steps(g.a, g.b, dt);
    c.relative = g.relative;
    c.cells = label_cells(dec, g.box);
    sort_unique(c.cells);
    out.push_back(std::move(c));
  }
  return out;
}

int cumulative_deadline(const std::vector<CompiledGoal>& goals) {
  int t = 0, worst = 0;
  for (const auto& g : goals) {
    t = g.relative ? t + g.window.hi : g.window.hi;
    worst = std::max(worst, t);
  }
  return worst;
}

ForwardSets forward_reach(const Abstraction& abs, AgentId id, const std::vector<CompiledGoal>& goals,
                          const std::vector<std::vector<CellIndex>>& neighbor_paths, int m) {
  const auto& dec = abs.decomposition(id);
  ForwardSets f;
  f.nodes.resize(static_cast<std::size_t>(m) + 1);
  const CellIndex start = dec.locate(abs.model().agent(id).x0);
  closure(goals, PlanNode{start, 0, canonical_last(goals, 0, 0)}, 0,
          [&](const PlanNode& n) { f.nodes[0].push_back(n); });
  sort_unique(f.nodes[0]);

  for (int k = 0; k < m; ++k) {
    const auto& cur = f.nodes[static_cast<std::size_t>(k)];
    const auto posts = posts_at(abs, id, project(cur), neighbor_paths, k);
    auto& next = f.nodes[static_cast<std::size_t>(k) + 1];
    for (const auto& n : cur) {
      const auto& p = posts.at(n.cell);
      if (!p) continue;
      for (const auto& c : p->cells)
        closure(goals, PlanNode{c, n.met, n.last}, k + 1, [&](const PlanNode& x) { next.push_back(x); });
    }
    sort_unique(next);
  }
  for (const auto& layer : f.nodes) f.cells.push_back(project(layer));
  return f;
}

PrunedSets backward_prune(const Abstraction& abs, AgentId id, const std::vector<CompiledGoal>& goals,
                          const std::vector<std::vector<CellIndex>>& neighbor_paths, const ForwardSets& fwd) {
  const int m = static_cast<int>(fwd.nodes.size()) - 1;
  const int G = goal_count(goals);
  PrunedSets p;
  p.nodes.resize(fwd.nodes.size());

  for (int k = m; k >= 0; --k) {
    auto layer = fwd.nodes[static_cast<std::size_t>(k)];
    // higher goal counts first so same-step advances are decided before their sources
    std::sort(layer.begin(), layer.end(), [](const PlanNode& a, const PlanNode& b) {
      return a.met != b.met ? a.met > b.met : a < b;
    });
    std::map<CellIndex, std::shared_ptr<const PostEntry>> posts;
    if (k < m) posts = posts_at(abs, id, fwd.cells[static_cast<std::size_t>(k)], neighbor_paths, k);
    std::set<PlanNode> alive;
    for (const auto& n : layer) {
      bool ok = k == m && n.met == G;
      if (!ok && can_advance(goals, n, k) && alive.count(advanced(goals, n, k))) ok = true;
      if (!ok && k < m) {
        const auto& alive_next = p.nodes[static_cast<std::size_t>(k) + 1];
        if (const auto& post = posts.at(n.cell))
          for (const auto& c : post->cells)
            if (sorted_contains(alive_next, PlanNode{c, n.met, n.last})) {
              ok = true;
              break;
            }
      }
      if (ok) alive.insert(n);
    }
    p.nodes[static_cast<std::size_t>(k)].assign(alive.begin(), alive.end());
  }

  if (p.nodes[0].empty()) {
    int best = 0;
    for (const auto& layer : fwd.nodes)
      for (const auto& n : layer) best = std::max(best, n.met);
    if (best < G)
      throw Error(ErrorKind::Unsatisfiable,
                  agent_name(id) + ": goal " + std::to_string(best + 1) + " cannot be met within " +
                      std::to_string(m) + " steps");
    throw Error(ErrorKind::Unsatisfiable,
                agent_name(id) + ": no path of " + std::to_string(m) + " steps meets all goals");
  }
  for (const auto& layer : p.nodes) p.cells.push_back(project(layer));

  // greedy lexicographic extraction
  std::vector<PlanNode> cur = p.nodes[0];
  p.least_path.push_back(cur.front().cell);
  for (int k = 0; k < m; ++k) {
    const auto cfg = config_at(cur.front().cell, neighbor_paths, k);
    const auto post = abs.post(id, cfg);
    auto options = expand(goals, cur, post, p.nodes[static_cast<std::size_t>(k) + 1], k + 1);
    if (options.empty()) throw Error(ErrorKind::Unsatisfiable, agent_name(id) + ": pruned sets are inconsistent");
    auto first = options.begin();
    p.least_path.push_back(first->first);
    cur = std::move(first->second);
  }
  return p;
}

std::vector<std::vector<CellIndex>> satisfying_paths(const Abstraction& abs, AgentId id,
                                                     const std::vector<CompiledGoal>& goals,
                                                     const std::vector<std::vector<CellIndex>>& neighbor_paths,
                                                     const PrunedSets& pruned, std::size_t limit) {
  std::vector<std::vector<CellIndex>> out;
  if (pruned.nodes.empty() || pruned.nodes[0].empty() || limit == 0) return out;
  const int m = static_cast<int>(pruned.nodes.size()) - 1;
  std::vector<CellIndex> path{pruned.nodes[0].front().cell};
  std::function<void(const std::vector<PlanNode>&, int)> rec = [&](const std::vector<PlanNode>& cur, int k) {
    if (out.size() >= limit) return;
    if (k == m) {
      out.push_back(path);
      return;
    }
    const auto post = abs.post(id, config_at(cur.front().cell, neighbor_paths, k));
    const auto options = expand(goals, cur, post, pruned.nodes[static_cast<std::size_t>(k) + 1], k + 1);
    for (const auto& [cell, nodes] : options) {
      path.push_back(cell);
      rec(nodes, k + 1);
      path.pop_back();
      if (out.size() >= limit) return;
    }
  };
  rec(pruned.nodes[0], 0);
  return out;
}

std::optional<std::vector<int>> goal_steps(const std::vector<CellIndex>& path,
                                           const std::vector<CompiledGoal>& goals) {
  const int G = goal_count(goals);
  const int last_step = static_cast<int>(path.size()) - 1;
  std::vector<int> steps;
  std::function<bool(int, int, int)> rec = [&](int k, int met, int last) {
    if (met < G) {
      const auto& g = goals[met];
      if (g.relative ? k - last > g.window.hi : k > g.window.hi) return false;
      if (in_window(g, k, last) && g.contains(path[static_cast<std::size_t>(k)])) {
        steps.push_back(k);
        if (rec(k, met + 1, k)) return true;
        steps.pop_back();
      }
    }
    if (k == last_step) return met == G;
    return rec(k + 1, met, last);
  };
  if (path.empty()) return std::nullopt;
  if (rec(0, 0, 0)) return steps;
  return std::nullopt;
}

int plan_horizon(const Abstraction& abs, const std::vector<std::vector<CompiledGoal>>& goals) {
  int worst = 0;
  for (const auto& g : goals) worst = std::max(worst, cumulative_deadline(g));
  return std::min(abs.steps(), worst);
}

namespace {

std::vector<std::vector<CompiledGoal>> compile_all(const Abstraction& abs, const TimedReachSpec& spec) {
  if (spec.goals.size() != abs.model().size()) throw Error(ErrorKind::Invalid, "spec does not match the model");
  std::vector<std::vector<CompiledGoal>> out;
  for (const auto& a : abs.model().agents)
    out.push_back(compile_goals(spec.goals[a.id.pos()], abs.decomposition(a.id), abs.dt()));
  return out;
}

Plan make_plan(const Abstraction& abs, const std::vector<std::vector<CellIndex>>& paths,
               const std::vector<std::vector<CompiledGoal>>& goals, int m) {
  Plan plan;
  plan.steps = m;
  plan.dt = abs.dt();
  for (const auto& a : abs.model().agents) {
    AgentPlan ap;
    ap.agent = a.id;
    ap.cells = paths[a.id.pos()];
    if (auto gs = goal_steps(ap.cells, goals[a.id.pos()])) ap.goal_steps = *gs;
    plan.agents.push_back(std::move(ap));
  }
  fill_controls(abs, plan);
  return plan;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Plan cascade_synthesize(const Abstraction& abs, const TimedReachSpec& spec, const PlannerSettings& settings) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& model = abs.model();
  const auto order = model.topological_order();
  if (!order) throw Error(ErrorKind::Invalid, "cascade synthesis needs an acyclic coupling graph; use the product strategy");
  const auto goals = compile_all(abs, spec);
  const int m = plan_horizon(abs, goals);
  const std::size_t N = order->size();

  std::vector<std::size_t> rank(N);
  for (std::size_t k = 0; k < N; ++k) rank[(*order)[k].pos()] = k;

  std::vector<std::vector<std::vector<CellIndex>>> candidates(N);
  std::vector<std::size_t> choice(N, 0);
  std::vector<bool> computed(N, false);
  std::vector<std::set<std::size_t>> conflict(N);
  std::vector<std::vector<CellIndex>> chosen(N);
  std::string last_failure;
  SynthesisStats stats;
  stats.strategy = "cascade";
  std::size_t recomputations = 0;

  std::size_t k = 0;
  while (k < N) {
    const AgentId id = (*order)[k];
    const auto& agent = model.agent(id);
    if (!computed[k]) {
      if (++recomputations > kMaxRecomputations)
        throw Error(ErrorKind::Unsatisfiable, "cascade: backtracking budget exhausted (" + last_failure + ")");
      std::vector<std::vector<CellIndex>> nb;
      for (AgentId j : agent.neighbors) nb.push_back(chosen[j.pos()]);
      candidates[k].clear();
      try {
        const auto fwd = forward_reach(abs, id, goals[id.pos()], nb, m);
        const auto pruned = backward_prune(abs, id, goals[id.pos()], nb, fwd);
        candidates[k] = satisfying_paths(abs, id, goals[id.pos()], nb, pruned, settings.budget);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Unsatisfiable) throw;
        last_failure = e.what();
      }
      stats.paths_explored += candidates[k].size();
      choice[k] = 0;
      computed[k] = true;
    }
    if (choice[k] < candidates[k].size()) {
      chosen[id.pos()] = candidates[k][choice[k]];
      ++k;
      continue;
    }
    // backjump to the latest agent this failure depends on
    std::set<std::size_t> J = conflict[k];
    for (AgentId j : agent.neighbors) J.insert(rank[j.pos()]);
    if (J.empty())
      throw Error(ErrorKind::Unsatisfiable,
                  last_failure.empty() ? agent_name(id) + ": no satisfying path" : last_failure);
    const std::size_t h = *J.rbegin();
    J.erase(h);
    conflict[h].insert(J.begin(), J.end());
    for (std::size_t q = h + 1; q <= k; ++q) {
      computed[q] = false;
      conflict[q].clear();
    }
    ++choice[h];
    ++stats.backtracks;
    if (choice[h] >= settings.budget && choice[h] >= candidates[h].size())
      last_failure = "budget of " + std::to_string(settings.budget) + " paths exhausted for " +
                     agent_name((*order)[h]) + " (" + last_failure + ")";
    k = h;
  }

  Plan plan = make_plan(abs, chosen, goals, m);
  stats.runtime_s = seconds_since(t0);
  plan.stats = stats;
  return plan;
}

namespace {

struct ProductNode {
  ProductState cells;
  std::vector<int> met;
  std::vector<int> last;
  bool operator==(const ProductNode&) const = default;
};

struct ProductNodeHash {
  std::size_t operator()(const ProductNode& n) const noexcept {
    std::size_t h = 0;
    auto mix = [&](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
    for (const auto& c : n.cells) mix(CellIndexHash{}(c));
    for (int v : n.met) mix(static_cast<std::size_t>(v));
    for (int v : n.last) mix(static_cast<std::size_t>(v + 1));
    return h;
  }
};

}  // namespace

Plan product_synthesize(const Abstraction& abs, const TimedReachSpec& spec, const PlannerSettings& settings) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& model = abs.model();
  const auto goals = compile_all(abs, spec);
  const std::size_t N = model.size();

  auto done = [&](const ProductNode& n) {
    for (std::size_t i = 0; i < N; ++i)
      if (n.met[i] < goal_count(goals[i])) return false;
    return true;
  };

  std::vector<std::vector<ProductNode>> layers(1);
  std::vector<std::vector<std::size_t>> parents(1);
  std::size_t total = 0;

  // every combination of per-agent closure options of `base` at `step`
  auto emit = [&](const ProductState& cells, const std::vector<int>& met, const std::vector<int>& last, int step,
                  std::size_t parent, std::unordered_map<ProductNode, std::size_t, ProductNodeHash>& seen,
                  std::vector<ProductNode>& out, std::vector<std::size_t>& out_parent) {
    std::vector<std::vector<PlanNode>> opts(N);
    for (std::size_t i = 0; i < N; ++i) {
      closure(goals[i], PlanNode{cells[i], met[i], last[i]}, step, [&](const PlanNode& x) { opts[i].push_back(x); });
      if (opts[i].empty()) return;
    }
    ProductNode node{cells, met, last};
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
      if (i == N) {
        if (seen.emplace(node, out.size()).second) {
          if (++total > settings.state_cap)
            throw Error(ErrorKind::Unsatisfiable,
                        "product search exceeded the state cap of " + std::to_string(settings.state_cap));
          out.push_back(node);
          out_parent.push_back(parent);
        }
        return;
      }
      for (const auto& o : opts[i]) {
        node.met[i] = o.met;
        node.last[i] = o.last;
        rec(i + 1);
      }
    };
    rec(0);
  };

  {
    std::unordered_map<ProductNode, std::size_t, ProductNodeHash> seen;
    const ProductState start = abs.initial_state();
    std::vector<int> met(N, 0), last(N);
    for (std::size_t i = 0; i < N; ++i) last[i] = canonical_last(goals[i], 0, 0);
    emit(start, met, last, 0, 0, seen, layers[0], parents[0]);
  }

  const int horizon = abs.steps();
  for (int k = 0;; ++k) {
    const auto& layer = layers[static_cast<std::size_t>(k)];
    if (layer.empty()) throw Error(ErrorKind::Unsatisfiable, "product search: no satisfying plan");
    for (std::size_t idx = 0; idx < layer.size(); ++idx) {
      if (!done(layer[idx])) continue;
      // reconstruct
      std::vector<std::vector<CellIndex>> paths(N);
      std::size_t cur = idx;
      for (int s = k; s >= 0; --s) {
        const auto& node = layers[static_cast<std::size_t>(s)][cur];
        for (std::size_t i = 0; i < N; ++i) paths[i].push_back(node.cells[i]);
        cur = parents[static_cast<std::size_t>(s)][cur];
      }
      for (auto& p : paths) std::reverse(p.begin(), p.end());
      Plan plan = make_plan(abs, paths, goals, k);
      plan.stats.strategy = "product";
      plan.stats.product_states = total;
      plan.stats.runtime_s = seconds_since(t0);
      return plan;
    }
    if (k == horizon) throw Error(ErrorKind::Unsatisfiable, "product search: no satisfying plan within the horizon");

    layers.emplace_back();
    parents.emplace_back();
    std::unordered_map<ProductNode, std::size_t, ProductNodeHash> seen;
    for (std::size_t idx = 0; idx < layers[static_cast<std::size_t>(k)].size(); ++idx) {
      const ProductNode node = layers[static_cast<std::size_t>(k)][idx];
      bool live = true;
      for (const auto& a : model.agents)
        if (!abs.initiating(a.id, pr(node.cells, a))) live = false;
      if (!live) continue;
      const auto factors = abs.product_post_factors(node.cells);
      ProductState next(N);
      std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == N) {
          emit(next, node.met, node.last, k + 1, idx, seen, layers.back(), parents.back());
          return;
        }
        for (const auto& c : factors[i]->cells) {
          next[i] = c;
          rec(i + 1);
        }
      };
      rec(0);
    }
  }
}

void fill_controls(const Abstraction& abs, Plan& plan) {
  const auto& model = abs.model();
  if (plan.agents.size() != model.size()) throw Error(ErrorKind::Inconsistent, "plan does not cover every agent");
  const ProductState start = abs.initial_state();
  for (const auto& ap : plan.agents) {
    if (static_cast<int>(ap.cells.size()) != plan.steps + 1)
      throw Error(ErrorKind::Inconsistent, agent_name(ap.agent) + ": path length does not match the step count");
    for (std::size_t k = 0; k < ap.cells.size(); ++k)
      if (!abs.decomposition(ap.agent).valid(ap.cells[k]))
        throw Error(ErrorKind::Inconsistent, agent_name(ap.agent) + " step " + std::to_string(k) + ": invalid cell");
    if (ap.cells[0] != start[ap.agent.pos()])
      throw Error(ErrorKind::Inconsistent, agent_name(ap.agent) + " step 0: cell does not contain X0");
  }
  const std::size_t N = model.size();
  const std::size_t m = static_cast<std::size_t>(plan.steps);
  for (auto& ap : plan.agents) ap.steps.assign(m, PlanStep{});
  std::vector<std::string> failures(N * m);
  detail::parallel_for(N * m, [&](std::size_t job) {
    const std::size_t i = job / m, k = job % m;
    const auto& agent = model.agents[i];
    ProductState cells(N);
    for (std::size_t q = 0; q < N; ++q) cells[q] = plan.agents[q].cells[k];
    const auto cfg = pr(cells, agent);
    const std::string where = agent_name(agent.id) + " step " + std::to_string(k) + ": ";
    if (!abs.initiating(agent.id, cfg)) {
      failures[job] = where + "configuration is not initiating";
      return;
    }
    try {
      const auto act = abs.successor_action(agent.id, cfg, plan.agents[i].cells[k + 1]);
      auto& st = plan.agents[i].steps[k];
      st.w = act.w;
      st.target_point = act.target_point;
      st.chi_end = abs.post(agent.id, cfg)->chi_end;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Inconsistent) throw;
      failures[job] = where + e.what();
    }
  });
  for (const auto& f : failures)
    if (!f.empty()) throw Error(ErrorKind::Inconsistent, f);
}

ControlSchedule extract_controls(const Plan& plan, const Abstraction& abs) {
  Plan copy = plan;
  fill_controls(abs, copy);
  const auto& model = abs.model();
  const std::size_t N = model.size();
  const std::size_t m = static_cast<std::size_t>(plan.steps);
  ControlSchedule s;
  s.dt = abs.dt();
  s.steps = plan.steps;
  s.controls.assign(N, std::vector<ScheduledControl>(m));
  detail::parallel_for(N * m, [&](std::size_t job) {
    const std::size_t i = job / m, k = job % m;
    const auto& agent = model.agents[i];
    ProductState cells(N);
    for (std::size_t q = 0; q < N; ++q) cells[q] = copy.agents[q].cells[k];
    auto& c = s.controls[i][k];
    c.reference = std::make_shared<ReferenceTrajectory>(abs.reference(agent.id, pr(cells, agent)));
    c.lambda = abs.params().lambda[i];
    c.target_point = copy.agents[i].steps[k].target_point;
    if (c.lambda > 0.0)
      c.w = select_w(*c.reference, c.target_point, c.lambda, agent.v_max);
    else
      c.w = Vec::Zero(agent.dim);
    const Ball ball{c.reference->endpoint(), reach_radius_r(c.lambda, abs.dt(), agent.v_max)};
    if (!ball.contains(c.target_point, 1e-12 * std::max(1.0, ball.radius)) ||
        !abs.decomposition(agent.id).contains(copy.agents[i].cells[k + 1], c.target_point))
      throw Error(ErrorKind::Inconsistent,
                  agent_name(agent.id) + " step " + std::to_string(k) + ": target point fails the geometric re-check");
  });
  return s;
}

}  // namespace habs
