/*
 * cli.cpp
 */
#include "habs/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>

#include "CLI11.hpp"
#include "habs/error.hpp"
#include "habs/io.hpp"
#include "json.hpp"

namespace habs::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunConfig {
  std::string command;
  std::string model_path;
  std::string out_dir;
  std::string plan_path;
  std::string trajectory_path;
  std::optional<int> steps;
  std::vector<std::string> lambda;
  std::vector<std::string> dmax;
  std::optional<double> margin;
  std::optional<double> dt;
  int substeps = 100;
  double integ_tol = 1e-8;
  std::size_t budget = 64;
  std::size_t cap = 1000000;
  std::uint64_t seed = 1;
  std::size_t samples = 2000;
  std::string strategy = "auto";
  bool strict_bounds = false;
};

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Unsatisfiable: return 2;
    case ErrorKind::Infeasible: return 3;
    case ErrorKind::Validation:
    case ErrorKind::Inconsistent: return 4;
    default: return 1;
  }
}

std::pair<int, double> parse_assignment(const std::string& s, const char* flag) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw Error(ErrorKind::Invalid, std::string(flag) + " expects i=value, got " + s);
  try {
    return {std::stoi(s.substr(0, eq)), std::stod(s.substr(eq + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorKind::Invalid, std::string(flag) + " expects i=value, got " + s);
  }
}

AgentId checked_agent(const NetworkModel& model, int id, const char* flag) {
  if (id < 1 || static_cast<std::size_t>(id) > model.size())
    throw Error(ErrorKind::Invalid, std::string(flag) + ": unknown agent " + std::to_string(id));
  return AgentId{id};
}

struct Context {
  std::string model_text;
  NetworkModel model;
  DiscretizationParams params;
  std::unique_ptr<Abstraction> abs;
  TimedReachSpec spec;
  IntegratorSettings integrator;
};

std::unique_ptr<Context> load_model(const RunConfig& cfg) {
  auto ctx = std::make_unique<Context>();
  ctx->model_text = read_file(cfg.model_path);
  ctx->model = parse_model(ctx->model_text);
  ctx->integrator.substeps = cfg.substeps;
  ctx->integrator.integ_tol = cfg.integ_tol;
  return ctx;
}

// Synthesizes the discretization, applies overrides and builds the abstraction.
void build_abstraction(Context& ctx, const RunConfig& cfg) {
  DesignParams design = parse_design(ctx.model_text, ctx.model);
  if (cfg.steps) design.steps = cfg.steps;
  if (cfg.margin) design.margin = *cfg.margin;
  for (const auto& s : cfg.lambda) {
    const auto [id, v] = parse_assignment(s, "--lambda");
    design.lambda[checked_agent(ctx.model, id, "--lambda").pos()] = v;
  }
  DiscretizationParams p = synthesize(ctx.model, design);
  if (cfg.dt) {
    p.dt = *cfg.dt;
    p.steps = static_cast<int>(std::lround(ctx.model.horizon / p.dt));
  }
  for (const auto& s : cfg.dmax) {
    const auto [id, v] = parse_assignment(s, "--dmax");
    p.d_max[checked_agent(ctx.model, id, "--dmax").pos()] = v;
  }
  ctx.params = p;
  ctx.abs = std::make_unique<Abstraction>(ctx.model, p, ctx.integrator);
  ctx.spec = parse_spec(ctx.model_text, ctx.model);
}

std::string out_path(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); }

std::string plan_file(const RunConfig& cfg) { return cfg.plan_path.empty() ? out_path(cfg, "plan.json") : cfg.plan_path; }

std::string trajectory_file(const RunConfig& cfg) {
  return cfg.trajectory_path.empty() ? out_path(cfg, "trajectory.csv") : cfg.trajectory_path;
}

int cmd_abstract(const RunConfig& cfg) {
  auto ctx = load_model(cfg);
  const auto bounds = validate_bounds(ctx->model, cfg.samples, cfg.seed);
  build_abstraction(*ctx, cfg);
  const auto& model = ctx->model;
  const auto& p = ctx->params;
  const auto& abs = *ctx->abs;

  json rep;
  rep["dt"] = p.dt;
  rep["steps"] = p.steps;
  rep["horizon"] = model.horizon;
  rep["tau"] = model.tau;
  rep["margin"] = p.margin;
  rep["cycles"] = json{{"checked", check_cycles(model, p.mu).cycles_checked}};

  // goal-free exploration along the neighbors' least paths
  std::vector<std::vector<CellIndex>> least(model.size());
  const auto order = model.topological_order();
  std::vector<std::vector<std::size_t>> reach_counts(model.size());
  if (order) {
    for (AgentId id : *order) {
      const auto& a = model.agent(id);
      std::vector<std::vector<CellIndex>> nb;
      for (AgentId j : a.neighbors) nb.push_back(least[j.pos()]);
      const auto fwd = forward_reach(abs, id, {}, nb, p.steps);
      for (const auto& layer : fwd.cells) reach_counts[id.pos()].push_back(layer.size());
      try {
        least[id.pos()] = backward_prune(abs, id, {}, nb, fwd).least_path;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Unsatisfiable) throw;
        break;
      }
    }
  }

  json agents = json::array();
  for (const auto& a : model.agents) {
    const auto i = a.id.pos();
    const double mun = mu_norm(model, p.mu, a.id);
    const auto br = dmax_branches(model, p.lambda[i], mun, a.id, p.dt);
    const auto st = abs.stats(a.id);
    const auto& dec = abs.decomposition(a.id);
    const auto& b = bounds.agents[i];
    json ja;
    ja["id"] = a.id.value;
    ja["lambda"] = p.lambda[i];
    ja["mu"] = p.mu[i];
    ja["mu_norm"] = mun;
    ja["M_norm"] = M_norm(model, a.id);
    const double dtb = dt_bound(model, p.lambda[i], a.id);
    ja["dt_bound"] = std::isinf(dtb) ? json("inf") : json(dtb);
    ja["dmax_bound"] = dmax_bound(model, p.lambda[i], mun, a.id, p.dt);
    ja["dmax_branches"] = {br.first, br.second};
    ja["d_max"] = p.d_max[i];
    ja["r"] = reach_radius_r(p.lambda[i], p.dt, a.v_max);
    ja["region_radius"] = dec.region().radius;
    ja["cell_side"] = dec.side();
    ja["cells"] = st.cells;
    ja["initiating_cells"] = st.initiating;
    ja["evaluated_configurations"] = st.evaluated_configs;
    ja["mean_post"] = st.mean_post;
    ja["sampled_witnesses"] = st.sampled_witnesses;
    ja["reachable_cells_per_step"] = reach_counts[i];
    ja["bounds_check"] = {{"sup_f", b.sup_f},
                          {"max_q1", b.max_q1},
                          {"max_q2", b.max_q2},
                          {"worst_ratio", std::isinf(b.worst_ratio) ? json("inf") : json(b.worst_ratio)},
                          {"violations", b.violations}};
    agents.push_back(ja);
  }
  rep["agents"] = agents;
  rep["bounds_ok"] = bounds.ok();
  fs::create_directories(cfg.out_dir);
  write_file(out_path(cfg, "abstraction.json"), rep.dump(2) + "\n");

  if (!bounds.ok()) {
    for (const auto& b : bounds.agents)
      for (const auto& v : b.violations) std::cerr << "warning: agent " << b.id.value << ": " << v << "\n";
    if (cfg.strict_bounds) throw Error(ErrorKind::Infeasible, "declared bounds violated on sampled states (--strict-bounds)");
  }
  std::cout << "abstraction: dt = " << p.dt << ", steps = " << p.steps << ", report " << out_path(cfg, "abstraction.json")
            << "\n";
  return 0;
}

int cmd_plan(const RunConfig& cfg) {
  auto ctx = load_model(cfg);
  build_abstraction(*ctx, cfg);
  PlannerSettings ps;
  ps.budget = cfg.budget;
  ps.state_cap = cfg.cap;
  std::string strategy = cfg.strategy;
  if (strategy == "auto") strategy = ctx->model.topological_order() ? "cascade" : "product";
  Plan plan;
  if (strategy == "cascade")
    plan = cascade_synthesize(*ctx->abs, ctx->spec, ps);
  else if (strategy == "product")
    plan = product_synthesize(*ctx->abs, ctx->spec, ps);
  else
    throw Error(ErrorKind::Invalid, "unknown strategy " + strategy);

  fs::create_directories(cfg.out_dir);
  write_file(plan_file(cfg), plan_to_json(plan, ctx->params, hash_hex(fnv1a(ctx->model_text))));
  json log;
  log["strategy"] = plan.stats.strategy;
  log["steps"] = plan.steps;
  log["paths_explored"] = plan.stats.paths_explored;
  log["backtracks"] = plan.stats.backtracks;
  log["product_states"] = plan.stats.product_states;
  log["runtime_s"] = plan.stats.runtime_s;
  write_file(out_path(cfg, "synthesis_log.json"), log.dump(2) + "\n");
  std::cout << "plan: " << plan.steps << " steps via " << plan.stats.strategy << ", written to " << plan_file(cfg)
            << "\n";
  return 0;
}

// Abstraction rebuilt from the discretization recorded in a plan file.
struct LoadedPlan {
  std::unique_ptr<Context> ctx;
  PlanFile file;
};

LoadedPlan load_plan(const RunConfig& cfg) {
  LoadedPlan lp;
  lp.ctx = load_model(cfg);
  lp.file = parse_plan(read_file(plan_file(cfg)), lp.ctx->model);
  if (lp.file.model_hash != hash_hex(fnv1a(lp.ctx->model_text)))
    throw Error(ErrorKind::Invalid, "plan was made for a different model file (hash mismatch)");
  lp.ctx->params = lp.file.params;
  lp.ctx->abs = std::make_unique<Abstraction>(lp.ctx->model, lp.file.params, lp.ctx->integrator);
  lp.ctx->spec = parse_spec(lp.ctx->model_text, lp.ctx->model);
  return lp;
}

int cmd_validate(const RunConfig& cfg) {
  auto lp = load_plan(cfg);
  const auto& abs = *lp.ctx->abs;
  fs::create_directories(cfg.out_dir);
  json rep;
  ControlSchedule schedule;
  try {
    schedule = extract_controls(lp.file.plan, abs);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Inconsistent) throw;
    rep["ok"] = false;
    rep["failures"] = {e.what()};
    write_file(out_path(cfg, "validation.json"), rep.dump(2) + "\n");
    throw;
  }
  SimulationDiagnostics diag;
  const auto traj = simulate_closed_loop(lp.ctx->model, schedule, lp.ctx->integrator, &diag);
  const auto v = validate_plan(abs, lp.file.plan, traj);
  write_file(trajectory_file(cfg), trajectory_to_csv(traj));

  rep["ok"] = v.ok();
  rep["mismatches"] = v.mismatches;
  rep["snapped"] = v.snapped;
  rep["tube_violations"] = v.tube_violations;
  rep["input_violations"] = v.input_violations;
  rep["min_margin"] = v.min_margin;
  rep["max_endpoint_deviation"] = diag.max_endpoint_deviation;
  rep["max_input_ratio"] = diag.max_input_ratio;
  rep["audit_error"] = diag.audit_error;
  rep["failures"] = v.failures;
  json steps = json::array();
  for (const auto& e : v.entries) {
    json je;
    je["step"] = e.step;
    je["agent"] = e.agent.value;
    je["planned"] = e.planned.lattice;
    je["located"] = e.located ? json(e.located->lattice) : json(nullptr);
    je["margin"] = e.margin;
    je["snapped"] = e.snapped;
    je["ok"] = e.ok;
    steps.push_back(je);
  }
  rep["entries"] = steps;
  write_file(out_path(cfg, "validation.json"), rep.dump(2) + "\n");
  if (!v.ok()) {
    for (const auto& f : v.failures) std::cerr << f << "\n";
    throw Error(ErrorKind::Validation, std::to_string(v.mismatches) + " membership failures");
  }
  std::cout << "validation passed: min margin " << v.min_margin << "\n";
  return 0;
}

int cmd_render(const RunConfig& cfg) {
  std::unique_ptr<Context> ctx;
  std::optional<Plan> plan;
  std::optional<Trajectory> traj;
  if (fs::exists(plan_file(cfg))) {
    auto lp = load_plan(cfg);
    ctx = std::move(lp.ctx);
    plan = std::move(lp.file.plan);
  } else {
    ctx = load_model(cfg);
    build_abstraction(*ctx, cfg);
  }
  if (fs::exists(trajectory_file(cfg))) traj = parse_trajectory_csv(read_file(trajectory_file(cfg)), ctx->model);
  RenderInput in;
  in.abs = ctx->abs.get();
  in.spec = &ctx->spec;
  in.plan = plan ? &*plan : nullptr;
  in.traj = traj ? &*traj : nullptr;
  const std::string svg = render_svg(in);
  fs::create_directories(cfg.out_dir);
  write_file(out_path(cfg, "figure.svg"), svg);
  std::cout << "figure written to " << out_path(cfg, "figure.svg") << "\n";
  return 0;
}

int cmd_chain(const RunConfig& cfg) {
  auto ctx = load_model(cfg);
  const std::string path = trajectory_file(cfg);
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "missing trajectory " + path + "; run validate first");
  const auto traj = parse_trajectory_csv(read_file(path), ctx->model);
  fs::create_directories(cfg.out_dir);
  write_file(out_path(cfg, "next_model.json"), chain_model(ctx->model_text, traj.states.back()));
  std::cout << "next-horizon model written to " << out_path(cfg, "next_model.json") << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Finite-horizon abstractions and plans for coupled multi-agent systems", "horizon-abs"};
  RunConfig cfg;
  app.add_option("command", cfg.command, "abstract | plan | validate | render | chain")
      ->required()
      ->check(CLI::IsMember({"abstract", "plan", "validate", "render", "chain"}));
  app.add_option("--model", cfg.model_path, "model file")->required();
  app.add_option("--out", cfg.out_dir, "output directory")->required();
  app.add_option("--plan", cfg.plan_path, "plan file (default OUT/plan.json)");
  app.add_option("--trajectory", cfg.trajectory_path, "trajectory CSV (default OUT/trajectory.csv)");
  app.add_option("--steps", cfg.steps, "number of steps l");
  app.add_option("--lambda", cfg.lambda, "per-agent lambda, i=value")->take_all();
  app.add_option("--dmax", cfg.dmax, "per-agent d_max, i=value")->take_all();
  app.add_option("--margin", cfg.margin, "fraction of the d_max bound");
  app.add_option("--dt", cfg.dt, "time step");
  app.add_option("--substeps", cfg.substeps, "RK4 steps per dt")->check(CLI::PositiveNumber);
  app.add_option("--integ-tol", cfg.integ_tol, "integrator tolerance")->check(CLI::PositiveNumber);
  app.add_option("--budget", cfg.budget, "cascade backtracking budget");
  app.add_option("--cap", cfg.cap, "product search state cap");
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--samples", cfg.samples, "bounds validation samples");
  app.add_option("--strategy", cfg.strategy, "auto | cascade | product")
      ->check(CLI::IsMember({"auto", "cascade", "product"}));
  app.add_flag("--strict-bounds", cfg.strict_bounds, "fail when sampled states violate declared bounds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (cfg.command == "abstract") return cmd_abstract(cfg);
    if (cfg.command == "plan") return cmd_plan(cfg);
    if (cfg.command == "validate") return cmd_validate(cfg);
    if (cfg.command == "render") return cmd_render(cfg);
    return cmd_chain(cfg);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace habs::cli
