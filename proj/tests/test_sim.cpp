#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "habs/abstraction.hpp"
#include "habs/error.hpp"
#include "habs/planner.hpp"
#include "habs/sim.hpp"

using namespace habs;
using fixtures::json;

namespace {

Box box(double x0, double y0, double x1, double y1) {
  Box b{Vec(2), Vec(2)};
  b.lo << x0, y0;
  b.hi << x1, y1;
  return b;
}

json hill_agent(int id, std::vector<double> x0) {
  return fixtures::agent_json(
      id, {}, {{"type", "gradient-hill"}, {"C", 0.4}, {"R", 3.141592653589793}, {"center", {0.3, -0.2}}}, 1.0, 1.0,
      0.0, 0.4, x0, 0.5);
}

json goal_for(int agent, const Box& b, double lo, double hi) {
  return {{"agent", agent}, {"goals", json::array({fixtures::goal_json(b, lo, hi)})}};
}

struct Run {
  fixtures::Loaded l;
  std::unique_ptr<Abstraction> abs;
  Plan plan;
  ControlSchedule sched;
  Trajectory traj;
  SimulationDiagnostics diag;
};

std::unique_ptr<Run> run(const json& doc) {
  auto r = std::make_unique<Run>();
  const auto text = doc.dump();
  r->l = fixtures::load(text);
  r->abs = std::make_unique<Abstraction>(r->l.model, r->l.params);
  r->plan = cascade_synthesize(*r->abs, parse_spec(text, r->l.model));
  fill_controls(*r->abs, r->plan);
  r->sched = extract_controls(r->plan, *r->abs);
  r->traj = simulate_closed_loop(r->l.model, r->sched, r->abs->settings(), &r->diag);
  return r;
}

}  // namespace

TEST_CASE("zero dynamics reach the target points") {
  json agents = json::array({fixtures::agent_json(1, {}, {{"type", "zero"}}, 1.0, 0.0, 0, 0, {0, 0}, 0.5)});
  json spec = json::array({goal_for(1, box(0.1, 0.0, 0.5, 0.4), 0.5, 0.75)});
  const auto r = run(fixtures::model_json(1.0, 4, agents, spec));
  CHECK(r->diag.max_endpoint_deviation < 1e-10);
  for (int k = 0; k < r->plan.steps; ++k)
    CHECK((r->traj.at_step(k + 1)[0] - r->plan.agents[0].steps[k].target_point).norm() < 1e-10);
  CHECK(r->traj.samples_per_step == r->abs->settings().substeps);
  CHECK(r->traj.times.back() == doctest::Approx(r->plan.steps * r->abs->dt()));
  const auto rep = validate_plan(*r->abs, r->plan, r->traj);
  CHECK(rep.ok());
  CHECK(rep.min_margin > 0.0);
  CHECK(rep.tube_violations == 0);
  CHECK(rep.input_violations == 0);
  CHECK(r->diag.audit_error <= 1e-8);
  CHECK(r->diag.max_input_ratio <= 1.0);
}

TEST_CASE("uncoupled agents evolve independently") {
  json both = json::array({hill_agent(1, {0, 0}), hill_agent(2, {0.6, 0.3})});
  json spec = json::array({goal_for(1, box(0.1, 0.0, 0.5, 0.4), 0.5, 0.75), goal_for(2, box(0.2, 0.2, 0.6, 0.6), 0.5, 0.75)});
  const auto pair = run(fixtures::model_json(1.0, 4, both, spec));
  CHECK(validate_plan(*pair->abs, pair->plan, pair->traj).ok());

  const auto solo_model = parse_model(fixtures::model_json(1.0, 4, json::array({hill_agent(1, {0, 0})})).dump());
  ControlSchedule solo{pair->sched.dt, pair->sched.steps, {pair->sched.controls[0]}};
  const auto t1 = simulate_closed_loop(solo_model, solo, pair->abs->settings());
  REQUIRE(t1.size() == pair->traj.size());
  for (std::size_t s = 0; s < t1.size(); ++s) CHECK((t1.states[s][0] - pair->traj.states[s][0]).norm() <= 1e-10);
}

TEST_CASE("coupled pair validates and tampering is caught at the right step") {
  json agents = json::array();
  agents.push_back(hill_agent(1, {0, 0}));
  agents.push_back(fixtures::agent_json(2, {1}, {{"type", "linear-consensus"}, {"weights", {0.1}}}, 1.0, 0.5, 0.1,
                                        0.1, {0.5, 0}, 0.5));
  json spec = json::array({goal_for(1, box(0.1, 0.0, 0.5, 0.4), 0.5, 0.75), goal_for(2, box(0.5, 0.2, 0.9, 0.6), 0.75, 0.75)});
  const auto r = run(fixtures::model_json(1.0, 4, agents, spec));
  REQUIRE(r->plan.steps == 3);
  const auto rep = validate_plan(*r->abs, r->plan, r->traj);
  CHECK(rep.ok());
  CHECK(rep.min_margin > 0.0);
  CHECK(rep.entries.size() == 8);
  CHECK(r->diag.max_endpoint_deviation < 1e-8);

  Plan bad = r->plan;
  bad.agents[1].cells[3].lattice[0] += 2;
  const auto rb = validate_plan(*r->abs, bad, r->traj);
  CHECK_FALSE(rb.ok());
  CHECK(rb.mismatches == 1);
  REQUIRE(rb.failures.size() == 1);
  CHECK(rb.failures[0].rfind("step 3 agent 2", 0) == 0);
}

TEST_CASE("margins stay positive for small and large d_max") {
  for (double margin : {0.5, 0.999}) {
    json agents = json::array({hill_agent(1, {0, 0})});
    json spec = json::array({goal_for(1, box(0.1, 0.0, 0.5, 0.4), 0.5, 0.75)});
    const auto r = run(fixtures::model_json(1.0, 4, agents, spec, margin));
    const auto rep = validate_plan(*r->abs, r->plan, r->traj);
    CHECK(rep.ok());
    CHECK(rep.min_margin > 0.0);
    CHECK(rep.snapped == 0);
  }
}

TEST_CASE("open-loop runs stay in the reach tubes") {
  json agents = json::array({hill_agent(1, {0, 0}), hill_agent(2, {1, 1})});
  const auto m = parse_model(fixtures::model_json(1.0, 4, agents).dump());
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec a = sample_ball(rng, Vec::Zero(2), 1.0), b = sample_ball(rng, Vec::Zero(2), 1.0);
    const double freq = 1 + 5 * std::uniform_real_distribution<double>(0, 1)(rng);
    const InputSignal v = [&](double t, std::size_t i) {
      Vec u = (i == 0 ? a : b) * std::cos(freq * t);
      return u;
    };
    const auto traj = simulate_open_loop(m, v, m.horizon, 200);
    for (std::size_t s = 0; s < traj.size(); ++s)
      for (const auto& ag : m.agents) {
        const double grown = (ag.M + ag.v_max) * traj.times[s];
        CHECK((traj.states[s][ag.id.pos()] - ag.x0).norm() <= grown + 1e-9);
      }
  }
  const InputSignal loud = [](double, std::size_t) { return Vec::Constant(2, 5.0); };
  CHECK_THROWS_AS(simulate_open_loop(m, loud, 1.0, 10), Error);
}
