#include <filesystem>

#include "doctest.h"
#include "fixtures.hpp"
#include "habs/abstraction.hpp"
#include "habs/error.hpp"
#include "habs/io.hpp"
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

json pair_doc() {
  json agents = json::array();
  agents.push_back(fixtures::agent_json(1, {}, {{"type", "zero"}}, 1.0, 0.0, 0, 0, {0, 0}, 0.5));
  agents.push_back(fixtures::agent_json(2, {1}, {{"type", "linear-consensus"}, {"weights", {0.1}}}, 1.0, 0.5, 0.1,
                                        0.1, {0.5, 0}, 0.5));
  json spec = json::array();
  spec.push_back({{"agent", 1}, {"goals", json::array({fixtures::goal_json(box(0.1, 0.0, 0.5, 0.4), 0.5, 0.75)})}});
  spec.push_back({{"agent", 2}, {"goals", json::array({fixtures::goal_json(box(0.5, 0.2, 0.9, 0.6), 0.5, 0.75)})}});
  return fixtures::model_json(1.0, 4, agents, spec);
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Invalid;  // no error; no io routine throws Invalid for these inputs
}

}  // namespace

TEST_CASE("fnv1a") {
  CHECK(hash_hex(fnv1a("")) == "cbf29ce484222325");
  CHECK(hash_hex(fnv1a("a")) == "af63dc4c8601ec8c");
  CHECK(hash_hex(fnv1a("foobar")) == "85944171f73967e8");
}

TEST_CASE("files") {
  const auto dir = fixtures::scratch("io_files");
  write_file(dir + "/x.txt", "hello\n");
  CHECK(read_file(dir + "/x.txt") == "hello\n");
  CHECK(kind_of([&] { read_file(dir + "/missing.txt"); }) == ErrorKind::Io);
  CHECK(kind_of([&] { write_file(dir + "/no/such/dir/x", "a"); }) == ErrorKind::Io);
}

TEST_CASE("plan and trajectory round trips") {
  const auto text = pair_doc().dump();
  const auto l = fixtures::load(text);
  const Abstraction abs(l.model, l.params);
  auto plan = cascade_synthesize(abs, parse_spec(text, l.model));
  fill_controls(abs, plan);
  const std::string hash = hash_hex(fnv1a(text));
  const std::string once = plan_to_json(plan, l.params, hash);
  const auto back = parse_plan(once, l.model);
  CHECK(back.model_hash == hash);
  CHECK(back.plan.steps == plan.steps);
  CHECK(back.params.d_max == l.params.d_max);
  for (std::size_t i = 0; i < plan.agents.size(); ++i) {
    CHECK(back.plan.agents[i].cells == plan.agents[i].cells);
    CHECK(back.plan.agents[i].goal_steps == plan.agents[i].goal_steps);
    for (int k = 0; k < plan.steps; ++k) CHECK(back.plan.agents[i].steps[k].w == plan.agents[i].steps[k].w);
  }
  CHECK(plan_to_json(back.plan, back.params, back.model_hash) == once);

  CHECK(kind_of([&] { parse_plan("{\"steps\": 1}", l.model); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse_plan("not json", l.model); }) == ErrorKind::Parse);

  const auto sched = extract_controls(plan, abs);
  const auto traj = simulate_closed_loop(l.model, sched, abs.settings());
  const std::string csv = trajectory_to_csv(traj);
  CHECK(csv.rfind("t,agent,x1,x2,v1,v2\n", 0) == 0);
  const auto t2 = parse_trajectory_csv(csv, l.model);
  REQUIRE(t2.size() == traj.size());
  for (std::size_t s = 0; s < traj.size(); ++s) {
    CHECK(t2.times[s] == traj.times[s]);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(t2.states[s][i] == traj.states[s][i]);
      CHECK(t2.inputs[s][i] == traj.inputs[s][i]);
    }
  }

  CHECK(kind_of([&] { parse_trajectory_csv("", l.model); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse_trajectory_csv("t,agent,x1,x2,v1,v2\n0,1,0,0\n", l.model); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse_trajectory_csv("t,agent,x1,x2,v1,v2\n0,1,0,zz,0,0\n0,2,0,0,0,0\n", l.model); }) ==
        ErrorKind::Parse);
  CHECK(kind_of([&] { parse_trajectory_csv("t,agent,x1,x2,v1,v2\n0,7,0,0,0,0\n", l.model); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse_trajectory_csv("t,agent,x1,x2,v1,v2\n0,1,0,0,0,0\n", l.model); }) == ErrorKind::Parse);

  const auto next = json::parse(chain_model(text, traj.states.back()));
  CHECK(next["agents"][1]["x0"][0].get<double>() == traj.states.back()[1][0]);
  CHECK(next["spec"] == pair_doc()["spec"]);
}

TEST_CASE("svg rendering") {
  const auto text = pair_doc().dump();
  const auto l = fixtures::load(text);
  const Abstraction abs(l.model, l.params);
  const auto spec = parse_spec(text, l.model);
  auto plan = cascade_synthesize(abs, spec);
  RenderInput in{&abs, &spec, &plan, nullptr};
  const auto a = render_svg(in);
  CHECK(a.rfind("<svg", 0) == 0);
  CHECK(a.find("</svg>") != std::string::npos);
  CHECK(render_svg(in) == a);

  json agents = json::array({fixtures::agent_json(1, {}, {{"type", "zero"}}, 1.0, 0.0, 0, 0, {0}, 0.5)});
  const auto l1 = fixtures::load(fixtures::model_json(1.0, 4, agents).dump());
  const Abstraction line(l1.model, l1.params);
  RenderInput bad{&line, nullptr, nullptr, nullptr};
  CHECK(kind_of([&] { render_svg(bad); }) == ErrorKind::Invalid);
}
