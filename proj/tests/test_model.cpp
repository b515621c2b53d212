#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fixtures.hpp"
#include "habs/error.hpp"
#include "habs/model.hpp"

using namespace habs;
using fixtures::json;

namespace {

ErrorKind parse_kind(const std::string& text) {
  try {
    parse_model(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Validation;  // sentinel: no error
}

json minimal() {
  return fixtures::model_json(1.0, 4, json::array({fixtures::agent_json(1, {}, {{"type", "zero"}}, 1, 1, 0, 0, {0, 0}, 0.5)}));
}

// h(x) = C (1 + cos(pi |x| / R)) inside the hill
double hill_height(double C, double R, const Vec& x) {
  const double r = x.norm();
  return r < R ? C * (1 + std::cos(std::numbers::pi * r / R)) : 0.0;
}

}  // namespace

TEST_CASE("five-agent model parses") {
  const auto m = parse_model(fixtures::five_agent_text());
  REQUIRE(m.size() == 5);
  CHECK(m.horizon == 2.0);
  CHECK(m.dim == 2);
  CHECK(m.agent(AgentId{3}).neighbors.empty());
  CHECK(m.agent(AgentId{1}).neighbors == std::vector<AgentId>{AgentId{2}});
  CHECK(m.region_radius(AgentId{3}) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(m.region_radius(AgentId{2}) == doctest::Approx(30.0).epsilon(1e-14));
  CHECK(m.region_radius(AgentId{1}) == doctest::Approx(80.0).epsilon(1e-14));
  const auto order = m.topological_order();
  REQUIRE(order);
  CHECK(order->front() == AgentId{3});
  CHECK(m.children(AgentId{3}) == std::vector<AgentId>{AgentId{2}, AgentId{4}});
}

TEST_CASE("semantic and syntax errors") {
  auto j = minimal();
  CHECK(parse_kind(j.dump()) == ErrorKind::Validation);

  auto bad = j;
  bad["agents"][0]["dynamics"] = {{"type", "spiral"}};
  CHECK(parse_kind(bad.dump()) == ErrorKind::Invalid);

  bad = j;
  bad["agents"][0]["neighbors"] = {7};
  CHECK(parse_kind(bad.dump()) == ErrorKind::Invalid);

  bad = j;
  bad["horizon"] = 0.0;
  CHECK(parse_kind(bad.dump()) == ErrorKind::Invalid);

  bad = j;
  bad["agents"][0]["v_max"] = -1.0;
  CHECK(parse_kind(bad.dump()) == ErrorKind::Invalid);

  try {
    parse_model("{\"horizon\": 1,, }");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
}

TEST_CASE("cyclic graphs have no topological order") {
  json agents = json::array();
  agents.push_back(fixtures::agent_json(1, {2}, {{"type", "linear-consensus"}}, 1, 1, 1, 1, {0, 0}, 0.3));
  agents.push_back(fixtures::agent_json(2, {1}, {{"type", "linear-consensus"}}, 1, 1, 1, 1, {1, 0}, 0.3));
  const auto m = parse_model(fixtures::model_json(1.0, 4, agents).dump());
  CHECK_FALSE(m.topological_order());
}

TEST_CASE("gradient hill matches a finite-difference gradient") {
  const auto m = parse_model(fixtures::five_agent_text());
  const auto& a3 = m.agent(AgentId{3});
  const double C = 2.0, R = 2 * std::numbers::pi, h = 1e-6;
  CHECK(eval_f(a3, Vec::Zero(2), Vec(0)).norm() == 0.0);
  for (int s = 0; s < 50; ++s) {
    Vec x(2);
    x << 7.0 * std::sin(1.7 * s + 0.3), 7.0 * std::cos(0.9 * s);
    Vec grad(2);
    for (int k = 0; k < 2; ++k) {
      Vec e = Vec::Zero(2);
      e[k] = h;
      grad[k] = (hill_height(C, R, x + e) - hill_height(C, R, x - e)) / (2 * h);
    }
    const Vec f = eval_f(a3, x, Vec(0));
    CHECK((f + grad).norm() < 1e-6);
    CHECK(f.norm() <= C * std::numbers::pi / R + 1e-12);
  }
  // removable singularity: continuous through the origin
  Vec tiny(2);
  tiny << 1e-10, 0;
  CHECK(eval_f(a3, tiny, Vec(0)).norm() < 1e-9);
}

TEST_CASE("consensus, affine and expression dynamics") {
  json agents = json::array();
  agents.push_back(fixtures::agent_json(1, {}, {{"type", "affine"}, {"A", {{1, 2}, {3, 4}}}, {"b", {1, -1}}}, 1, 100, 0,
                                        10, {1, 1}, 0.3));
  agents.push_back(fixtures::agent_json(2, {1}, {{"type", "linear-consensus"}, {"weights", {2.0}}}, 1, 100, 2, 2,
                                        {0, 0}, 0.3));
  agents.push_back(fixtures::agent_json(
      3, {1, 2}, {{"type", "expression"}, {"coords", {"x_j1[1] - x_i[1]", "norm(x_j2 - x_i)"}}}, 1, 100, 2, 2,
      {0, 0}, 0.3));
  const auto m = parse_model(fixtures::model_json(1.0, 4, agents).dump());
  Vec x(2), y(2), z(2);
  x << 1, 2;
  y << 3, 5;
  z << -1, 1;
  const Vec fa = eval_f(m.agent(AgentId{1}), x, Vec(0));
  CHECK(fa[0] == 1 + 4 + 1);
  CHECK(fa[1] == 3 + 8 - 1);
  const Vec fc = eval_f(m.agent(AgentId{2}), x, y);
  CHECK(fc[0] == 4.0);
  CHECK(fc[1] == 6.0);
  Vec both(4);
  both << y, z;
  const Vec fe = eval_f(m.agent(AgentId{3}), x, both);
  CHECK(fe[0] == 2.0);
  CHECK(fe[1] == doctest::Approx((z - x).norm()));
  CHECK_THROWS_AS(eval_f(m.agent(AgentId{2}), x, Vec(3)), Error);
}

TEST_CASE("bounds validation") {
  const auto m = parse_model(fixtures::five_agent_text());
  const auto rep = validate_bounds(m, 4000, 7);
  REQUIRE(rep.agents.size() == 5);
  // the hill agent's bounds hold everywhere
  CHECK(rep.agents[2].violations.empty());
  CHECK(rep.agents[2].sup_f <= 1.0 + 1e-12);
  // the UAV bounds are only claimed on the distance-constrained sets, not on
  // the product of balls that is sampled here
  CHECK_FALSE(rep.agents[1].violations.empty());
  CHECK(rep.agents[1].max_q1 <= 1.0 + 1e-9);
  CHECK(rep.agents[1].max_q2 <= 1.0 + 1e-9);

  // same seed, same report
  const auto again = validate_bounds(m, 4000, 7);
  CHECK(again.agents[0].sup_f == rep.agents[0].sup_f);

  json agents = json::array({fixtures::agent_json(1, {}, {{"type", "affine"}, {"b", {3, 4}}}, 1, 4.0, 0, 0, {0, 0}, 0.3)});
  const auto bad = parse_model(fixtures::model_json(1.0, 4, agents).dump());
  const auto r2 = validate_bounds(bad, 100, 1);
  CHECK_FALSE(r2.ok());
  CHECK(r2.agents[0].worst_ratio == doctest::Approx(5.0 / 4.0));
}
