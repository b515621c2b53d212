#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "habs/controller.hpp"
#include "habs/error.hpp"

using namespace habs;
using fixtures::json;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

std::vector<CellDecomposition> decompositions(const fixtures::Loaded& l) {
  std::vector<CellDecomposition> out;
  for (const auto& a : l.model.agents)
    out.push_back(CellDecomposition::build(ReachFamily::of(l.model, a.id), l.params.d_max[a.id.pos()], l.params.dt));
  return out;
}

// A random initiating cell within `spread` of the agent's initial state.
CellIndex near_start(const CellDecomposition& dec, const Vec& x0, double spread, std::mt19937_64& rng) {
  for (;;) {
    const auto l = dec.locate(sample_ball(rng, x0, spread));
    if (dec.initiating(l)) return l;
  }
}

}  // namespace

TEST_CASE("saturation") {
  CHECK(saturate(v2(0.3, 0.4), 1.0) == v2(0.3, 0.4));
  const Vec s = saturate(v2(3, 4), 2.0);
  CHECK(s.norm() == doctest::Approx(2.0));
  CHECK((s - v2(1.2, 1.6)).norm() < 1e-15);
  CHECK(reach_radius_r(0.4, 1.0 / 6, 2.5) == doctest::Approx(1.0 / 6));
}

TEST_CASE("reference trajectory of a consensus agent") {
  json agents = json::array();
  agents.push_back(fixtures::agent_json(1, {}, {{"type", "zero"}}, 1, 1, 0, 0, {2, 1}, 0.3));
  agents.push_back(fixtures::agent_json(2, {1}, {{"type", "linear-consensus"}, {"weights", {0.7}}}, 1, 10, 0.7, 0.7,
                                        {0, 0}, 0.3));
  const auto m = parse_model(fixtures::model_json(1.0, 8, agents).dump());
  const Vec xg = v2(0.1, -0.2), xj = v2(2.05, 1.1);
  const double dt = 0.25;
  const auto ref = integrate_reference(m.agent(AgentId{2}), CellConfiguration{}, xg, xj, dt, IntegratorSettings{});
  CHECK(ref.values.size() == 101);
  CHECK(ref.error_estimate <= 1e-8);
  for (int k = 0; k <= 40; ++k) {
    const double t = dt * k / 40.0;
    const Vec exact = xj + std::exp(-0.7 * t) * (xg - xj);
    CHECK((ref.at(t) - exact).norm() < 1e-10);
  }
  CHECK_THROWS_AS(ref.at(dt * 1.01), Error);

  // zero dynamics leave chi at the reference point
  const auto still = integrate_reference(m.agent(AgentId{1}), CellConfiguration{}, xg, Vec(0), dt, {});
  CHECK((still.endpoint() - xg).norm() == 0.0);

  // a single coarse step cannot pass the audit on a stiff coupling
  json stiff = agents;
  stiff[1]["dynamics"]["weights"] = {400.0};
  stiff[1]["M"] = 1e6;
  const auto ms = parse_model(fixtures::model_json(1.0, 8, stiff).dump());
  CHECK_THROWS_AS(integrate_reference(ms.agent(AgentId{2}), CellConfiguration{}, xg, xj, dt, {1, 1e-8}), Error);
}

TEST_CASE("selecting w") {
  json agents = json::array({fixtures::agent_json(1, {}, {{"type", "zero"}}, 2.0, 1, 0, 0, {0, 0}, 0.5)});
  const auto m = parse_model(fixtures::model_json(1.0, 8, agents).dump());
  const double dt = 0.25, lambda = 0.5, v = 2.0;
  const auto ref = integrate_reference(m.agent(AgentId{1}), CellConfiguration{}, v2(1, 1), Vec(0), dt, {});
  const double r = reach_radius_r(lambda, dt, v);
  const Vec edge = v2(1 + r, 1);
  const Vec w = select_w(ref, edge, lambda, v);
  CHECK(w.norm() == doctest::Approx(v));
  CHECK((ref.endpoint() + lambda * dt * w - edge).norm() < 1e-15);
  CHECK(select_w(ref, v2(1, 1), lambda, v).norm() == 0.0);
  CHECK_THROWS_AS(select_w(ref, v2(1 + 1.01 * r, 1), lambda, v), Error);
  // lambda = 0: only chi(dt) itself is reachable
  CHECK(select_w(ref, v2(1, 1), 0.0, v).norm() == 0.0);
  CHECK_THROWS_AS(select_w(ref, v2(1 + 1e-6, 1), 0.0, v), Error);
}

TEST_CASE("closed form at the interval ends") {
  const auto l = fixtures::load(fixtures::five_agent_text());
  const auto decs = decompositions(l);
  const auto& a3 = l.model.agent(AgentId{3});
  const auto cell = decs[2].locate(a3.x0 + v2(0.2, 0.1));
  auto ref = std::make_shared<const ReferenceTrajectory>(
      integrate_reference(a3, CellConfiguration{{cell}}, decs, l.params.dt, {}));
  TransitionControl c{&a3, ref, a3.x0 + v2(0.21, 0.12), v2(1, -0.5), 0.4};
  CHECK((closed_form_endpoint(c, 0.0) - c.x_i0).norm() < 1e-15);
  CHECK((closed_form_endpoint(c, c.dt()) - (ref->endpoint() + 0.4 * c.dt() * c.w)).norm() < 1e-15);
  const double tm = 0.5 * c.dt();
  CHECK((closed_form_endpoint(c, tm) - (0.5 * (c.x_i0 - ref->own_reference) + 0.4 * tm * c.w + ref->at(tm))).norm() <
        1e-15);
  CHECK_THROWS_AS(closed_form_endpoint(c, -0.1), Error);
}

TEST_CASE("disturbance paths stay in the growing tube") {
  const auto l = fixtures::load(fixtures::five_agent_text());
  const auto decs = decompositions(l);
  const auto cell = decs[2].locate(l.model.agent(AgentId{3}).x0);
  const auto p1 = sample_disturbance(decs[2], cell, 5.0, l.params.dt, 17);
  const auto p2 = sample_disturbance(decs[2], cell, 5.0, l.params.dt, 17);
  REQUIRE(p1.points.size() == 8);
  for (std::size_t k = 0; k < p1.points.size(); ++k) {
    CHECK(p1.points[k] == p2.points[k]);
    CHECK(decs[2].contains(cell, p1.cell_points[k]));
    CHECK(p1.offsets[k].norm() <= 5.0 * p1.times[k] + 1e-15);
  }
  CHECK(p1.offsets[0].norm() == 0.0);
  CHECK_THROWS_AS(sample_disturbance(decs[2], cell, 5.0, l.params.dt, 1, 1), Error);
}

TEST_CASE("auxiliary system hits the closed form from any start in the cell") {
  const auto l = fixtures::load(fixtures::five_agent_text());
  const auto decs = decompositions(l);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int draw = 0; draw < 20; ++draw) {
    const AgentId id{draw % 2 == 0 ? 2 : 3};
    const auto& a = l.model.agent(id);
    CellConfiguration cfg;
    cfg.entries.push_back(near_start(decs[id.pos()], a.x0, 2.0, rng));
    for (AgentId j : a.neighbors) cfg.entries.push_back(near_start(decs[j.pos()], l.model.agent(j).x0, 2.0, rng));
    auto ref = std::make_shared<const ReferenceTrajectory>(integrate_reference(a, cfg, decs, l.params.dt, {}));
    const double lambda = l.params.lambda[id.pos()];
    const Vec w = sample_ball(rng, Vec::Zero(2), a.v_max);

    DisturbanceTube tube;
    for (std::size_t k = 0; k < a.neighbors.size(); ++k) {
      const auto& na = l.model.agent(a.neighbors[k]);
      tube.paths.push_back(
          sample_disturbance(decs[na.id.pos()], cfg.entries[k + 1], na.M + na.v_max, l.params.dt, rng()));
    }
    const EnvelopeParams env{1.0, 5.0, l.params.d_max[id.pos()]};
    Vec end0;
    for (int start = 0; start < 3; ++start) {
      const Box b = decs[id.pos()].box(cfg.entries[0]);
      const Vec x0 = v2(b.lo[0] + U(rng) * decs[id.pos()].side(), b.lo[1] + U(rng) * decs[id.pos()].side());
      const TransitionControl c{&a, ref, x0, w, lambda};
      const auto res = integrate_auxiliary(c, tube, {}, env);
      CHECK(res.deviation <= 1e-8);
      CHECK(res.max_kbar_ratio < 1.0);
      CHECK(res.saturations == 0);
      CHECK(res.max_k1_excess <= 1e-12);
      if (start == 0) end0 = res.endpoint;
      CHECK((res.endpoint - end0).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}
