#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "habs/error.hpp"
#include "habs/wellposed.hpp"

using namespace habs;
using fixtures::json;

namespace {

// dt bound and d_max bound written out directly from the model constants
struct Oracle {
  double lambda, v, L1, L2, Mn, mu;
  double dt_sup() const { return (1 - lambda) * v / (L1 * Mn + L2 * lambda * v); }
  double dmax(double dt) const {
    const double a = 2 * (1 - lambda) * v * dt / (1 + (L1 * mu + L2) * dt);
    const double b = (2 * (1 - lambda) * v * dt - 2 * (L1 * Mn + L2 * lambda * v) * dt * dt) / (1 + L1 * mu * dt);
    return a < b ? a : b;
  }
};

ErrorKind synth_kind(const json& doc) {
  try {
    fixtures::load(doc.dump());
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Validation;  // no error
}

}  // namespace

TEST_CASE("five-agent bounds equal the exact fractions") {
  const auto l = fixtures::load(fixtures::five_agent_text());
  const double dt = 1.0 / 6;
  CHECK(l.params.steps == 12);
  CHECK(std::abs(l.params.dt - dt) < 1e-15);
  const double dt_exact[] = {13.0 / 37, 3.0 / 7, 1.0 / 2, 3.0 / 7, 13.0 / 37};
  const double dm_exact[] = {41.0 / 42, 11.0 / 21, 1.0 / 3, 11.0 / 21, 41.0 / 42};
  const double r_exact[] = {7.0 / 12, 1.0 / 3, 1.0 / 6, 1.0 / 3, 7.0 / 12};
  for (const auto& a : l.model.agents) {
    const auto p = a.id.pos();
    const double lam = l.params.lambda[p];
    CHECK(std::abs(dt_bound(l.model, lam, a.id) - dt_exact[p]) <= 1e-12);
    const double db = dmax_bound(l.model, lam, mu_norm(l.model, l.params.mu, a.id), a.id, l.params.dt);
    CHECK(std::abs(db - dm_exact[p]) <= 1e-12);
    CHECK(std::abs(lam * l.params.dt * a.v_max - r_exact[p]) <= 1e-12);
    CHECK(std::abs(l.params.d_max[p] - 0.999 * dm_exact[p]) <= 1e-12);
  }
  CHECK_NOTHROW(validate_discretization(l.model, l.params));
}

TEST_CASE("bounds agree with the oracle on random parameters") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int s = 0; s < 200; ++s) {
    json agents = json::array();
    const double v1 = 0.5 + U(rng), M1 = 2 * U(rng);
    const double v2 = 0.5 + 3 * U(rng), lam = 0.9 * U(rng), L1 = 0.05 + U(rng), L2 = 0.05 + U(rng);
    agents.push_back(fixtures::agent_json(1, {}, {{"type", "zero"}}, v1, M1, 0, 0, {0, 0}, 0.2));
    agents.push_back(
        fixtures::agent_json(2, {1}, {{"type", "linear-consensus"}}, v2, 1, L1, L2, {1, 1}, lam));
    const auto m = parse_model(fixtures::model_json(1.0, 8, agents).dump());
    const double mu = 0.5 + U(rng);
    const Oracle o{lam, v2, L1, L2, M1 + v1, mu};
    const double sup = dt_bound(m, lam, AgentId{2});
    CHECK(std::abs(sup - o.dt_sup()) <= 1e-12 * o.dt_sup());
    const double dt = sup * (0.05 + 0.9 * U(rng));
    const double db = dmax_bound(m, lam, mu, AgentId{2}, dt);
    CHECK(std::abs(db - o.dmax(dt)) <= 1e-12 * std::abs(o.dmax(dt)) + 1e-15);
    CHECK_THROWS_AS(dmax_bound(m, lam, mu, AgentId{2}, sup * 1.0001), Error);
  }
}

TEST_CASE("uncoupled zero dynamics have no dt bound") {
  json agents = json::array({fixtures::agent_json(1, {}, {{"type", "zero"}}, 1, 0, 0, 0, {0, 0}, 0.5)});
  const auto m = parse_model(fixtures::model_json(1.0, 4, agents).dump());
  CHECK(std::isinf(dt_bound(m, 0.5, AgentId{1})));
  // with L1 = L2 = 0 both branches are 2 (1 - lambda) v dt
  CHECK(dmax_bound(m, 0.5, 0.0, AgentId{1}, 0.25) == doctest::Approx(0.25));
}

TEST_CASE("d_max propagation along mu edges") {
  auto doc = json::parse(fixtures::five_agent_text());
  doc["agents"][1]["mu"] = {{"3", 0.5}};
  const auto l = fixtures::load(doc.dump());
  // mu_norm of agent 2 drops to 1/2, which loosens its own bound
  const double d2 = 0.999 * (11.0 / 18) / (13.0 / 12);
  CHECK(l.params.d_max[1] == doctest::Approx(d2).epsilon(1e-14));
  CHECK(l.params.d_max[2] == doctest::Approx(0.5 * d2).epsilon(1e-14));
  CHECK(l.params.d_max[2] < 0.999 / 3);
  CHECK_NOTHROW(validate_discretization(l.model, l.params));

  auto broken = l.params;
  broken.d_max[2] = 0.999 / 3;
  CHECK_THROWS_AS(validate_discretization(l.model, broken), Error);
}

TEST_CASE("cycles, lambda range and margin") {
  json agents = json::array();
  agents.push_back(fixtures::agent_json(1, {2}, {{"type", "linear-consensus"}}, 1, 1, 0.1, 0.1, {0, 0}, 0.3));
  agents.push_back(fixtures::agent_json(2, {1}, {{"type", "linear-consensus"}}, 1, 1, 0.1, 0.1, {1, 0}, 0.3));
  auto doc = fixtures::model_json(1.0, 8, agents);
  CHECK(synth_kind(doc) == ErrorKind::Validation);

  const auto m = parse_model(doc.dump());
  const auto rep = check_cycles(m, {{0.5}, {2.5}});
  CHECK(rep.cycles_checked == 1);
  CHECK(rep.ok());
  const auto bad = check_cycles(m, {{0.5}, {1.0}});
  REQUIRE(bad.violations.size() == 1);
  CHECK(bad.violations[0].product == doctest::Approx(0.5));

  auto cyc = doc;
  cyc["agents"][0]["mu"] = {{"2", 0.5}};
  CHECK(synth_kind(cyc) == ErrorKind::Infeasible);

  auto lam = doc;
  lam["agents"][0]["lambda"] = 1.0;
  CHECK(synth_kind(lam) == ErrorKind::Infeasible);

  auto margin = doc;
  margin["discretization"]["margin"] = 1.0;
  CHECK(synth_kind(margin) == ErrorKind::Infeasible);
}

TEST_CASE("step count search and rejection") {
  auto doc = json::parse(fixtures::five_agent_text());
  // dt = 2/5 violates agent 1's bound 13/37
  doc["discretization"]["steps"] = 5;
  doc["tau"] = 0.5;
  CHECK(synth_kind(doc) == ErrorKind::Infeasible);

  doc["discretization"].erase("steps");
  const auto l = fixtures::load(doc.dump());
  // least l with 2/l below 13/37 and below tau
  CHECK(l.params.steps == 6);
  CHECK(l.params.dt < 13.0 / 37);
}
