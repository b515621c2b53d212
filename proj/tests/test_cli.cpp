#include <filesystem>

#include "doctest.h"
#include "fixtures.hpp"
#include "habs/io.hpp"

using fixtures::cli;
using fixtures::json;
namespace fs = std::filesystem;

namespace {

json pair_doc() {
  json agents = json::array();
  agents.push_back(fixtures::agent_json(1, {}, {{"type", "zero"}}, 1.0, 0.0, 0, 0, {0, 0}, 0.5));
  agents.push_back(fixtures::agent_json(2, {1}, {{"type", "linear-consensus"}, {"weights", {0.1}}}, 1.0, 0.5, 0.1,
                                        0.1, {0.5, 0}, 0.5));
  json spec = json::array();
  spec.push_back({{"agent", 1}, {"goals", {{{"box", {{0.1, 0.0}, {0.5, 0.4}}}, {"window", {0.5, 0.75}}}}}});
  spec.push_back({{"agent", 2}, {"goals", {{{"box", {{0.5, 0.2}, {0.9, 0.6}}}, {"window", {0.5, 0.75}}}}}});
  return fixtures::model_json(1.0, 4, agents, spec);
}

std::string put(const std::string& dir, const std::string& name, const std::string& text) {
  const auto p = dir + "/" + name;
  habs::write_file(p, text);
  return p;
}

}  // namespace

TEST_CASE("full pipeline on a small model") {
  const auto dir = fixtures::scratch("cli_pipeline");
  const auto model = put(dir, "model.json", pair_doc().dump(2));
  const auto out = dir + "/out";
  CHECK(cli({"abstract", "--model", model, "--out", out, "--samples", "200"}) == 0);
  CHECK(fs::exists(out + "/abstraction.json"));
  const auto rep = json::parse(habs::read_file(out + "/abstraction.json"));
  CHECK(rep["steps"] == 4);
  CHECK(rep["agents"].size() == 2);

  CHECK(cli({"plan", "--model", model, "--out", out}) == 0);
  const auto first = habs::read_file(out + "/plan.json");
  CHECK(fs::exists(out + "/synthesis_log.json"));
  CHECK(cli({"plan", "--model", model, "--out", out}) == 0);
  CHECK(habs::read_file(out + "/plan.json") == first);

  CHECK(cli({"validate", "--model", model, "--out", out}) == 0);
  const auto val = json::parse(habs::read_file(out + "/validation.json"));
  CHECK(val["ok"] == true);
  CHECK(val["min_margin"].get<double>() > 0.0);
  CHECK(fs::exists(out + "/trajectory.csv"));

  CHECK(cli({"render", "--model", model, "--out", out}) == 0);
  CHECK(fs::exists(out + "/figure.svg"));
  CHECK(cli({"chain", "--model", model, "--out", out}) == 0);
  CHECK(json::parse(habs::read_file(out + "/next_model.json"))["agents"].size() == 2);

  const auto prod = dir + "/product";
  CHECK(cli({"plan", "--model", model, "--out", prod, "--strategy", "product"}) == 0);
  CHECK(cli({"validate", "--model", model, "--out", prod}) == 0);
  CHECK(json::parse(habs::read_file(prod + "/synthesis_log.json"))["strategy"] == "product");
}

TEST_CASE("exit codes") {
  const auto dir = fixtures::scratch("cli_codes");
  const auto model = put(dir, "model.json", pair_doc().dump());
  const auto out = dir + "/out";

  CHECK(cli({"plan", "--model", dir + "/nope.json", "--out", out}) == 1);
  CHECK(cli({"plan", "--model", put(dir, "broken.json", "{\"horizon\": "), "--out", out}) == 1);
  CHECK(cli({"frobnicate", "--model", model, "--out", out}) == 1);

  auto unsat = pair_doc();
  unsat["spec"][1]["goals"][0]["box"] = {{5, 5}, {6, 6}};
  CHECK(cli({"plan", "--model", put(dir, "unsat.json", unsat.dump()), "--out", out}) == 2);
  auto empty_window = pair_doc();
  empty_window["spec"][0]["goals"][0]["window"] = {0.3, 0.4};
  CHECK(cli({"plan", "--model", put(dir, "window.json", empty_window.dump()), "--out", out}) == 2);

  CHECK(cli({"plan", "--model", model, "--out", out, "--lambda", "1=1.0"}) == 3);
  CHECK(cli({"plan", "--model", model, "--out", out, "--dmax", "2=5"}) == 3);
  CHECK(cli({"plan", "--model", model, "--out", out, "--dt", "0.5"}) == 3);

  // a tampered cell path is not a run of the abstraction
  REQUIRE(cli({"plan", "--model", model, "--out", out}) == 0);
  auto plan = json::parse(habs::read_file(out + "/plan.json"));
  plan["agents"][1]["cells"][2][0] = plan["agents"][1]["cells"][2][0].get<int>() + 3;
  put(out, "plan.json", plan.dump());
  CHECK(cli({"validate", "--model", model, "--out", out}) == 4);
  CHECK(json::parse(habs::read_file(out + "/validation.json"))["ok"] == false);

  // plans are tied to the exact model text
  REQUIRE(cli({"plan", "--model", model, "--out", out}) == 0);
  const auto other = put(dir, "other.json", pair_doc().dump(4));
  CHECK(cli({"validate", "--model", other, "--out", out, "--plan", out + "/plan.json"}) == 1);
}
