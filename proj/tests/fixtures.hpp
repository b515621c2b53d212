// Shared builders for the test programs.
#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "habs/cli.hpp"
#include "habs/io.hpp"
#include "json.hpp"

namespace fixtures {

using nlohmann::json;

inline std::string source_path(const std::string& rel) { return std::string(HABS_SOURCE_DIR) + "/" + rel; }

inline std::string five_agent_text() { return habs::read_file(source_path("models/five_agents.json")); }

// A parsed model together with its text, design and discretization.
struct Loaded {
  std::string text;
  habs::NetworkModel model;
  habs::DesignParams design;
  habs::DiscretizationParams params;
};

inline Loaded load(const std::string& text) {
  Loaded l;
  l.text = text;
  l.model = habs::parse_model(text);
  l.design = habs::parse_design(text, l.model);
  l.params = habs::synthesize(l.model, l.design);
  return l;
}

inline json agent_json(int id, std::vector<int> neighbors, json dynamics, double v_max, double M, double L1,
                       double L2, std::vector<double> x0, double lambda) {
  json a;
  a["id"] = id;
  a["dim"] = static_cast<int>(x0.size());
  a["neighbors"] = neighbors;
  a["dynamics"] = dynamics;
  a["v_max"] = v_max;
  a["M"] = M;
  a["L1"] = L1;
  a["L2"] = L2;
  a["x0"] = x0;
  a["lambda"] = lambda;
  return a;
}

inline json model_json(double T, int steps, json agents, json spec = json::array(), double margin = 0.999) {
  json m;
  m["horizon"] = T;
  m["tau"] = 2.0 * T / steps;
  m["discretization"] = {{"steps", steps}, {"margin", margin}};
  m["agents"] = agents;
  m["spec"] = spec;
  return m;
}

inline json goal_json(const habs::Box& b, double a, double bb, bool relative = true) {
  json g;
  g["box"] = {{b.lo[0], b.lo[1]}, {b.hi[0], b.hi[1]}};
  g["window"] = {a, bb};
  g["relative"] = relative;
  return g;
}

// Random chain network of 1..3 planar agents with small couplings. Agent 1
// has hill, affine or zero dynamics; later agents follow their predecessor.
// All declared M, L1, L2 hold globally for the saturated dynamics.
inline json random_toy(std::mt19937_64& rng, int agents, int steps, double T = 1.0) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  json list = json::array();
  for (int i = 1; i <= agents; ++i) {
    const double v = 0.8 + 0.7 * U(rng);
    const double lambda = 0.3 + 0.3 * U(rng);
    std::vector<double> x0{2.0 * U(rng) - 1.0, 2.0 * U(rng) - 1.0};
    json dyn;
    double L1 = 0.0, L2 = 0.0;
    std::vector<int> nb;
    if (i == 1) {
      const int kind = static_cast<int>(U(rng) * 3);
      if (kind == 0) {
        const double C = 0.3 + 0.3 * U(rng);
        dyn = {{"type", "gradient-hill"}, {"C", C}, {"R", 3.141592653589793}, {"center", {0.3, -0.2}}};
        L2 = C;  // C pi^2 / R^2
      } else if (kind == 1) {
        const double a = -0.2 * U(rng);
        dyn = {{"type", "affine"}, {"A", {{a, 0.1}, {-0.1, a}}}, {"b", {0.2 * U(rng), -0.2 * U(rng)}}};
        L2 = std::abs(a) + 0.1;
      } else {
        dyn = {{"type", "zero"}};
      }
    } else {
      nb.push_back(i - 1);
      const double w = 0.05 + 0.1 * U(rng);
      dyn = {{"type", "linear-consensus"}, {"weights", {w}}};
      L1 = w;
      L2 = w;
    }
    list.push_back(agent_json(i, nb, dyn, v, 1.0, L1, L2, x0, lambda));
  }
  return model_json(T, steps, list);
}

// Fresh scratch directory under the build tree's temp dir.
inline std::string scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("habs_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

// Runs the command line in-process and returns its exit code.
inline int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "horizon-abs");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return habs::cli::run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace fixtures
