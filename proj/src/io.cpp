/*
 * io.cpp
 */
#include "habs/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "habs/error.hpp"
#include "json.hpp"

namespace habs {

using nlohmann::json;

namespace {

json vec_json(const Vec& v) {
  json j = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) j.push_back(v[k]);
  return j;
}

Vec json_vec(const json& j, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) throw Error(ErrorKind::Parse, "plan: vector of wrong size");
  Vec v(dim);
  for (int k = 0; k < dim; ++k) v[k] = j[static_cast<std::size_t>(k)].get<double>();
  return v;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string px(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string plan_to_json(const Plan& plan, const DiscretizationParams& params, const std::string& model_hash) {
  json j;
  j["format"] = "horizon-abs-plan/1";
  j["model_hash"] = model_hash;
  j["steps"] = plan.steps;
  j["dt"] = plan.dt;
  j["strategy"] = plan.stats.strategy;
  json d;
  d["steps"] = params.steps;
  d["dt"] = params.dt;
  d["margin"] = params.margin;
  d["lambda"] = params.lambda;
  d["mu"] = params.mu;
  d["d_max"] = params.d_max;
  j["discretization"] = d;
  json agents = json::array();
  for (const auto& ap : plan.agents) {
    json ja;
    ja["id"] = ap.agent.value;
    json cells = json::array();
    for (const auto& c : ap.cells) cells.push_back(c.lattice);
    ja["cells"] = cells;
    json w = json::array(), tp = json::array(), chi = json::array();
    for (const auto& st : ap.steps) {
      w.push_back(vec_json(st.w));
      tp.push_back(vec_json(st.target_point));
      chi.push_back(vec_json(st.chi_end));
    }
    ja["w"] = w;
    ja["target_points"] = tp;
    ja["chi_end"] = chi;
    ja["goal_steps"] = ap.goal_steps;
    agents.push_back(ja);
  }
  j["agents"] = agents;
  return j.dump(2) + "\n";
}

PlanFile parse_plan(std::string_view text, const NetworkModel& model) {
  PlanFile f;
  try {
    const json j = json::parse(text.begin(), text.end());
    f.model_hash = j.at("model_hash").get<std::string>();
    f.plan.steps = j.at("steps").get<int>();
    f.plan.dt = j.at("dt").get<double>();
    f.plan.stats.strategy = j.value("strategy", "");
    const auto& d = j.at("discretization");
    f.params.steps = d.at("steps").get<int>();
    f.params.dt = d.at("dt").get<double>();
    f.params.margin = d.at("margin").get<double>();
    f.params.lambda = d.at("lambda").get<std::vector<double>>();
    f.params.mu = d.at("mu").get<std::vector<std::vector<double>>>();
    f.params.d_max = d.at("d_max").get<std::vector<double>>();
    if (f.plan.steps < 0) throw Error(ErrorKind::Parse, "plan: negative step count");
    for (const auto& ja : j.at("agents")) {
      AgentPlan ap;
      ap.agent = AgentId{ja.at("id").get<int>()};
      if (ap.agent.value < 1 || static_cast<std::size_t>(ap.agent.value) > model.size())
        throw Error(ErrorKind::Parse, "plan: unknown agent id");
      for (const auto& jc : ja.at("cells")) {
        CellIndex c{jc.get<std::vector<std::int32_t>>()};
        if (static_cast<int>(c.lattice.size()) != model.dim) throw Error(ErrorKind::Parse, "plan: cell of wrong dimension");
        ap.cells.push_back(std::move(c));
      }
      const auto& w = ja.at("w");
      const auto& tp = ja.at("target_points");
      const auto& chi = ja.at("chi_end");
      if (w.size() != tp.size() || w.size() != chi.size()) throw Error(ErrorKind::Parse, "plan: step arrays differ in length");
      for (std::size_t k = 0; k < w.size(); ++k)
        ap.steps.push_back(PlanStep{json_vec(w[k], model.dim), json_vec(tp[k], model.dim), json_vec(chi[k], model.dim)});
      ap.goal_steps = ja.value("goal_steps", std::vector<int>{});
      f.plan.agents.push_back(std::move(ap));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("plan file: ") + e.what());
  }
  std::sort(f.plan.agents.begin(), f.plan.agents.end(),
            [](const AgentPlan& a, const AgentPlan& b) { return a.agent < b.agent; });
  return f;
}

std::string trajectory_to_csv(const Trajectory& traj) {
  std::string out = "t,agent";
  for (int k = 1; k <= traj.dim; ++k) out += ",x" + std::to_string(k);
  for (int k = 1; k <= traj.dim; ++k) out += ",v" + std::to_string(k);
  out += "\n";
  for (std::size_t s = 0; s < traj.size(); ++s) {
    for (std::size_t i = 0; i < traj.states[s].size(); ++i) {
      out += num(traj.times[s]) + "," + std::to_string(i + 1);
      for (int k = 0; k < traj.dim; ++k) out += "," + num(traj.states[s][i][k]);
      for (int k = 0; k < traj.dim; ++k) out += "," + num(traj.inputs[s][i][k]);
      out += "\n";
    }
  }
  return out;
}

Trajectory parse_trajectory_csv(std::string_view text, const NetworkModel& model) {
  const int n = model.dim;
  const std::size_t N = model.size();
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,agent", 0) != 0) throw Error(ErrorKind::Parse, "trajectory: missing header");
  std::map<double, std::vector<std::optional<std::pair<Vec, Vec>>>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    const std::string where = "trajectory line " + std::to_string(lineno);
    if (cols.size() != static_cast<std::size_t>(2 + 2 * n)) throw Error(ErrorKind::Parse, where + ": wrong column count");
    std::vector<double> vals;
    for (const auto& c : cols) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        throw Error(ErrorKind::Parse, where + ": not a number");
      }
      if (used != c.size()) throw Error(ErrorKind::Parse, where + ": not a number");
      vals.push_back(v);
    }
    const int agent = static_cast<int>(vals[1]);
    if (agent < 1 || static_cast<std::size_t>(agent) > N || vals[1] != agent)
      throw Error(ErrorKind::Parse, where + ": bad agent id");
    Vec x(n), v(n);
    for (int k = 0; k < n; ++k) {
      x[k] = vals[static_cast<std::size_t>(2 + k)];
      v[k] = vals[static_cast<std::size_t>(2 + n + k)];
    }
    auto& slot = rows[vals[0]];
    slot.resize(N);
    slot[static_cast<std::size_t>(agent - 1)] = std::make_pair(x, v);
  }
  if (rows.empty()) throw Error(ErrorKind::Parse, "trajectory: no samples");
  Trajectory traj;
  traj.dim = n;
  for (const auto& [t, slot] : rows) {
    std::vector<Vec> xs, vs;
    for (std::size_t i = 0; i < N; ++i) {
      if (!slot[i]) throw Error(ErrorKind::Parse, "trajectory: sample at t=" + num(t) + " misses an agent");
      xs.push_back(slot[i]->first);
      vs.push_back(slot[i]->second);
    }
    traj.times.push_back(t);
    traj.states.push_back(std::move(xs));
    traj.inputs.push_back(std::move(vs));
  }
  return traj;
}

std::string chain_model(std::string_view model_document, const std::vector<Vec>& states) {
  json doc;
  try {
    doc = json::parse(model_document.begin(), model_document.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("model syntax error: ") + e.what());
  }
  for (auto& ja : doc.at("agents")) {
    const int id = ja.at("id").get<int>();
    ja["x0"] = vec_json(states.at(static_cast<std::size_t>(id - 1)));
  }
  return doc.dump(2) + "\n";
}

std::string render_svg(const RenderInput& in) {
  if (!in.abs) throw Error(ErrorKind::Invalid, "render: no abstraction");
  const Abstraction& abs = *in.abs;
  const auto& model = abs.model();
  if (model.dim != 2) throw Error(ErrorKind::Invalid, "render: only planar (n = 2) models can be drawn");

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& a : model.agents) {
    const auto& r = abs.decomposition(a.id).region();
    xmin = std::min(xmin, r.center[0] - r.radius);
    xmax = std::max(xmax, r.center[0] + r.radius);
    ymin = std::min(ymin, r.center[1] - r.radius);
    ymax = std::max(ymax, r.center[1] + r.radius);
  }
  const double width = 1000.0;
  const double scale = width / (xmax - xmin);
  const double height = (ymax - ymin) * scale;
  auto X = [&](double x) { return (x - xmin) * scale; };
  auto Y = [&](double y) { return (ymax - y) * scale; };

  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(width) + "\" height=\"" + px(height) +
                    "\" viewBox=\"0 0 " + px(width) + " " + px(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  auto rect = [&](const Box& b, const char* fill, const char* stroke, double opacity) {
    svg += "<rect x=\"" + px(X(b.lo[0])) + "\" y=\"" + px(Y(b.hi[1])) + "\" width=\"" + px((b.hi[0] - b.lo[0]) * scale) +
           "\" height=\"" + px((b.hi[1] - b.lo[1]) * scale) + "\" fill=\"" + fill + "\" fill-opacity=\"" + px(opacity) +
           "\" stroke=\"" + stroke + "\" stroke-width=\"0.3\"/>\n";
  };

  for (const auto& a : model.agents) {
    const auto& dec = abs.decomposition(a.id);
    const auto& r = dec.region();
    const char* color = palette[a.id.pos() % 7];
    svg += "<g id=\"agent" + std::to_string(a.id.value) + "\">\n";
    svg += "<circle cx=\"" + px(X(r.center[0])) + "\" cy=\"" + px(Y(r.center[1])) + "\" r=\"" + px(r.radius * scale) +
           "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1\"/>\n";
    if (!in.plan && dec.size() <= 4000)
      for (const auto& l : dec.index_set()) rect(dec.box(l), "none", "#cccccc", 0.0);

    if (in.plan && in.plan->steps > 0) {
      std::vector<std::vector<CellIndex>> nb;
      for (AgentId j : a.neighbors) nb.push_back(in.plan->agents[j.pos()].cells);
      std::vector<CompiledGoal> goals;
      if (in.spec) goals = compile_goals(in.spec->goals[a.id.pos()], dec, abs.dt());
      const auto fwd = forward_reach(abs, a.id, goals, nb, in.plan->steps);
      std::vector<CellIndex> reach, sat;
      for (const auto& layer : fwd.cells) reach.insert(reach.end(), layer.begin(), layer.end());
      std::sort(reach.begin(), reach.end());
      reach.erase(std::unique(reach.begin(), reach.end()), reach.end());
      for (const auto& l : reach) rect(dec.box(l), "#7fd17f", "#4a9a4a", 0.5);
      try {
        const auto pruned = backward_prune(abs, a.id, goals, nb, fwd);
        for (const auto& layer : pruned.cells) sat.insert(sat.end(), layer.begin(), layer.end());
        std::sort(sat.begin(), sat.end());
        sat.erase(std::unique(sat.begin(), sat.end()), sat.end());
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Unsatisfiable) throw;
      }
      for (const auto& l : sat) rect(dec.box(l), "#f2d649", "#b59f2e", 0.6);
    }
    if (in.plan)
      for (const auto& l : in.plan->agents[a.id.pos()].cells) rect(dec.box(l), "#d62728", "#8b1a1a", 0.8);
    if (in.spec)
      for (const auto& g : in.spec->goals[a.id.pos()]) rect(g.box, "none", "#1f3fbf", 0.0);
    if (in.traj && !in.traj->states.empty()) {
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.2\" points=\"";
      for (std::size_t s = 0; s < in.traj->size(); ++s) {
        const Vec& x = in.traj->states[s][a.id.pos()];
        svg += px(X(x[0])) + "," + px(Y(x[1])) + (s + 1 < in.traj->size() ? " " : "");
      }
      svg += "\"/>\n";
    }
    svg += "<circle cx=\"" + px(X(a.x0[0])) + "\" cy=\"" + px(Y(a.x0[1])) + "\" r=\"2\" fill=\"black\"/>\n";
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace habs
