#pragma once

// Run configuration: JSON with //-comments stripped, validated against the
// module preconditions, round-tripping losslessly through serialization.

#include "sgl/io.hpp"

namespace sgl {

struct RunConfig {
  int background_n = 48;  // unit flat torus grid
  PieceKind kind = PieceKind::CrossCap;
  std::array<int, 2> x0_grid{0, 0};
  std::optional<std::array<int, 2>> x1_grid;
  double k = 2.0;
  std::vector<double> eps_values;
  // Height grid: explicit list or critical window around h_star.
  std::vector<double> h_explicit;
  bool h_window = false;
  double window_D = 2.0;
  int window_points = 21;
  MeshParams mesh;
  double solver_rtol = 1e-9;
  int n_modes = 7;
  std::uint64_t seed = 12345;
  std::string out_dir = "out";

  std::vector<double> h_values() const {
    if (!h_window) return h_explicit;
    auto bg = unit_torus_background(32);
    auto w = choose_h_window(bg, kPi * kPi);
    const double eps_max = *std::max_element(eps_values.begin(), eps_values.end());
    const double half = window_D * std::sqrt(eps_max);
    const double lo = std::max(w.h0 * 1.001, w.h_star - half);
    const double hi = std::min(w.h1 * 0.999, w.h_star + half);
    std::vector<double> hs;
    for (int i = 0; i < window_points; ++i)
      hs.push_back(lo + (hi - lo) * i / std::max(1, window_points - 1));
    return hs;
  }

  SweepConfig sweep_config() const {
    SweepConfig c;
    c.kind = kind;
    c.x0_grid = x0_grid;
    c.x1_grid = x1_grid;
    c.k = k;
    c.eps_values = eps_values;
    c.h_values = h_values();
    c.params = mesh;
    c.params.n_background = background_n;
    c.n_modes = n_modes;
    c.seed = seed;
    return c;
  }

  void validate() const {
    if (eps_values.empty()) throw InvalidParameter("config: eps list is empty");
    for (double e : eps_values)
      if (!(e > 0 && e < 0.5)) throw InvalidParameter("config: eps out of range");
    if (!h_window && h_explicit.empty()) throw InvalidParameter("config: h grid is empty");
    if (kind == PieceKind::Cylinder && !x1_grid)
      throw InvalidParameter("config: cylinder attachment needs x1");
    MeshParams p = mesh;
    p.n_background = background_n;
    p.validate();
    for (double e : eps_values) {
      AttachmentSpec s;
      s.kind = kind;
      s.x0_grid = x0_grid;
      s.x1_grid = x1_grid;
      s.eps = e;
      s.h = h_window ? kPi / std::sqrt(4 * kPi * kPi) : h_explicit.front();
      s.k = k;
      s.validate(p);
    }
  }
};

inline std::string strip_json_comments(const std::string& text) {
  std::string out;
  bool in_string = false;
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '"' && (i == 0 || text[i - 1] != '\\')) in_string = !in_string;
    if (!in_string && text[i] == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      while (i < text.size() && text[i] != '\n') ++i;
      out += '\n';
      continue;
    }
    out += text[i];
  }
  return out;
}

inline RunConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(strip_json_comments(text));
  } catch (const std::exception& e) {
    throw InvalidParameter(std::string("config: JSON parse failure: ") + e.what());
  }
  RunConfig c;
  auto require = [&](const char* field) {
    if (!j.contains(field)) throw InvalidParameter(std::string("config: missing field '") +
                                                   field + "'");
  };
  require("attachment");
  require("eps");

  if (j.contains("background")) {
    const auto& b = j["background"];
    if (b.value("type", "torus") != std::string("torus"))
      throw InvalidParameter("config: only the unit flat torus background is built in");
    c.background_n = b.value("n", 48);
  }
  const auto& a = j["attachment"];
  if (!a.contains("kind")) throw InvalidParameter("config: missing field 'attachment.kind'");
  const std::string kind = a["kind"];
  if (kind == "crosscap")
    c.kind = PieceKind::CrossCap;
  else if (kind == "cylinder")
    c.kind = PieceKind::Cylinder;
  else
    throw InvalidParameter("config: attachment.kind must be crosscap or cylinder");
  if (a.contains("x0")) c.x0_grid = {a["x0"][0].get<int>(), a["x0"][1].get<int>()};
  if (a.contains("x1")) c.x1_grid = {{a["x1"][0].get<int>(), a["x1"][1].get<int>()}};
  c.k = a.value("k", 2.0);

  c.eps_values = j["eps"].get<std::vector<double>>();
  if (j.contains("h_grid")) {
    const auto& h = j["h_grid"];
    const std::string type = h.value("type", "explicit");
    if (type == "explicit") {
      if (!h.contains("values")) throw InvalidParameter("config: missing field 'h_grid.values'");
      c.h_explicit = h["values"].get<std::vector<double>>();
    } else if (type == "critical-window") {
      c.h_window = true;
      c.window_D = h.value("D", 2.0);
      c.window_points = h.value("points", 21);
    } else {
      throw InvalidParameter("config: h_grid.type must be explicit or critical-window");
    }
  } else {
    throw InvalidParameter("config: missing field 'h_grid'");
  }
  if (j.contains("mesh")) {
    const auto& m = j["mesh"];
    c.mesh.n_theta = m.value("n_theta", 64);
    c.mesh.grading_ratio = m.value("grading_ratio", 1.5);
    c.mesh.strip_aspect = m.value("strip_aspect", 4.0);
  }
  if (j.contains("solver")) {
    c.solver_rtol = j["solver"].value("rtol", 1e-9);
    c.n_modes = j["solver"].value("modes", 7);
  }
  c.seed = j.value("seed", 12345);
  c.out_dir = j.value("out", "out");
  c.validate();
  return c;
}

inline Json config_json(const RunConfig& c) {
  Json j;
  j["background"] = {{"type", "torus"}, {"n", c.background_n}};
  j["attachment"] = Json::object();
  j["attachment"]["kind"] = c.kind == PieceKind::CrossCap ? "crosscap" : "cylinder";
  j["attachment"]["x0"] = {c.x0_grid[0], c.x0_grid[1]};
  if (c.x1_grid) j["attachment"]["x1"] = {(*c.x1_grid)[0], (*c.x1_grid)[1]};
  j["attachment"]["k"] = c.k;
  j["eps"] = c.eps_values;
  if (c.h_window)
    j["h_grid"] = {{"type", "critical-window"}, {"D", c.window_D}, {"points", c.window_points}};
  else
    j["h_grid"] = {{"type", "explicit"}, {"values", c.h_explicit}};
  j["mesh"] = {{"n_theta", c.mesh.n_theta},
               {"grading_ratio", c.mesh.grading_ratio},
               {"strip_aspect", c.mesh.strip_aspect}};
  j["solver"] = {{"rtol", c.solver_rtol}, {"modes", c.n_modes}};
  j["seed"] = c.seed;
  j["out"] = c.out_dir;
  return j;
}

inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a(config_json(c).dump())); }

}  // namespace sgl
