#pragma once

// Command-line entry points: spectrum, sweep, verify, plot. Exit codes:
// 0 pass, 1 verdict failure, 2 config error, 3 solver failure,
// 4 inconclusive.

#include <chrono>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "sgl/config.hpp"

namespace sgl {

inline int exit_code_for(const VerdictReport& v) {
  if (v.inconclusive) return 4;
  return v.pass ? 0 : 1;
}

struct CliOptions {
  std::string config_path;
  std::string out_dir;  // overrides config when set
  int workers = 0;      // 0: hardware concurrency
  std::uint64_t seed = 0;  // 0: keep config seed
  int refine = 0;
  bool vectors = false;
  std::string criterion;  // for verify
};

inline RunConfig load_config(const CliOptions& opt) {
  std::ifstream is(opt.config_path);
  if (!is) throw InvalidParameter("config: cannot open " + opt.config_path);
  std::ostringstream ss;
  ss << is.rdbuf();
  RunConfig c = parse_config(ss.str());
  if (!opt.out_dir.empty()) c.out_dir = opt.out_dir;
  if (opt.seed != 0) c.seed = opt.seed;
  if (opt.refine > 0) {
    MeshParams p = c.mesh;
    p.n_background = c.background_n;
    p = p.refined(opt.refine);
    c.background_n = p.n_background;
    c.mesh = p;
    const int f = 1 << opt.refine;
    c.x0_grid = {c.x0_grid[0] * f, c.x0_grid[1] * f};
    if (c.x1_grid) c.x1_grid = {{(*c.x1_grid)[0] * f, (*c.x1_grid)[1] * f}};
  }
  return c;
}

// ---------------------------------------------------------------------------
// spectrum: one (eps, h) point; writes spectrum JSON, mesh export, and the
// quasimode report log.
inline int cmd_spectrum(const CliOptions& opt) {
  RunConfig cfg = load_config(opt);
  fs::create_directories(cfg.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  SweepConfig sc = cfg.sweep_config();
  const double eps = sc.eps_values.front();
  const double h = sc.h_values.front();

  auto p = GluedProblem::build(attachment_for(sc, eps, h), sc.params, 9, cfg.seed);
  SolveOptions so;
  so.m = cfg.n_modes;
  so.seed = cfg.seed;
  so.rtol = cfg.solver_rtol;
  auto spectrum = solve_lowest(p.forms.stiffness, p.forms.mass, so);
  spectrum.mesh_fingerprint = mesh_fingerprint(p.glued);

  std::vector<fs::path> files;
  const fs::path dir = cfg.out_dir;
  {
    std::ofstream os(dir / "spectrum.json");
    os << spectrum_json(spectrum).dump(2) << "\n";
    files.push_back(dir / "spectrum.json");
  }
  {
    std::ofstream os(dir / "mesh.txt");
    os << export_mesh(p.glued);
    files.push_back(dir / "mesh.txt");
  }
  if (opt.vectors) {
    write_vectors_binary(dir / "vectors", spectrum);
    files.push_back(dir / "vectors.bin");
    files.push_back(dir / "vectors.json");
  }
  {
    std::ofstream os(dir / "quasimodes.jsonl");
    auto zero = quasimode_zero_extension(p.glued, p.forms, *p.dual);
    os << quasimode_json(zero, p.spec).dump() << "\n";
    if (cfg.kind == PieceKind::CrossCap && p.basis.eval0 > 0) {
      const double lambda = model_lambda0(p.spec.piece());
      auto kern = deflated_resolvent(p.closed, p.closed_forms, p.bg_spectrum, p.basis, 0, lambda);
      auto green = quasimode_crosscap_green(kern, p.glued, p.transfer, p.forms, *p.dual);
      auto chi = quasimode_crosscap_chi(kern, p.glued, p.transfer, p.basis, p.forms, *p.dual);
      auto surf = quasimode_surface(p.basis.vectors[0], p.basis.eval0, p.lambda1_bg(), p.glued,
                                    p.transfer, p.forms, *p.dual);
      os << quasimode_json(green, p.spec).dump() << "\n";
      os << quasimode_json(chi, p.spec).dump() << "\n";
      os << quasimode_json(surf, p.spec).dump() << "\n";
    }
    if (cfg.kind == PieceKind::Cylinder && p.basis.eval0 < 1e-6) {
      auto bridge = quasimode_neumann_bridge(p.basis.vectors[0], p.basis.pole_values[0][0],
                                             p.basis.pole_values[1][0], p.lambda1_bg(), p.glued,
                                             p.transfer, p.forms, *p.dual);
      os << quasimode_json(bridge, p.spec).dump() << "\n";
    }
    files.push_back(dir / "quasimodes.jsonl");
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(dir, config_hash(cfg), files, secs);
  return 0;
}

// ---------------------------------------------------------------------------
// sweep: grid of (eps, h), resumable, parallel across grid points.
inline int cmd_sweep(const CliOptions& opt) {
  RunConfig cfg = load_config(opt);
  fs::create_directories(cfg.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  SweepConfig sc = cfg.sweep_config();
  const fs::path csv = fs::path(cfg.out_dir) / "sweep.csv";

  std::vector<SweepRecord> done;
  if (fs::exists(csv)) done = read_sweep_csv(csv);
  auto already = [&](double eps, double h) {
    for (const auto& r : done)
      if (std::abs(r.eps - eps) < 1e-12 && std::abs(r.h - h) < 1e-12 && !r.failed()) return true;
    return false;
  };

  std::vector<std::pair<double, double>> todo;
  for (double eps : sc.eps_values)
    for (double h : sc.h_values)
      if (!already(eps, h)) todo.emplace_back(eps, h);

  std::vector<SweepRecord> fresh(todo.size());
  std::mutex mtx;
  size_t next = 0;
  const int n_workers =
      opt.workers > 0 ? opt.workers : std::max(1u, std::thread::hardware_concurrency());
  auto worker = [&]() {
    for (;;) {
      size_t i;
      {
        std::lock_guard<std::mutex> lk(mtx);
        if (next >= todo.size()) return;
        i = next++;
      }
      logf(1, "sweep point eps=" + std::to_string(todo[i].first) +
                  " h=" + std::to_string(todo[i].second));
      fresh[i] = sweep_point(sc, todo[i].first, todo[i].second);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::vector<SweepRecord> all = done;
  // Drop stale failed rows that were recomputed.
  all.erase(std::remove_if(all.begin(), all.end(),
                           [&](const SweepRecord& r) {
                             if (!r.failed()) return false;
                             for (const auto& [e, h] : todo)
                               if (std::abs(r.eps - e) < 1e-12 && std::abs(r.h - h) < 1e-12)
                                 return true;
                             return false;
                           }),
            all.end());
  all.insert(all.end(), fresh.begin(), fresh.end());
  std::sort(all.begin(), all.end(), [](const SweepRecord& a, const SweepRecord& b) {
    return std::tie(a.eps, a.h) < std::tie(b.eps, b.h);
  });
  write_sweep_csv(csv, all);

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg.out_dir, config_hash(cfg), {csv}, secs);

  int failed = 0;
  for (const auto& r : all)
    if (r.failed()) ++failed;
  const double ok_fraction = all.empty() ? 0 : 1.0 - double(failed) / all.size();
  return ok_fraction >= 0.9 ? 0 : 3;
}

// ---------------------------------------------------------------------------
// verify: run one acceptance-style criterion and write its verdict.
inline int cmd_verify(const CliOptions& opt) {
  RunConfig cfg = load_config(opt);
  fs::create_directories(cfg.out_dir);
  SweepConfig sc = cfg.sweep_config();
  VerdictReport v;
  if (opt.criterion == "main2") {
    if (cfg.kind != PieceKind::CrossCap)
      throw InvalidParameter("verify main2: cross-cap configuration required");
    v = verify_main2(sc, sc.eps_values, cfg.window_D);
  } else if (opt.criterion == "main1") {
    if (cfg.kind == PieceKind::Cylinder)
      v = verify_main1_cylinder(sc, sc.eps_values);
    else
      v = verify_main1_crosscap_notice();
  } else if (opt.criterion == "conv") {
    v = verify_limit_spectrum(sc, sc.h_values.front());
  } else if (opt.criterion == "bounds") {
    v = verify_bounds(sc, sc.h_values.front());
  } else if (opt.criterion == "tail") {
    if (cfg.kind != PieceKind::Cylinder)
      throw InvalidParameter("verify tail: symmetric cylinder configuration required");
    v = verify_tail(sc, sc.eps_values.back());
  } else {
    throw InvalidParameter("verify: unknown criterion " + opt.criterion);
  }
  std::ofstream os(fs::path(cfg.out_dir) / ("verdict_" + opt.criterion + ".json"));
  os << verdict_json(v).dump(2) << "\n";
  std::printf("%s: %s\n", v.criterion.c_str(),
              v.inconclusive ? "INCONCLUSIVE" : (v.pass ? "PASS" : "FAIL"));
  return exit_code_for(v);
}

// ---------------------------------------------------------------------------
// plot: emit gnuplot scripts + data from a sweep CSV.
inline int cmd_plot(const CliOptions& opt, const std::string& csv_path) {
  const fs::path csv = csv_path;
  if (!fs::exists(csv)) throw InvalidParameter("plot: no such CSV " + csv_path);
  auto records = read_sweep_csv(csv);
  if (records.empty()) throw InvalidParameter("plot: CSV has no data rows");
  const fs::path dir = opt.out_dir.empty() ? csv.parent_path() : fs::path(opt.out_dir);
  fs::create_directories(dir);
  emit_plots(dir, records);
  return 0;
}

// ---------------------------------------------------------------------------
inline int run_cli(int argc, char** argv) {
  CLI::App app{"spectral gluing laboratory"};
  app.require_subcommand(1);
  CliOptions opt;
  std::string csv_path;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config)
      sub->add_option("--config", opt.config_path, "run configuration JSON")->required();
    sub->add_option("--out", opt.out_dir, "output directory (overrides config)");
    sub->add_option("--workers", opt.workers, "worker threads (default: hardware)");
    sub->add_option("--seed", opt.seed, "override config seed");
    sub->add_option("--refine", opt.refine, "extra mesh refinement levels");
  };

  auto* s_spectrum = app.add_subcommand("spectrum", "solve one (eps, h) point");
  add_common(s_spectrum, true);
  s_spectrum->add_flag("--vectors", opt.vectors, "write eigenvectors as flat binary + sidecar");

  auto* s_sweep = app.add_subcommand("sweep", "run the (eps, h) grid");
  add_common(s_sweep, true);

  auto* s_verify = app.add_subcommand("verify", "run a verification criterion");
  add_common(s_verify, true);
  s_verify->add_option("criterion", opt.criterion, "main1|main2|conv|bounds|tail")->required();

  auto* s_plot = app.add_subcommand("plot", "emit gnuplot scripts from a sweep CSV");
  s_plot->add_option("csv", csv_path, "sweep CSV path")->required();
  s_plot->add_option("--out", opt.out_dir, "output directory (default: CSV directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (s_spectrum->parsed()) return cmd_spectrum(opt);
    if (s_sweep->parsed()) return cmd_sweep(opt);
    if (s_verify->parsed()) return cmd_verify(opt);
    if (s_plot->parsed()) return cmd_plot(opt, csv_path);
  } catch (const InvalidParameter& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const SolverFailure& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 3;
  } catch (const SglError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }
  return 2;
}

}  // namespace sgl
