#pragma once

// Artifact persistence: sweep CSVs with a fixed column order, spectrum and
// verdict JSON, run manifests with content hashes, and gnuplot emission.

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sgl/lab.hpp"

namespace sgl {

namespace fs = std::filesystem;
using Json = nlohmann::json;

inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Sweep CSV. Column order is part of the external interface.

inline const char* kCsvHeader =
    "eps,h,k,kind,lambda0,lambda1,lambda2,lambda3,lambda4,lambda5,lambda6,branch,n,m_coef,beta,"
    "mass_sigma,mass_piece,predicted_lambda1,f_eps,disc_err,flags";

inline std::string csv_row(const SweepRecord& r) {
  std::ostringstream os;
  os << g17(r.eps) << "," << g17(r.h) << "," << g17(r.k) << "," << to_string(r.kind);
  for (int l = 0; l < 7; ++l)
    os << "," << (l < static_cast<int>(r.lambdas.size()) ? g17(r.lambdas[l]) : "nan");
  os << "," << r.branch << "," << g17(r.n_psi) << "," << g17(r.m_coef) << "," << g17(r.beta)
     << "," << g17(r.mass_sigma) << "," << g17(r.mass_piece) << "," << g17(r.predicted_lambda1)
     << "," << g17(r.f_eps_value) << "," << g17(r.disc_err) << "," << r.flags;
  return os.str();
}

inline SweepRecord parse_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (cells.size() == 20) cells.push_back("");  // empty trailing flags field
  if (cells.size() < 21) throw InvalidParameter("parse_csv_row: malformed row");
  SweepRecord r;
  r.eps = std::stod(cells[0]);
  r.h = std::stod(cells[1]);
  r.k = std::stod(cells[2]);
  r.kind = cells[3] == "crosscap" ? PieceKind::CrossCap : PieceKind::Cylinder;
  for (int l = 0; l < 7; ++l)
    if (cells[4 + l] != "nan") r.lambdas.push_back(std::stod(cells[4 + l]));
  r.branch = std::stoi(cells[11]);
  r.n_psi = std::stod(cells[12]);
  r.m_coef = std::stod(cells[13]);
  r.beta = std::stod(cells[14]);
  r.mass_sigma = std::stod(cells[15]);
  r.mass_piece = std::stod(cells[16]);
  r.predicted_lambda1 = std::stod(cells[17]);
  r.f_eps_value = std::stod(cells[18]);
  r.disc_err = std::stod(cells[19]);
  r.flags = cells[20];
  return r;
}

inline void write_sweep_csv(const fs::path& path, const std::vector<SweepRecord>& records) {
  std::ofstream os(path);
  if (!os) throw SglError("cannot write " + path.string());
  os << kCsvHeader << "\n";
  for (const auto& r : records) os << csv_row(r) << "\n";
}

inline std::vector<SweepRecord> read_sweep_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw SglError("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader)
    throw InvalidParameter("read_sweep_csv: bad header in " + path.string());
  std::vector<SweepRecord> out;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(parse_csv_row(line));
  return out;
}

// ---------------------------------------------------------------------------
// Spectrum and verdict JSON.

inline Json spectrum_json(const Spectrum& s) {
  Json j;
  j["mesh_fingerprint"] = s.mesh_fingerprint;
  j["eigenvalues"] = Json::array();
  j["residuals"] = Json::array();
  for (const auto& p : s.pairs) {
    j["eigenvalues"].push_back(p.value);
    j["residuals"].push_back(p.residual);
  }
  j["stats"] = {{"iterations", s.iterations}, {"shift", s.shift}};
  return j;
}

inline void write_vectors_binary(const fs::path& base, const Spectrum& s) {
  std::ofstream bin(base.string() + ".bin", std::ios::binary);
  int64_t len = s.pairs.empty() ? 0 : s.pairs[0].vector.size();
  for (const auto& p : s.pairs)
    bin.write(reinterpret_cast<const char*>(p.vector.data()), len * sizeof(double));
  Json side;
  side["length"] = len;
  side["count"] = s.pairs.size();
  side["dof_order"] = "global dof index, ascending";
  side["layout"] = "row-major: vector index slow, dof fast, float64 little-endian";
  std::ofstream js(base.string() + ".json");
  js << side.dump(2) << "\n";
}

inline Json verdict_json(const VerdictReport& v) {
  Json j;
  j["criterion"] = v.criterion;
  j["pass"] = v.pass;
  j["inconclusive"] = v.inconclusive;
  j["details"] = v.details;
  j["fitted_constants"] = Json::object();
  for (const auto& [k, val] : v.fitted_constants) j["fitted_constants"][k] = val;
  return j;
}

inline Json quasimode_json(const Quasimode& q, const AttachmentSpec& spec) {
  Json j;
  j["kind"] = to_string(q.kind);
  j["eps"] = spec.eps;
  j["h"] = spec.h;
  j["k"] = spec.k;
  j["lambda_target"] = q.lambda_target;
  j["delta"] = q.delta;
  j["norm_l2"] = q.norm_l2;
  j["defect_terms"] = Json::object();
  for (const auto& [k, val] : q.defect_terms) j["defect_terms"][k] = val;
  return j;
}

// ---------------------------------------------------------------------------
// Run manifest: every output file listed with its content hash.

inline std::uint64_t file_hash(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return fnv1a(ss.str());
}

inline void write_manifest(const fs::path& dir, const std::string& config_hash,
                           const std::vector<fs::path>& files, double seconds) {
  Json j;
  j["config_hash"] = config_hash;
  j["code_version"] = "sgl 0.1.0";
  j["timing_seconds"] = seconds;
  j["environment"] = {{"eigen", EIGEN_WORLD_VERSION * 10000 + EIGEN_MAJOR_VERSION * 100 +
                                    EIGEN_MINOR_VERSION}};
  j["files"] = Json::array();
  for (const auto& f : files)
    j["files"].push_back({{"path", f.filename().string()}, {"fnv64", hex64(file_hash(f))}});
  std::ofstream os(dir / "manifest.json");
  os << j.dump(2) << "\n";
}

inline bool verify_manifest(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) return false;
  Json j = Json::parse(is);
  for (const auto& f : j["files"]) {
    const fs::path p = dir / f["path"].get<std::string>();
    if (!fs::exists(p)) return false;
    if (hex64(file_hash(p)) != f["fnv64"].get<std::string>()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Plot emission: data files plus gnuplot scripts that reference them.

inline void emit_plots(const fs::path& dir, const std::vector<SweepRecord>& records) {
  if (records.empty()) throw InvalidParameter("emit_plots: empty sweep");

  std::set<double> eps_set;
  for (const auto& r : records) eps_set.insert(r.eps);

  {
    std::ofstream dat(dir / "branches.dat");
    dat << "# eps h lambda1..lambda6\n";
    for (const auto& r : records) {
      if (r.failed()) continue;
      dat << g17(r.eps) << " " << g17(r.h);
      for (size_t l = 1; l < r.lambdas.size(); ++l) dat << " " << g17(r.lambdas[l]);
      dat << "\n";
    }
    std::ofstream gp(dir / "branches.gp");
    gp << "set xlabel 'h'\nset ylabel 'lambda_l'\nset key outside\n";
    gp << "plot for [l=3:8] 'branches.dat' using 2:l with linespoints title sprintf('mode "
          "%d', l-2)\n";
  }
  {
    std::ofstream dat(dir / "mass_sigma.dat");
    dat << "# eps h mass_sigma\n";
    for (const auto& r : records)
      if (!r.failed()) dat << g17(r.eps) << " " << g17(r.h) << " " << g17(r.mass_sigma) << "\n";
    std::ofstream gp(dir / "mass_sigma.gp");
    gp << "set xlabel 'h'\nset ylabel 'L2 mass on the background'\nset yrange [0:1.05]\n";
    gp << "plot 'mass_sigma.dat' using 2:3 with linespoints title 'c_eps transition'\n";
  }
  {
    std::ofstream dat(dir / "residual_rate.dat");
    dat << "# eps |lambda1_measured - lambda1_predicted|\n";
    for (const auto& r : records) {
      if (r.failed() || r.lambdas.size() < 2 || r.predicted_lambda1 == 0) continue;
      dat << g17(r.eps) << " " << g17(std::abs(r.lambdas[1] - r.predicted_lambda1)) << "\n";
    }
    std::ofstream gp(dir / "residual_rate.gp");
    gp << "set logscale xy\nset xlabel 'eps'\nset ylabel 'prediction residual'\n";
    gp << "plot 'residual_rate.dat' using 1:2 with points title 'residual'\n";
  }
}

}  // namespace sgl
