#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Error hierarchy. Every module throws SglError subclasses so the CLI can
// map failures onto its exit-code convention.
struct SglError : std::runtime_error {
  explicit SglError(const std::string& msg) : std::runtime_error(msg) {}
};
struct InvalidParameter : SglError {
  explicit InvalidParameter(const std::string& msg) : SglError("invalid-parameter: " + msg) {}
};
struct DomainError : SglError {
  explicit DomainError(const std::string& msg) : SglError("domain-error: " + msg) {}
};
struct ModeCrossing : SglError {
  explicit ModeCrossing(const std::string& msg) : SglError("mode-crossing: " + msg) {}
};
struct InfeasibleWindow : SglError {
  explicit InfeasibleWindow(const std::string& msg) : SglError("infeasible-window: " + msg) {}
};
struct MeshError : SglError {
  explicit MeshError(const std::string& msg) : SglError("mesh-error: " + msg) {}
};
struct GluingMismatch : SglError {
  explicit GluingMismatch(const std::string& msg) : SglError("gluing-mismatch: " + msg) {}
};
struct SolverFailure : SglError {
  explicit SolverFailure(const std::string& msg) : SglError("solver-failure: " + msg) {}
};
struct HypothesisViolated : SglError {
  explicit HypothesisViolated(const std::string& msg) : SglError("hypothesis-violated: " + msg) {}
};

// Verbosity from SGL_LOG (0 = silent, 1 = progress, 2 = chatty).
inline int log_level() {
  static int lvl = [] {
    const char* v = std::getenv("SGL_LOG");
    return v ? std::atoi(v) : 0;
  }();
  return lvl;
}

inline void logf(int level, const std::string& msg) {
  if (log_level() >= level) std::fprintf(stderr, "[sgl] %s\n", msg.c_str());
}

// Least-squares line fit of y against x; used for all log-log rate fits.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int n_points = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidParameter("fit_line needs >= 2 points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  if (std::abs(det) < 1e-300) throw InvalidParameter("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / n;
  f.n_points = static_cast<int>(x.size());
  const double ss_tot = syy - sy * sy / n;
  double ss_res = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.slope * x[i] + f.intercept);
    ss_res += e * e;
  }
  f.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

inline LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0 && y[i] > 0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  return fit_line(lx, ly);
}

// Deterministic RNG for starting blocks and property tests.
inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// FNV-1a, used for config/output fingerprints in manifests.
inline std::uint64_t fnv1a(const std::string& data, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace sgl
