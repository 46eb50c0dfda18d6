#pragma once

// Closed-form layer: model spectra of the flat pieces, admissible height
// windows, the implicit concentration ratio f_eps, and the predicted
// first-eigenvalue expansion. Pure scalar arithmetic, no meshes.

#include <algorithm>
#include <functional>
#include <optional>

#include "sgl/core.hpp"

namespace sgl {

enum class PieceKind { CrossCap, Cylinder };

inline const char* to_string(PieceKind k) {
  return k == PieceKind::CrossCap ? "crosscap" : "cylinder";
}

// Flat cylinder S^1(eps) x [0,h], or its cross-cap quotient by
// (theta, t) ~ (theta + pi, h - t). Areas are fundamental-domain areas:
// pi*eps*h for the cross cap, 2*pi*eps*h for the cylinder.
struct ModelPiece {
  PieceKind kind = PieceKind::CrossCap;
  double eps = 0.0;
  double h = 0.0;
  double k = 2.0;  // gluing exponent; removed-ball radius is eps^k

  void validate() const {
    if (!(eps > 0)) throw InvalidParameter("ModelPiece: eps must be > 0");
    if (!(h > 0)) throw InvalidParameter("ModelPiece: h must be > 0");
    if (!(k >= 1)) throw InvalidParameter("ModelPiece: k must be >= 1");
  }

  double area() const {
    validate();
    return (kind == PieceKind::CrossCap ? kPi : kTwoPi) * eps * h;
  }

  double ball_radius() const { return std::pow(eps, k); }
};

// Smallest Dirichlet eigenvalue of either flat piece: pi^2/h^2.
inline double model_lambda0(const ModelPiece& piece) {
  piece.validate();
  return kPi * kPi / (piece.h * piece.h);
}

// Rotationally symmetric Dirichlet eigenvalues, ascending.
// Cylinder: n^2 pi^2 / h^2 for all n >= 1. Cross cap: only odd n survive,
// because the identification (theta,t) ~ (theta+pi, h-t) forces a
// rotationally symmetric profile to satisfy u(t) = u(h-t), and
// sin(n pi (h-t)/h) = (-1)^{n+1} sin(n pi t / h).
inline std::vector<double> model_dirichlet_spectrum(const ModelPiece& piece, int n_max) {
  piece.validate();
  if (n_max < 1) throw InvalidParameter("model_dirichlet_spectrum: n_max >= 1");
  std::vector<double> out;
  out.reserve(n_max);
  const double base = kPi * kPi / (piece.h * piece.h);
  int n = 1;
  while (static_cast<int>(out.size()) < n_max) {
    out.push_back(double(n) * double(n) * base);
    n += (piece.kind == PieceKind::CrossCap) ? 2 : 1;
  }
  return out;
}

// First nonzero Neumann eigenvalue of the flat cylinder. For eps < h/pi the
// rotationally symmetric mode cos(pi t/h) sits below the first
// circumferential mode (eigenvalue 1/eps^2) and mu_1 = pi^2/h^2 = lambda_0.
struct Mu1Result {
  double value;
  bool near_crossover;  // eps within 10% of the h/pi crossover
};

inline Mu1Result model_mu1(const ModelPiece& piece) {
  piece.validate();
  if (piece.kind != PieceKind::Cylinder)
    throw InvalidParameter("model_mu1: defined for cylinders only");
  const double crossover = piece.h / kPi;
  if (!(piece.eps < crossover))
    throw ModeCrossing("model_mu1: eps >= h/pi, circumferential mode at or below pi^2/h^2");
  return {kPi * kPi / (piece.h * piece.h), piece.eps > 0.9 * crossover};
}

// Pointwise value of the L^2-normalized ground state at height t,
// parametrized on the covering strip. Cross cap: (pi eps h/2)^{-1/2}
// sin(pi t/h); cylinder carries an extra 1/sqrt(2).
inline double psi_profile(const ModelPiece& piece, double t) {
  piece.validate();
  const double slack = 16.0 * std::numeric_limits<double>::epsilon() * piece.h;
  if (t < -slack || t > piece.h + slack) throw DomainError("psi_profile: t outside [0,h]");
  t = std::clamp(t, 0.0, piece.h);
  double amp = 1.0 / std::sqrt(kPi * piece.eps * piece.h / 2.0);
  if (piece.kind == PieceKind::Cylinder) amp /= std::sqrt(2.0);
  return amp * std::sin(t * kPi / piece.h);
}

// Integral of the ground state over the piece (fundamental domain).
// Cross cap: 4 (h/2pi)^{1/2} eps^{1/2}. Cylinder: the same profile with the
// 1/sqrt(2) normalization integrated over both fundamental-domain copies,
// 4 (h/pi)^{1/2} eps^{1/2}.
inline double psi_l1_norm(const ModelPiece& piece) {
  piece.validate();
  if (piece.kind == PieceKind::CrossCap)
    return 4.0 * std::sqrt(piece.h / kTwoPi) * std::sqrt(piece.eps);
  return 4.0 * std::sqrt(piece.h / kPi) * std::sqrt(piece.eps);
}

// Total outward flux of the ground state through the boundary.
// Cross cap: -(2pi/h)^{3/2} eps^{1/2}; cylinder: -4 (pi/h)^{3/2} eps^{1/2}
// (both boundary circles).
inline double psi_boundary_flux(const ModelPiece& piece) {
  piece.validate();
  if (piece.kind == PieceKind::CrossCap)
    return -std::pow(kTwoPi / piece.h, 1.5) * std::sqrt(piece.eps);
  return -4.0 * std::pow(kPi / piece.h, 1.5) * std::sqrt(piece.eps);
}

// Background spectrum with an analytic evaluator where available.
// eigenvalues[] is sorted ascending, counted with multiplicity, starting at 0.
struct BackgroundSpectrum {
  std::vector<double> eigenvalues;
  // evaluator(l, x, y): value of the l-th basis eigenfunction at (x, y).
  std::function<double(int, double, double)> evaluator;
  double area = 1.0;

  void validate() const {
    if (eigenvalues.empty() || std::abs(eigenvalues[0]) > 1e-12)
      throw InvalidParameter("BackgroundSpectrum: first eigenvalue must be 0");
    if (eigenvalues.size() > 1 && eigenvalues[1] <= 1e-12)
      throw InvalidParameter("BackgroundSpectrum: zero eigenvalue must be simple");
    if (!std::is_sorted(eigenvalues.begin(), eigenvalues.end()))
      throw InvalidParameter("BackgroundSpectrum: eigenvalues must be ascending");
  }

  double lambda1() const {
    validate();
    return eigenvalues.at(1);
  }

  int multiplicity_lambda1(double rel_tol = 1e-9) const {
    const double l1 = lambda1();
    int K = 0;
    for (size_t i = 1; i < eigenvalues.size(); ++i)
      if (std::abs(eigenvalues[i] - l1) <= rel_tol * l1) ++K;
    return K;
  }

  double lambda_after_cluster() const {
    const int K = multiplicity_lambda1();
    if (1 + K >= static_cast<int>(eigenvalues.size()))
      throw InvalidParameter("BackgroundSpectrum: need eigenvalues beyond the lambda1 cluster");
    return eigenvalues[1 + K];
  }
};

// Flat unit torus [0,1)^2: eigenvalues 4 pi^2 (p^2 + q^2), eigenfunctions
// sqrt(2) cos/sin(2 pi (p x + q y)) over canonical lattice representatives.
struct TorusMode {
  int p, q;
  bool is_sin;  // false for the cos branch; (0,0) is the constant
};

inline std::vector<TorusMode> torus_modes(int n_modes) {
  struct Entry {
    long norm2;
    int p, q;
  };
  std::vector<Entry> lattice;
  const int P = static_cast<int>(std::sqrt(double(n_modes))) + 3;
  for (int p = -P; p <= P; ++p)
    for (int q = -P; q <= P; ++q) {
      const bool canonical = (p > 0) || (p == 0 && q > 0);
      if (canonical) lattice.push_back({long(p) * p + long(q) * q, p, q});
    }
  std::sort(lattice.begin(), lattice.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.norm2, a.p, a.q) < std::tie(b.norm2, b.p, b.q);
  });
  std::vector<TorusMode> modes;
  modes.push_back({0, 0, false});
  for (const auto& e : lattice) {
    if (static_cast<int>(modes.size()) >= n_modes) break;
    modes.push_back({e.p, e.q, false});
    modes.push_back({e.p, e.q, true});
  }
  modes.resize(std::min<size_t>(modes.size(), n_modes));
  return modes;
}

inline double torus_mode_value(const TorusMode& m, double x, double y) {
  if (m.p == 0 && m.q == 0) return 1.0;
  const double phase = kTwoPi * (m.p * x + m.q * y);
  return std::sqrt(2.0) * (m.is_sin ? std::sin(phase) : std::cos(phase));
}

inline BackgroundSpectrum unit_torus_background(int n_modes = 64) {
  auto modes = std::make_shared<std::vector<TorusMode>>(torus_modes(n_modes));
  BackgroundSpectrum bg;
  bg.area = 1.0;
  for (const auto& m : *modes)
    bg.eigenvalues.push_back(4.0 * kPi * kPi * (double(m.p) * m.p + double(m.q) * m.q));
  std::sort(bg.eigenvalues.begin(), bg.eigenvalues.end());
  bg.evaluator = [modes](int l, double x, double y) {
    return torus_mode_value(modes->at(l), x, y);
  };
  return bg;
}

// Admissible height window around the critical height h_star = pi/sqrt(lambda1):
//   pi^2/h1^2 < lambda1 < pi^2/h0^2 < lambda_{K+1}, pi^2/h0^2 <= lambda_{K+1} - delta0.
struct HWindow {
  double lambda1 = 0;
  double lambdaK1 = 0;
  int K = 0;
  double delta0 = 0;
  double h0 = 0, h1 = 0;
  double h_star = 0;

  void check() const {
    const double pi2 = kPi * kPi;
    if (!(pi2 / (h1 * h1) < lambda1)) throw InvalidParameter("HWindow: pi^2/h1^2 < lambda1 fails");
    if (!(lambda1 < pi2 / (h0 * h0))) throw InvalidParameter("HWindow: lambda1 < pi^2/h0^2 fails");
    if (!(pi2 / (h0 * h0) < lambdaK1)) throw InvalidParameter("HWindow: pi^2/h0^2 < lambdaK1 fails");
    if (!(pi2 / (h0 * h0) <= lambdaK1 - delta0))
      throw InvalidParameter("HWindow: pi^2/h0^2 <= lambdaK1 - delta0 fails");
    if (!(std::abs(lambda1 - pi2 / (h_star * h_star)) <= 1e-9 * lambda1))
      throw InvalidParameter("HWindow: h_star mismatch");
    if (!(delta0 < lambda1 && lambda1 < lambdaK1 - delta0))
      throw InvalidParameter("HWindow: delta0 window fails");
  }
};

// h0 sits at the geometric midpoint of (pi/sqrt(lambdaK1 - delta0), h_star);
// h1 is placed so that pi^2/h1^2 = lambda1/2. Both are recorded in output
// manifests; the theory constrains only the window, not the placement.
inline HWindow choose_h_window(const BackgroundSpectrum& bg, double delta0) {
  bg.validate();
  HWindow w;
  w.lambda1 = bg.lambda1();
  w.K = bg.multiplicity_lambda1();
  w.lambdaK1 = bg.lambda_after_cluster();
  w.delta0 = delta0;
  if (!(w.lambdaK1 - delta0 > w.lambda1))
    throw InfeasibleWindow("choose_h_window: lambdaK1 - delta0 <= lambda1");
  if (!(delta0 > 0 && delta0 < w.lambda1))
    throw InvalidParameter("choose_h_window: need 0 < delta0 < lambda1");
  w.h_star = kPi / std::sqrt(w.lambda1);
  const double h_lo = kPi / std::sqrt(w.lambdaK1 - delta0);
  w.h0 = std::sqrt(h_lo * w.h_star);
  w.h1 = kPi * std::sqrt(2.0 / w.lambda1);
  w.check();
  return w;
}

// Positive root of f^2 + b f - 1 = 0 with
//   b = (h/2pi)^{3/2} (lambda1 - pi^2/h^2) eps^{-1/2} / phi0_x0      (cross cap)
//   b = (1/2)(h/pi)^{3/2} (lambda1 - pi^2/h^2) eps^{-1/2} / phi0_x0  (cylinder),
// where phi0_x0 means phi_0(x_0) + phi_0(x_1) in the cylinder case.
// The stable branch 2/(b + sqrt(b^2+4)) is used for b > 0 since
// eps^{-1/2} makes b large in sweeps.
inline double f_eps_coefficient(double h, double eps, double lambda1, double phi0_x0,
                                PieceKind kind) {
  if (!(phi0_x0 > 0)) throw InvalidParameter("f_eps: phi0 evaluation must be positive");
  if (!(eps > 0)) throw InvalidParameter("f_eps: eps must be positive");
  if (!(h > 0)) throw InvalidParameter("f_eps: h must be positive");
  const double lambda = kPi * kPi / (h * h);
  const double diff = lambda1 - lambda;
  if (kind == PieceKind::CrossCap)
    return std::pow(h / kTwoPi, 1.5) * diff / (std::sqrt(eps) * phi0_x0);
  return 0.5 * std::pow(h / kPi, 1.5) * diff / (std::sqrt(eps) * phi0_x0);
}

inline double positive_quadratic_root(double b) {
  const double disc = std::sqrt(b * b + 4.0);
  return b > 0 ? 2.0 / (b + disc) : 0.5 * (-b + disc);
}

inline double f_eps(double h, double eps, double lambda1, double phi0_x0, PieceKind kind) {
  return positive_quadratic_root(f_eps_coefficient(h, eps, lambda1, phi0_x0, kind));
}

// Leading-order prediction for lambda_1(Sigma_{eps,h}):
//   lambda1 - f_eps(h)^{-1} lambda1 phi0(x0) eps^{1/2},
// with remainder on scale eps log(1/eps).
struct Prediction {
  double lambda_model = 0;       // pi^2/h^2
  double f_eps = 0;              // positive root of the implicit equation
  double lambda1_predicted = 0;  // leading-order expansion value
  double error_scale = 0;        // eps log(1/eps)
  bool in_window = true;         // h within [h* - D sqrt(eps), h* + D sqrt(eps)]
};

inline Prediction predicted_lambda1(double eps, double h, double lambda1, double phi0_x0,
                                    PieceKind kind, double window_D = 2.0) {
  Prediction p;
  p.lambda_model = kPi * kPi / (h * h);
  p.f_eps = f_eps(h, eps, lambda1, phi0_x0, kind);
  p.lambda1_predicted = lambda1 - lambda1 * phi0_x0 * std::sqrt(eps) / p.f_eps;
  p.error_scale = eps * std::log(1.0 / eps);
  const double h_star = kPi / std::sqrt(lambda1);
  p.in_window = std::abs(h - h_star) <= window_D * std::sqrt(eps);
  return p;
}

// Height rule from the monotonicity proof: pi^2/h_eps^2 = pi^2/h_star^2 + eps^{3/4}.
inline double h_eps_rule(double eps, double h_star) {
  if (!(eps > 0)) throw InvalidParameter("h_eps_rule: eps must be positive");
  return kPi / std::sqrt(kPi * kPi / (h_star * h_star) + std::pow(eps, 0.75));
}

// Reordered union of the background spectrum and the rotationally symmetric
// Dirichlet spectrum of the piece; the eps -> 0 limit spectrum.
inline std::vector<double> merged_limit_spectrum(const BackgroundSpectrum& bg, PieceKind kind,
                                                 double h, int n_max) {
  bg.validate();
  if (n_max < 1) throw InvalidParameter("merged_limit_spectrum: n_max >= 1");
  ModelPiece piece{kind, 1.0, h, 2.0};  // eps is irrelevant for the model spectrum
  std::vector<double> merged = bg.eigenvalues;
  const auto dir = model_dirichlet_spectrum(piece, n_max);
  merged.insert(merged.end(), dir.begin(), dir.end());
  std::sort(merged.begin(), merged.end());
  merged.resize(std::min<size_t>(merged.size(), n_max));
  return merged;
}

// Area of the glued surface: background minus the removed polygonal ball(s)
// plus the fundamental-domain area of the piece. The removed-ball term uses
// the disk area pi eps^{2k}; the o(1) polygonal deficit is tracked by meshes.
inline double glued_area(double bg_area, const ModelPiece& piece) {
  piece.validate();
  const double r = piece.ball_radius();
  const int n_balls = piece.kind == PieceKind::CrossCap ? 1 : 2;
  return bg_area - n_balls * kPi * r * r + piece.area();
}

}  // namespace sgl
