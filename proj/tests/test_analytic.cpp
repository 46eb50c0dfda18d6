#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "sgl/analytic.hpp"

using namespace sgl;
using Catch::Approx;

namespace {

ModelPiece piece(PieceKind k, double eps, double h, double kk = 2.0) { return {k, eps, h, kk}; }

std::mt19937_64 rng(20240611u);

double uniform(double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

}  // namespace

TEST_CASE("model_lambda0 closed form and oracle") {
  CHECK(model_lambda0(piece(PieceKind::CrossCap, 0.1, 1.0)) == Approx(kPi * kPi).epsilon(1e-14));
  CHECK(model_lambda0(piece(PieceKind::Cylinder, 0.3, kPi)) == Approx(1.0).epsilon(1e-14));
  CHECK(model_lambda0(piece(PieceKind::CrossCap, 0.01, 0.5)) ==
        Approx(4 * kPi * kPi).epsilon(1e-14));
  CHECK_THROWS_AS(model_lambda0(piece(PieceKind::CrossCap, 0.1, -1.0)), InvalidParameter);

  // Independent 1-D Sturm-Liouville route.
  auto oracle = oracles::dirichlet_eigenvalues_fd(0.5, 1, false);
  CHECK(model_lambda0(piece(PieceKind::Cylinder, 0.01, 0.5)) == Approx(oracle[0]).epsilon(1e-9));
}

TEST_CASE("model_dirichlet_spectrum vs 1-D oracle with symmetry projection") {
  auto cc = model_dirichlet_spectrum(piece(PieceKind::CrossCap, 0.1, 1.0), 3);
  CHECK(cc[0] == Approx(kPi * kPi));
  CHECK(cc[1] == Approx(9 * kPi * kPi));
  CHECK(cc[2] == Approx(25 * kPi * kPi));

  auto cyl = model_dirichlet_spectrum(piece(PieceKind::Cylinder, 0.1, 1.0), 3);
  CHECK(cyl[0] == Approx(kPi * kPi));
  CHECK(cyl[1] == Approx(4 * kPi * kPi));
  CHECK(cyl[2] == Approx(9 * kPi * kPi));

  CHECK(model_dirichlet_spectrum(piece(PieceKind::Cylinder, 0.1, 2.0), 1)[0] ==
        Approx(kPi * kPi / 4));

  auto occ = oracles::dirichlet_eigenvalues_fd(1.0, 3, true);
  auto ocyl = oracles::dirichlet_eigenvalues_fd(1.0, 3, false);
  for (int i = 0; i < 3; ++i) {
    CHECK(cc[i] == Approx(occ[i]).epsilon(1e-8));
    CHECK(cyl[i] == Approx(ocyl[i]).epsilon(1e-8));
  }
}

TEST_CASE("analytic layer matches oracles over random parameters") {
  for (int trial = 0; trial < 50; ++trial) {
    const double eps = uniform(0.005, 0.2);
    const double h = uniform(0.2, 3.0);
    const PieceKind kind = (trial % 2 == 0) ? PieceKind::CrossCap : PieceKind::Cylinder;
    const ModelPiece p = piece(kind, eps, h);

    auto spec = model_dirichlet_spectrum(p, 2);
    auto oracle = oracles::dirichlet_eigenvalues_fd(h, 2, kind == PieceKind::CrossCap);
    CHECK(model_lambda0(p) == Approx(oracle[0]).epsilon(1e-8));
    CHECK(spec[0] == Approx(oracle[0]).epsilon(1e-8));
    CHECK(spec[1] == Approx(oracle[1]).epsilon(1e-8));

    // L1 norm: quadrature of the profile times the fundamental-domain width.
    const double width = (kind == PieceKind::CrossCap ? kPi : kTwoPi) * eps;
    const double l1 =
        width * oracles::integrate([&](double t) { return psi_profile(p, t); }, 0.0, h);
    CHECK(psi_l1_norm(p) == Approx(l1).epsilon(1e-9));

    // Flux: numerical normal derivative at t = 0 times total boundary length.
    const double dpsi =
        oracles::derivative_at_left([&](double t) { return psi_profile(p, t); }, 0.0, h * 5e-3);
    const double boundary_len = kTwoPi * eps * (kind == PieceKind::CrossCap ? 1.0 : 2.0);
    CHECK(psi_boundary_flux(p) == Approx(-dpsi * boundary_len).epsilon(1e-8));
  }
}

TEST_CASE("psi_profile values and domain") {
  CHECK(psi_profile(piece(PieceKind::CrossCap, 0.3, 1.0), 0.0) == 0.0);
  CHECK(psi_profile(piece(PieceKind::CrossCap, 0.02, 0.5), 0.25) ==
        Approx(1.0 / std::sqrt(kPi * 0.02 * 0.25)).epsilon(1e-12));
  CHECK(psi_profile(piece(PieceKind::Cylinder, 0.02, 0.5), 0.25) ==
        Approx(1.0 / std::sqrt(2 * kPi * 0.02 * 0.25)).epsilon(1e-12));
  CHECK(psi_profile(piece(PieceKind::Cylinder, 0.02, 0.5), 0.25) == Approx(5.6419).epsilon(1e-4));
  CHECK_THROWS_AS(psi_profile(piece(PieceKind::CrossCap, 0.1, 1.0), 1.5), DomainError);
}

TEST_CASE("psi_l1_norm and psi_boundary_flux worked values") {
  CHECK(psi_l1_norm(piece(PieceKind::CrossCap, 0.04, kTwoPi)) == Approx(0.8).epsilon(1e-12));
  CHECK(psi_boundary_flux(piece(PieceKind::CrossCap, 0.01, kTwoPi)) ==
        Approx(-0.1).epsilon(1e-12));
  CHECK(psi_boundary_flux(piece(PieceKind::CrossCap, 0.04, kTwoPi)) ==
        Approx(-0.2).epsilon(1e-12));
  CHECK(psi_boundary_flux(piece(PieceKind::Cylinder, 0.01, kPi)) == Approx(-0.4).epsilon(1e-12));
  // eps^{1/2} scaling
  for (double h : {0.5, 1.0, 2.0}) {
    const double a = psi_l1_norm(piece(PieceKind::CrossCap, 0.01, h));
    const double b = psi_l1_norm(piece(PieceKind::CrossCap, 0.0025, h));
    CHECK(b / a == Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("model_mu1 crossover handling") {
  CHECK(model_mu1(piece(PieceKind::Cylinder, 0.01, 0.5)).value == Approx(4 * kPi * kPi));
  auto r = model_mu1(piece(PieceKind::Cylinder, 0.1, 1.0));
  CHECK(r.value == Approx(kPi * kPi));
  CHECK_FALSE(r.near_crossover);
  CHECK(model_mu1(piece(PieceKind::Cylinder, 0.3, 1.0)).near_crossover);
  CHECK_THROWS_AS(model_mu1(piece(PieceKind::Cylinder, 0.5, 1.0)), ModeCrossing);
  CHECK_THROWS_AS(model_mu1(piece(PieceKind::CrossCap, 0.01, 1.0)), InvalidParameter);
}

TEST_CASE("choose_h_window on the unit torus") {
  auto bg = unit_torus_background(32);
  CHECK(bg.lambda1() == Approx(4 * kPi * kPi));
  CHECK(bg.multiplicity_lambda1() == 4);
  CHECK(bg.lambda_after_cluster() == Approx(8 * kPi * kPi));

  auto w = choose_h_window(bg, kPi * kPi);
  CHECK(w.h_star == Approx(0.5).epsilon(1e-13));
  CHECK(w.h0 < 0.5);
  CHECK(w.h0 > kPi / std::sqrt(8 * kPi * kPi - kPi * kPi));
  CHECK(kPi * kPi / (w.h0 * w.h0) < 7 * kPi * kPi);
  w.check();

  // Empty interval: lambda_{K+1} - delta0 at or below lambda1.
  BackgroundSpectrum degenerate;
  degenerate.eigenvalues = {0.0, 1.0, 1.0, 1.0 + 1e-7, 2.0};
  degenerate.area = 1.0;
  CHECK_THROWS_AS(choose_h_window(degenerate, 0.5), InfeasibleWindow);
}

TEST_CASE("choose_h_window invariants over random admissible spectra") {
  for (int trial = 0; trial < 60; ++trial) {
    BackgroundSpectrum bg;
    bg.eigenvalues.push_back(0.0);
    const double l1 = uniform(1.0, 50.0);
    const int K = 1 + static_cast<int>(uniform(0.0, 3.99));
    for (int i = 0; i < K; ++i) bg.eigenvalues.push_back(l1);
    const double lk1 = l1 * uniform(1.2, 4.0);
    bg.eigenvalues.push_back(lk1);
    bg.eigenvalues.push_back(lk1 * 1.5);
    const double delta0 = uniform(0.01, 0.9) * std::min(l1, lk1 - l1);
    auto w = choose_h_window(bg, delta0);
    CHECK(w.K == K);
    CHECK_NOTHROW(w.check());
  }
}

TEST_CASE("f_eps quadratic root: worked value, identity at h_star, bisection oracle") {
  const double l1 = 4 * kPi * kPi;

  // f(h_star) = 1 for any eps, any kind.
  for (double eps : {0.04, 0.01, 1e-4})
    for (auto kind : {PieceKind::CrossCap, PieceKind::Cylinder})
      CHECK(f_eps(0.5, eps, l1, 2.0, kind) == Approx(1.0).epsilon(1e-12));

  // Worked torus value against a bisection oracle on the defining equation.
  const double f = f_eps(0.52, 0.01, l1, 2.0, PieceKind::CrossCap);
  CHECK(f == Approx(0.8384).margin(1e-3));
  const double lambda = kPi * kPi / (0.52 * 0.52);
  auto defining = [&](double x) {
    return x * x - 1.0 + std::pow(0.52 / kTwoPi, 1.5) * (l1 - lambda) / 2.0 * 10.0 * x;
  };
  CHECK(f == Approx(oracles::bisect(defining, 1e-8, 10.0)).epsilon(1e-10));
}

TEST_CASE("f_eps root properties") {
  for (int trial = 0; trial < 100; ++trial) {
    const double h = uniform(0.3, 0.8);
    const double eps = uniform(1e-4, 0.05);
    const double l1 = uniform(10.0, 80.0);
    const double phi = uniform(0.5, 3.0);
    const auto kind = trial % 2 ? PieceKind::CrossCap : PieceKind::Cylinder;
    const double b = f_eps_coefficient(h, eps, l1, phi, kind);
    const double f = f_eps(h, eps, l1, phi, kind);
    CHECK(f > 0);
    // Root of the quadratic to machine precision, and the root product is -1.
    CHECK(f * f + b * f - 1.0 == Approx(0.0).margin(1e-12 * (1 + b * b)));
    CHECK(f * (-1.0 / f) == Approx(-1.0).epsilon(1e-15));
    // Monotone decreasing in b.
    CHECK(positive_quadratic_root(b + 0.5) < f);
  }
  CHECK_THROWS_AS(f_eps(0.5, 0.01, 39.0, -1.0, PieceKind::CrossCap), InvalidParameter);
  CHECK_THROWS_AS(f_eps(0.5, 0.01, 39.0, 0.0, PieceKind::CrossCap), InvalidParameter);
}

TEST_CASE("predicted_lambda1 expansion") {
  const double l1 = 4 * kPi * kPi;
  auto p = predicted_lambda1(0.01, 0.5, l1, 2.0, PieceKind::CrossCap);
  CHECK(p.f_eps == Approx(1.0).epsilon(1e-12));
  CHECK(p.lambda1_predicted == Approx(l1 * 0.8).epsilon(1e-12));
  CHECK(p.lambda1_predicted == Approx(31.583).margin(1e-3));
  CHECK(p.error_scale == Approx(0.01 * std::log(100.0)).epsilon(1e-12));
  CHECK(p.error_scale == Approx(0.0461).margin(1e-4));
  CHECK(p.in_window);

  // eps -> 0 at h = h_star recovers lambda1.
  CHECK(predicted_lambda1(1e-12, 0.5, l1, 2.0, PieceKind::CrossCap).lambda1_predicted ==
        Approx(l1).epsilon(1e-5));

  // Combination with the worked f value at h = 0.52.
  auto q = predicted_lambda1(0.01, 0.52, l1, 2.0, PieceKind::CrossCap);
  CHECK(q.lambda1_predicted == Approx(l1 - (1.0 / 0.8384) * l1 * 2.0 * 0.1).epsilon(1e-4));

  CHECK_FALSE(predicted_lambda1(0.01, 0.9, l1, 2.0, PieceKind::CrossCap).in_window);
}

TEST_CASE("h_eps_rule") {
  CHECK(h_eps_rule(0.01, 0.5) == Approx(kPi / std::sqrt(4 * kPi * kPi + std::pow(0.01, 0.75)))
                                     .epsilon(1e-14));
  CHECK(h_eps_rule(0.01, 0.5) == Approx(0.49980).margin(1e-5));
  CHECK(h_eps_rule(1e-9, 0.5) == Approx(0.5).margin(1e-7));
  CHECK(h_eps_rule(0.01, 0.5) < 0.5);
  // h_eps - h_star = o(eps^{1/2}); at eps = 1e-4 the ratio is
  // h_star^3 eps^{3/4} / (2 pi^2) / eps^{1/2} = 6.33e-4.
  const double dev = std::abs(h_eps_rule(1e-4, 0.5) - 0.5) / std::sqrt(1e-4);
  CHECK(dev == Approx(6.33e-4).margin(1e-5));
  CHECK(std::abs(h_eps_rule(1e-6, 0.5) - 0.5) / std::sqrt(1e-6) < dev);
}

TEST_CASE("merged_limit_spectrum worked values") {
  auto bg = unit_torus_background(32);

  auto m1 = merged_limit_spectrum(bg, PieceKind::CrossCap, 0.45, 7);
  REQUIRE(m1.size() == 7);
  CHECK(m1[0] == 0.0);
  for (int i = 1; i <= 4; ++i) CHECK(m1[i] == Approx(39.478).margin(1e-3));
  CHECK(m1[5] == Approx(48.738).margin(1e-3));
  CHECK(m1[6] == Approx(78.957).margin(1e-3));

  CHECK(merged_limit_spectrum(bg, PieceKind::Cylinder, 0.7, 1) == std::vector<double>{0.0});

  auto m3 = merged_limit_spectrum(bg, PieceKind::Cylinder, 0.7, 3);
  CHECK(m3[1] == Approx(20.142).margin(1e-3));
  CHECK(m3[2] == Approx(39.478).margin(1e-3));
}

TEST_CASE("merged_limit_spectrum multiset property") {
  auto bg = unit_torus_background(24);
  for (int trial = 0; trial < 50; ++trial) {
    const double h = uniform(0.2, 2.0);
    const int n_max = 1 + static_cast<int>(uniform(0.0, 14.99));
    const auto kind = trial % 2 ? PieceKind::CrossCap : PieceKind::Cylinder;
    auto merged = merged_limit_spectrum(bg, kind, h, n_max);
    REQUIRE(static_cast<int>(merged.size()) == n_max);
    CHECK(std::is_sorted(merged.begin(), merged.end()));
    CHECK(merged[0] == 0.0);
    // The multiset equals the sorted concatenation truncated to n_max.
    auto dir = model_dirichlet_spectrum({kind, 1.0, h, 2.0}, n_max);
    std::vector<double> expect = bg.eigenvalues;
    expect.insert(expect.end(), dir.begin(), dir.end());
    std::sort(expect.begin(), expect.end());
    expect.resize(n_max);
    CHECK(merged == expect);
  }
}

TEST_CASE("glued_area") {
  CHECK(glued_area(1.0, piece(PieceKind::CrossCap, 0.01, 0.5, 2.0)) ==
        Approx(1.0 + kPi * 0.005 - kPi * 1e-8).epsilon(1e-14));
  CHECK(glued_area(1.0, piece(PieceKind::CrossCap, 0.01, 0.5, 2.0)) ==
        Approx(1.0157).margin(1e-4));
  CHECK(glued_area(1.0, piece(PieceKind::Cylinder, 0.01, 0.5, 2.0)) ==
        Approx(1.0 + kTwoPi * 0.005 - kTwoPi * 1e-8).epsilon(1e-14));
  // eps -> 0 recovers the background area.
  CHECK(glued_area(1.0, piece(PieceKind::CrossCap, 1e-12, 0.5, 2.0)) == Approx(1.0).margin(1e-11));
}

TEST_CASE("model_lambda0 equals first dirichlet entry across h") {
  for (double h = 0.1; h <= 10.0; h += 0.37) {
    for (auto kind : {PieceKind::CrossCap, PieceKind::Cylinder}) {
      const ModelPiece p = piece(kind, 0.05, h);
      CHECK(model_lambda0(p) == Approx(model_dirichlet_spectrum(p, 1)[0]).epsilon(1e-14));
    }
  }
}

TEST_CASE("torus background orthonormality of the declared basis") {
  auto bg = unit_torus_background(16);
  // L2 inner products over [0,1)^2 by tensor-product quadrature.
  const int q = 48;
  for (int a = 0; a < 8; ++a)
    for (int b = a; b < 8; ++b) {
      double ip = 0;
      for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
          const double x = (i + 0.5) / q, y = (j + 0.5) / q;
          ip += bg.evaluator(a, x, y) * bg.evaluator(b, x, y);
        }
      ip /= q * q;
      CHECK(ip == Approx(a == b ? 1.0 : 0.0).margin(1e-12));
    }
}

TEST_CASE("psi_boundary_flux cross-check invariant") {
  // -flux equals the numerical derivative at t=0 times boundary length 2 pi eps
  // to 1e-10 relative (cross cap).
  for (int trial = 0; trial < 10; ++trial) {
    const double eps = uniform(0.005, 0.1), h = uniform(0.3, 2.5);
    const ModelPiece p = piece(PieceKind::CrossCap, eps, h);
    const double dpsi =
        oracles::derivative_at_left([&](double t) { return psi_profile(p, t); }, 0.0, h * 2e-3);
    CHECK(-psi_boundary_flux(p) == Approx(dpsi * kTwoPi * eps).epsilon(1e-10));
    CHECK(-psi_boundary_flux(p) ==
          Approx(std::pow(kTwoPi / h, 1.5) * std::sqrt(eps)).epsilon(1e-14));
  }
}
