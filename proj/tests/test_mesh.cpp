#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "sgl/mesh.hpp"

using namespace sgl;
using Catch::Approx;

namespace {

MeshParams small_params(int n_bg, int n_theta) {
  MeshParams p;
  p.n_background = n_bg;
  p.n_theta = n_theta;
  return p;
}

AttachmentSpec crosscap_spec(int n_bg, double eps = 0.02, double h = 0.5) {
  AttachmentSpec s;
  s.kind = PieceKind::CrossCap;
  s.x0_grid = {0, 0};
  s.eps = eps;
  s.h = h;
  s.k = 2.0;
  (void)n_bg;
  return s;
}

AttachmentSpec cylinder_spec(int n_bg, double eps = 0.02, double h = 0.5) {
  AttachmentSpec s;
  s.kind = PieceKind::Cylinder;
  s.x0_grid = {0, 0};
  s.x1_grid = {{n_bg / 2, n_bg / 2}};
  s.eps = eps;
  s.h = h;
  s.k = 2.0;
  return s;
}

}  // namespace

TEST_CASE("torus mesh counts, area, Euler characteristic") {
  auto g16 = build_torus_only(small_params(16, 8));
  CHECK(g16.n_dofs == 256);
  CHECK(g16.n_triangles() == 512);
  CHECK(g16.total_area() == Approx(1.0).margin(1e-12));

  auto g4 = build_torus_only(small_params(4, 8));
  CHECK(g4.euler_characteristic() == 0);
  CHECK(g4.connected());
  for (const auto& c : g4.charts) c.check_orientation();
}

TEST_CASE("annulus ring count formula and quality") {
  MeshParams p = small_params(48, 32);
  auto a = build_annulus_mesh(1e-4, 0.25, p);
  // ceil(log_{1.5}(0.25/1e-4)) = 20 radial intervals.
  CHECK(a.n_circle_rings == 20);
  CHECK(a.boundary_loops.size() == 2);
  CHECK(a.boundary_loops[1].vertices.size() == 32);
  CHECK(a.ring_radii.front() == Approx(0.25));
  CHECK(a.ring_radii.back() == Approx(1e-4).epsilon(1e-12));
  a.check_orientation();
  CHECK(a.min_quality() >= 0.2);

  CHECK_THROWS_AS(build_annulus_mesh(0.3, 0.25, p), InvalidParameter);
}

TEST_CASE("annulus quality across parameter range") {
  for (int nt : {32, 64, 128}) {
    MeshParams p = small_params(48, nt);
    if (nt >= 128) p.grading_ratio = std::sqrt(1.5);
    for (double r_in : {1e-3, 1e-4, 2.5e-5}) {
      auto a = build_annulus_mesh(r_in, double(p.hole_halfwidth_cells()) / p.n_background, p);
      a.check_orientation();
      CHECK(a.min_quality() >= 0.2);
    }
  }
  MeshParams p = small_params(96, 128);
  p.grading_ratio = std::sqrt(1.5);
  auto a = build_annulus_mesh(1e-4, 16.0 / 96, p);
  CHECK(a.min_quality() >= 0.2);
}

TEST_CASE("strip mesh counts and identification") {
  MeshParams p = small_params(16, 16);
  p.strip_layers_override = 8;

  ModelPiece cyl{PieceKind::Cylinder, 0.1, 1.0, 2.0};
  auto gc = build_strip_only(cyl, p);
  CHECK(gc.n_dofs == 16 * 9);
  CHECK(gc.charts[0].boundary_loops.size() == 2);
  CHECK(gc.total_area() == Approx(kTwoPi * 0.1 * 1.0).epsilon(1e-12));

  ModelPiece cc{PieceKind::CrossCap, 0.1, 1.0, 2.0};
  auto gm = build_strip_only(cc, p);
  CHECK(gm.n_dofs == 8 * 9);  // involution halves the vertex count
  REQUIRE(gm.charts[0].boundary_loops.size() == 1);
  CHECK(gm.charts[0].boundary_loops[0].vertices.size() == 16);
  CHECK(gm.total_area() == Approx(kPi * 0.1 * 1.0).epsilon(1e-12));

  // Involution has no fixed dofs and the rim visits 16 distinct dofs
  // (full circle of length 2 pi eps).
  const auto& chart = gm.charts[0];
  for (int v = 0; v < chart.n_vertices(); ++v)
    if (chart.alias[v] != v) CHECK(chart.alias[v] != v);
  std::set<int> rim;
  for (int v : chart.boundary_loops[0].vertices) rim.insert(gm.dof[0][v]);
  CHECK(rim.size() == 16);

  // Odd angular resolution cannot support the half-turn identification.
  MeshParams bad = p;
  bad.n_theta = 15;
  CHECK_THROWS_AS(build_strip_only(cc, bad), InvalidParameter);
}

TEST_CASE("glued cross cap: connected, chi = -1, theta grids agree bitwise") {
  MeshParams p = small_params(24, 16);
  auto spec = crosscap_spec(24, 0.05, 0.5);
  auto g = build_glued_surface(spec, p);

  CHECK(g.connected());
  CHECK(g.euler_characteristic() == -1);
  for (const auto& c : g.charts) c.check_orientation();

  for (const auto& gl : g.gluings) {
    const auto& la = g.charts[gl.chart_a].boundary_loops[gl.loop_a];
    const auto& lb = g.charts[gl.chart_b].boundary_loops[gl.loop_b];
    REQUIRE(la.vertices.size() == lb.vertices.size());
    if (!gl.reverse)
      for (size_t i = 0; i < la.theta.size(); ++i) CHECK(la.theta[i] == lb.theta[i]);
    for (size_t i = 0; i < la.vertices.size(); ++i) {
      const size_t q = gl.reverse ? (la.vertices.size() - i) % la.vertices.size() : i;
      CHECK(g.dof[gl.chart_a][la.vertices[i]] == g.dof[gl.chart_b][lb.vertices[q]]);
    }
  }
}

TEST_CASE("glued cylinder: chi = -2 and disjointness validation") {
  MeshParams p = small_params(24, 16);
  auto g = build_glued_surface(cylinder_spec(24, 0.05, 0.5), p);
  CHECK(g.connected());
  CHECK(g.euler_characteristic() == -2);

  AttachmentSpec too_close = cylinder_spec(24, 0.05, 0.5);
  too_close.x1_grid = {{3, 0}};
  CHECK_THROWS_AS(build_glued_surface(too_close, p), InvalidParameter);
}

TEST_CASE("gluing mismatch detection") {
  MeshParams p16 = small_params(24, 16), p32 = small_params(24, 32);
  auto a16 = build_annulus_mesh(1e-3, 2.0 / 24, p16);
  auto a32 = build_annulus_mesh(1e-3, 4.0 / 24, p32);
  CHECK_THROWS_AS(glue({a16, a32}, {{0, 1, 1, 1, false}}), GluingMismatch);
}

TEST_CASE("glued area matches the analytic value") {
  for (auto kind : {PieceKind::CrossCap, PieceKind::Cylinder}) {
    MeshParams p = small_params(48, 32);
    AttachmentSpec spec = kind == PieceKind::CrossCap ? crosscap_spec(48) : cylinder_spec(48);
    spec.eps = 0.02;
    auto g = build_glued_surface(spec, p);
    const double expect = glued_area(1.0, spec.piece());
    CHECK(g.total_area() == Approx(expect).epsilon(5e-3));
    // The only deficit is the polygonal removed disk.
    const int nb = spec.n_poles();
    const double r = spec.piece().ball_radius();
    CHECK(std::abs(g.total_area() - expect) < nb * kPi * r * r + 1e-12);
  }
}

TEST_CASE("background closed mesh shares background charts with the glued mesh") {
  MeshParams p = small_params(24, 16);
  auto spec = crosscap_spec(24, 0.05, 0.5);
  auto closed = build_background_closed(spec, p);
  auto glued = build_glued_surface(spec, p);

  CHECK(closed.euler_characteristic() == 0);  // still a torus
  CHECK(closed.connected());

  for (int ci : {0, 1}) {
    const auto& ca = closed.charts[ci];
    const auto& cb = glued.charts[ci];
    REQUIRE(ca.n_vertices() >= cb.n_vertices());
    for (int v = 0; v < cb.n_vertices(); ++v) {
      CHECK(ca.vertices[v].x() == cb.vertices[v].x());
      CHECK(ca.vertices[v].y() == cb.vertices[v].y());
    }
  }
  CHECK(closed.charts[1].cap_center_vertex >= 0);

  auto open = build_background_open(spec, p);
  CHECK(open.euler_characteristic() == -1);  // torus minus an open disk
}

TEST_CASE("pole radius and background point mapping") {
  MeshParams p = small_params(24, 16);
  auto spec = cylinder_spec(24, 0.05, 0.5);
  auto g = build_glued_surface(spec, p);
  const auto* ann0 = g.annulus_chart(0);
  REQUIRE(ann0 != nullptr);
  const int L = static_cast<int>(ann0->ring_radii.size()) - 1;
  for (int i = 0; i < ann0->ring_size; ++i) {
    const int v = L * ann0->ring_size + i;
    CHECK(g.pole_radius(ann0->chart_id, v, 0) == Approx(std::pow(0.05, 2.0)).epsilon(1e-9));
    CHECK(g.pole_radius(ann0->chart_id, v, 1) == Approx(std::sqrt(0.5)).margin(0.01));
  }
}

TEST_CASE("mesh export sections and counts") {
  MeshParams p = small_params(16, 16);
  auto g = build_glued_surface(crosscap_spec(16, 0.05, 0.5), p);
  const std::string ex = export_mesh(g);

  std::istringstream is(ex);
  std::string tag;
  int count = 0;
  is >> tag >> count;
  CHECK(tag == "VERTICES");
  int nv = 0;
  for (const auto& c : g.charts) nv += c.n_vertices();
  CHECK(count == nv);
  double x, y;
  int cid;
  for (int i = 0; i < count; ++i) REQUIRE((is >> cid >> x >> y));
  is >> tag >> count;
  CHECK(tag == "TRIANGLES");
  CHECK(count == g.n_triangles());
  int a, b, c2;
  for (int i = 0; i < count; ++i) REQUIRE((is >> cid >> a >> b >> c2));
  is >> tag >> count;
  CHECK(tag == "DOFMAP");
  for (int i = 0; i < count; ++i) {
    int v, d;
    REQUIRE((is >> cid >> v >> d));
    CHECK(g.dof[cid][v] == d);
  }
  is >> tag >> count;
  CHECK(tag == "GLUINGS");
  CHECK(count == static_cast<int>(g.gluings.size()));

  // 17 significant digits round-trip exactly.
  const double v0 = g.charts[1].vertices[5].x();
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v0);
  CHECK(std::stod(buf) == v0);
}

TEST_CASE("boundary loop thetas strictly increasing") {
  MeshParams p = small_params(24, 16);
  auto g = build_glued_surface(cylinder_spec(24, 0.05, 0.5), p);
  for (const auto& c : g.charts)
    for (const auto& loop : c.boundary_loops)
      for (size_t i = 1; i < loop.theta.size(); ++i) CHECK(loop.theta[i] > loop.theta[i - 1]);
}
