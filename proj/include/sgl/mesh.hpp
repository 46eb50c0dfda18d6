#pragma once

// Piecewise-flat triangulations of the glued surfaces: the background torus
// with square holes, graded annuli conforming to those holes, flat strips
// (cylinder or cross-cap quotient), and the DOF-identified union. Each chart
// carries its own flat coordinates; gluing identifies boundary loops through
// a shared angular index table, so the metric stays discontinuous across the
// gluing circle while the function space is conforming.

#include <array>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "sgl/analytic.hpp"
#include "sgl/core.hpp"

namespace sgl {

struct BoundaryLoop {
  std::string name;
  std::vector<int> vertices;     // ordered cycle, chart-local ids
  std::vector<int> theta_index;  // index into the loop's shared angle table
  std::vector<double> theta;     // angle per vertex, strictly increasing in [0, 2pi)
};

enum class ChartRole { Background, Annulus, Strip };

struct ChartMesh {
  int chart_id = 0;
  ChartRole role = ChartRole::Background;
  int pole = -1;  // attachment-point index this chart surrounds (-1: none)
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> triangles;  // positively oriented
  std::vector<double> metric_factor;          // per-vertex conformal factor (flat: 1)
  std::vector<int> alias;                     // chart-internal identification, vertex -> representative
  std::vector<BoundaryLoop> boundary_loops;

  // Annulus bookkeeping: scalar ring radii, ring -> first vertex id.
  std::vector<double> ring_radii;
  int ring_size = 0;
  int n_circle_rings = 0;  // trailing entries of ring_radii that are exact circles
  int cap_center_vertex = -1;

  // Strip bookkeeping.
  double strip_eps = 0, strip_h = 0;
  int strip_cols = 0, strip_rows = 0;  // vertices per row / per column

  int n_vertices() const { return static_cast<int>(vertices.size()); }

  double triangle_area(int t) const {
    const auto& tri = triangles[t];
    const Eigen::Vector2d a = vertices[tri[0]], b = vertices[tri[1]], c = vertices[tri[2]];
    return 0.5 * ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
  }

  double total_area() const {
    double s = 0;
    for (size_t t = 0; t < triangles.size(); ++t) s += triangle_area(t);
    return s;
  }

  // inradius / circumradius, in [0, 1/2]; equilateral = 1/2.
  double triangle_quality(int t) const {
    const auto& tri = triangles[t];
    const Eigen::Vector2d p0 = vertices[tri[0]], p1 = vertices[tri[1]], p2 = vertices[tri[2]];
    const double a = (p1 - p2).norm(), b = (p2 - p0).norm(), c = (p0 - p1).norm();
    const double area = triangle_area(t);
    if (area <= 0) return 0.0;
    const double s = 0.5 * (a + b + c);
    const double r_in = area / s;
    const double r_circ = a * b * c / (4.0 * area);
    return r_in / r_circ;
  }

  double min_quality() const {
    double q = 1.0;
    for (size_t t = 0; t < triangles.size(); ++t) q = std::min(q, triangle_quality(t));
    return q;
  }

  void check_orientation() const {
    for (size_t t = 0; t < triangles.size(); ++t)
      if (!(triangle_area(t) > 0))
        throw MeshError("chart " + std::to_string(chart_id) + ": degenerate triangle " +
                        std::to_string(t));
  }
};

struct MeshParams {
  int n_background = 48;
  int n_theta = 64;  // vertices per gluing circle; multiple of 8
  double grading_ratio = 1.5;
  double strip_aspect = 4.0;      // anisotropy cap for strip cells
  int strip_layers_override = 0;  // 0: choose from the aspect cap

  void validate() const {
    if (n_background < 4) throw InvalidParameter("MeshParams: n_background >= 4");
    if (n_theta < 8 || n_theta % 8 != 0)
      throw InvalidParameter("MeshParams: n_theta must be a multiple of 8 and >= 8");
    if (!(grading_ratio > 1.0 && grading_ratio <= 2.0))
      throw InvalidParameter("MeshParams: grading_ratio in (1, 2]");
  }

  int hole_halfwidth_cells() const { return n_theta / 8; }

  MeshParams refined(int levels = 1) const {
    MeshParams p = *this;
    for (int l = 0; l < levels; ++l) {
      p.n_background *= 2;
      p.n_theta *= 2;
      p.grading_ratio = std::sqrt(p.grading_ratio);
    }
    return p;
  }
};

struct AttachmentSpec {
  PieceKind kind = PieceKind::CrossCap;
  std::array<int, 2> x0_grid{0, 0};  // background grid indices, point = grid/n
  std::optional<std::array<int, 2>> x1_grid;
  double eps = 0.01;
  double h = 0.5;
  double k = 2.0;

  ModelPiece piece() const { return {kind, eps, h, k}; }
  int n_poles() const { return kind == PieceKind::Cylinder ? 2 : 1; }

  std::array<int, 2> pole_grid(int p) const {
    if (p == 0) return x0_grid;
    if (!x1_grid) throw InvalidParameter("AttachmentSpec: x1 required for cylinder");
    return *x1_grid;
  }

  void validate(const MeshParams& params) const {
    piece().validate();
    const int n = params.n_background;
    const int m = params.hole_halfwidth_cells();
    if (kind == PieceKind::Cylinder) {
      if (!x1_grid) throw InvalidParameter("AttachmentSpec: cylinder needs x1");
      auto wrapd = [n](int a, int b) {
        int d = std::abs(((a - b) % n + n) % n);
        return std::min(d, n - d);
      };
      const int di = wrapd(x0_grid[0], (*x1_grid)[0]);
      const int dj = wrapd(x0_grid[1], (*x1_grid)[1]);
      if (std::max(di, dj) < 2 * m + 2)
        throw InvalidParameter("AttachmentSpec: removed squares overlap or touch");
      const double dist = std::hypot(double(di) / n, double(dj) / n);
      if (!(dist > 4.0 * std::pow(eps, k)))
        throw InvalidParameter("AttachmentSpec: removed balls not disjoint");
    }
    const double S = double(m) / n;
    if (!(std::pow(eps, k) < S / 4.0))
      throw InvalidParameter("AttachmentSpec: eps^k too large for the chart scale");
  }
};

// ---------------------------------------------------------------------------
// Shared angular table of the conforming square ring (8m vertices).

struct SquareRing {
  int m = 0, n_bg = 0;
  std::vector<std::array<int, 2>> offsets;  // (di, dj), ordered by theta
  std::vector<double> theta;                // normalized to [0, 2pi)
  std::vector<Eigen::Vector2d> unit;        // direction (di,dj)/|.|
  std::vector<double> shape;                // |(di,dj)|/m in [1, sqrt(2)]
};

inline SquareRing square_ring(int m, int n_bg) {
  SquareRing r;
  r.m = m;
  r.n_bg = n_bg;
  struct E {
    double theta;
    int di, dj;
  };
  std::vector<E> es;
  for (int di = -m; di <= m; ++di)
    for (int dj = -m; dj <= m; ++dj) {
      if (std::max(std::abs(di), std::abs(dj)) != m) continue;
      double th = std::atan2(double(dj), double(di));
      if (th < 0) th += kTwoPi;
      es.push_back({th, di, dj});
    }
  std::sort(es.begin(), es.end(), [](const E& a, const E& b) { return a.theta < b.theta; });
  for (const auto& e : es) {
    r.offsets.push_back({e.di, e.dj});
    r.theta.push_back(e.theta);
    const double norm = std::hypot(double(e.di), double(e.dj));
    r.unit.emplace_back(e.di / norm, e.dj / norm);
    r.shape.push_back(norm / m);
  }
  return r;
}

inline std::vector<double> uniform_theta(int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = kTwoPi * i / n;
  return t;
}

// ---------------------------------------------------------------------------
// Chart builders.

// Structured unit torus [0,1)^2 with optional square holes (cells removed).
// Periodic identifications are encoded in `alias`; duplicated wrap vertices
// keep honest coordinates so triangle geometry never wraps.
inline ChartMesh build_torus_mesh(const MeshParams& params,
                                  const std::vector<std::array<int, 2>>& hole_centers = {}) {
  params.validate();
  const int n = params.n_background;
  const int m = params.hole_halfwidth_cells();
  ChartMesh c;
  c.role = ChartRole::Background;
  auto vid = [n](int i, int j) { return i * (n + 1) + j; };
  c.vertices.resize((n + 1) * (n + 1));
  c.alias.resize(c.vertices.size());
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      c.vertices[vid(i, j)] = Eigen::Vector2d(double(i) / n, double(j) / n);
      c.alias[vid(i, j)] = vid(i % n, j % n);
    }
  auto wrap = [n](int a) { return ((a % n) + n) % n; };
  auto in_hole = [&](int i, int j) {
    for (const auto& hc : hole_centers) {
      int di = wrap(i - hc[0]), dj = wrap(j - hc[1]);
      if (di > n / 2) di -= n;
      if (dj > n / 2) dj -= n;
      if (di >= -m && di <= m - 1 && dj >= -m && dj <= m - 1) return true;
    }
    return false;
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (in_hole(i, j)) continue;
      c.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      c.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  for (size_t h = 0; h < hole_centers.size(); ++h) {
    const auto ring = square_ring(m, n);
    BoundaryLoop loop;
    loop.name = "hole" + std::to_string(h);
    for (size_t a = 0; a < ring.offsets.size(); ++a) {
      const int i = wrap(hole_centers[h][0] + ring.offsets[a][0]);
      const int j = wrap(hole_centers[h][1] + ring.offsets[a][1]);
      loop.vertices.push_back(vid(i, j));
      loop.theta_index.push_back(static_cast<int>(a));
      loop.theta.push_back(ring.theta[a]);
    }
    c.boundary_loops.push_back(std::move(loop));
  }
  c.metric_factor.assign(c.vertices.size(), 1.0);
  return c;
}

// Graded annulus between the conforming square of half-side r_out (which
// equals m/n_background when glued to the torus) and the circle of radius
// r_in. Circle rings sit at radii r_in * gamma^j capped at r_out, preceded
// by a short square-to-circle transition band. The effective gamma never
// exceeds what the angular resolution can support with sound triangles.
// with_cap extends the chart to a full disk with a center vertex (used for
// background Green kernels).
inline ChartMesh build_annulus_mesh(double r_in, double r_out, const MeshParams& params,
                                    bool with_cap = false) {
  params.validate();
  if (!(r_in < r_out)) throw InvalidParameter("build_annulus_mesh: r_in < r_out required");
  const int m = params.hole_halfwidth_cells();
  const int ntheta = params.n_theta;
  const auto ring = square_ring(m, params.n_background);

  double min_dtheta = kTwoPi;
  for (int i = 0; i < ntheta; ++i) {
    const double next = i + 1 < ntheta ? ring.theta[i + 1] : ring.theta[0] + kTwoPi;
    min_dtheta = std::min(min_dtheta, next - ring.theta[i]);
  }
  // Radial steps no wider than ~3 local circumferential edges.
  const double gamma_cap = 1.0 / (1.0 - std::min(0.6, 3.0 * min_dtheta));
  const double gamma = std::min(params.grading_ratio, gamma_cap);

  std::vector<double> circles;  // descending radii, r_in last
  for (double r = r_in; r <= 0.92 * r_out; r *= gamma) circles.push_back(r);
  if (circles.empty()) throw InvalidParameter("build_annulus_mesh: r_in too close to r_out");
  std::reverse(circles.begin(), circles.end());
  const double r_top = circles.front();
  const int n_blend = std::max(
      1, static_cast<int>(std::ceil(std::log(std::sqrt(2.0) * r_out / r_top) / std::log(gamma))));

  ChartMesh c;
  c.role = ChartRole::Annulus;
  c.ring_size = ntheta;
  c.n_circle_rings = static_cast<int>(circles.size());
  const int n_rings = n_blend + static_cast<int>(circles.size());
  auto vid = [ntheta](int ell, int i) { return ell * ntheta + i; };
  for (int ell = 0; ell < n_rings; ++ell) {
    if (ell < n_blend) {
      // Transition band: each direction shrinks geometrically from its square
      // radius r_out * shape to the circle r_top, so radial steps stay within
      // the grading cap everywhere.
      const double s = double(ell) / n_blend;
      c.ring_radii.push_back(r_out * std::pow(r_top / r_out, s));
      for (int i = 0; i < ntheta; ++i) {
        const double r0 = r_out * ring.shape[i];
        const double r = r0 * std::pow(r_top / r0, s);
        c.vertices.emplace_back(r * ring.unit[i]);
      }
    } else {
      const double rho = circles[ell - n_blend];
      c.ring_radii.push_back(rho);
      for (int i = 0; i < ntheta; ++i) c.vertices.emplace_back(rho * ring.unit[i]);
    }
  }
  auto split_quad = [&c](int a, int b, int e, int d) {
    // Quad a-b-e-d (counterclockwise); cut along the shorter diagonal.
    if ((c.vertices[a] - c.vertices[e]).squaredNorm() <=
        (c.vertices[b] - c.vertices[d]).squaredNorm()) {
      c.triangles.push_back({a, b, e});
      c.triangles.push_back({a, e, d});
    } else {
      c.triangles.push_back({a, b, d});
      c.triangles.push_back({b, e, d});
    }
  };
  for (int ell = 0; ell + 1 < n_rings; ++ell)
    for (int i = 0; i < ntheta; ++i)
      split_quad(vid(ell, i), vid(ell, (i + 1) % ntheta), vid(ell + 1, (i + 1) % ntheta),
                 vid(ell + 1, i));
  const int L = n_rings - 1;  // index of the r_in ring

  BoundaryLoop outer;
  outer.name = "outer";
  for (int i = 0; i < ntheta; ++i) {
    outer.vertices.push_back(vid(0, i));
    outer.theta_index.push_back(i);
    outer.theta.push_back(ring.theta[i]);
  }
  c.boundary_loops.push_back(std::move(outer));

  if (!with_cap) {
    BoundaryLoop inner;
    inner.name = "inner";
    for (int i = 0; i < ntheta; ++i) {
      inner.vertices.push_back(vid(L, i));
      inner.theta_index.push_back(i);
      inner.theta.push_back(ring.theta[i]);
    }
    c.boundary_loops.push_back(std::move(inner));
  } else {
    // Two sub-rings inside r_in, then a fan to the center (the pole vertex).
    int prev_first = vid(L, 0);
    int ell = L;
    for (int sub = 1; sub <= 2; ++sub) {
      const double r = r_in * std::pow(0.45, sub);
      c.ring_radii.push_back(r);
      const int first = c.n_vertices();
      for (int i = 0; i < ntheta; ++i) c.vertices.emplace_back(r * ring.unit[i]);
      for (int i = 0; i < ntheta; ++i)
        split_quad(prev_first + i, prev_first + (i + 1) % ntheta, first + (i + 1) % ntheta,
                   first + i);
      prev_first = first;
      ++ell;
    }
    const int center = c.n_vertices();
    c.vertices.emplace_back(0.0, 0.0);
    c.cap_center_vertex = center;
    for (int i = 0; i < ntheta; ++i)
      c.triangles.push_back({prev_first + i, prev_first + (i + 1) % ntheta, center});
  }

  c.alias.resize(c.vertices.size());
  std::iota(c.alias.begin(), c.alias.end(), 0);
  c.metric_factor.assign(c.vertices.size(), 1.0);
  return c;
}

// Flat strip S^1(eps) x [0,h] in isometric coordinates (s, t), s = eps*theta.
// Cylinder: full strip, wrap column aliased, two boundary loops. CrossCap:
// fundamental half-domain s in [0, pi*eps] with the fixed-point-free
// involution (s,t) ~ (s + pi eps, h - t) applied as vertex identification;
// one boundary loop of n_theta vertices (the full circle of length 2 pi eps).
inline ChartMesh build_strip_mesh(const ModelPiece& piece, const MeshParams& params,
                                  std::vector<double> theta_table = {}) {
  params.validate();
  piece.validate();
  const int ntheta = params.n_theta;
  if (ntheta % 2 != 0)
    throw InvalidParameter("build_strip_mesh: identification impossible for odd n_theta");
  if (theta_table.empty()) theta_table = uniform_theta(ntheta);
  if (static_cast<int>(theta_table.size()) != ntheta)
    throw InvalidParameter("build_strip_mesh: theta table size mismatch");

  const double mean_ds = kTwoPi * piece.eps / ntheta;
  const int n_t = params.strip_layers_override > 0
                      ? params.strip_layers_override
                      : std::max(8, static_cast<int>(
                                        std::ceil(piece.h / (params.strip_aspect * mean_ds))));

  ChartMesh c;
  c.role = ChartRole::Strip;
  c.strip_eps = piece.eps;
  c.strip_h = piece.h;
  const bool crosscap = piece.kind == PieceKind::CrossCap;
  const int half = ntheta / 2;
  const int cols = crosscap ? half + 1 : ntheta + 1;
  c.strip_cols = cols;
  c.strip_rows = n_t + 1;
  auto vid = [n_t](int i, int j) { return i * (n_t + 1) + j; };

  auto s_of = [&](int i) {
    if (i < ntheta) return piece.eps * theta_table[i];
    return piece.eps * kTwoPi;
  };
  for (int i = 0; i < cols; ++i) {
    const double s = crosscap && i == half ? piece.eps * theta_table[half] : s_of(i);
    for (int j = 0; j <= n_t; ++j)
      c.vertices.emplace_back(s, piece.h * double(j) / n_t);
  }
  c.alias.resize(c.vertices.size());
  std::iota(c.alias.begin(), c.alias.end(), 0);
  if (crosscap) {
    for (int j = 0; j <= n_t; ++j) c.alias[vid(half, j)] = vid(0, n_t - j);
  } else {
    for (int j = 0; j <= n_t; ++j) c.alias[vid(ntheta, j)] = vid(0, j);
  }
  const int tri_cols = cols - 1;
  for (int i = 0; i < tri_cols; ++i)
    for (int j = 0; j < n_t; ++j) {
      c.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      c.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }

  if (crosscap) {
    BoundaryLoop loop;
    loop.name = "rim";
    for (int a = 0; a < ntheta; ++a) {
      loop.vertices.push_back(a < half ? vid(a, 0) : vid(a - half, n_t));
      loop.theta_index.push_back(a);
      loop.theta.push_back(theta_table[a]);
    }
    c.boundary_loops.push_back(std::move(loop));
  } else {
    for (int side = 0; side < 2; ++side) {
      BoundaryLoop loop;
      loop.name = side == 0 ? "t0" : "th";
      for (int a = 0; a < ntheta; ++a) {
        loop.vertices.push_back(vid(a, side == 0 ? 0 : n_t));
        loop.theta_index.push_back(a);
        loop.theta.push_back(theta_table[a]);
      }
      c.boundary_loops.push_back(std::move(loop));
    }
  }
  c.metric_factor.assign(c.vertices.size(), 1.0);
  return c;
}

// ---------------------------------------------------------------------------
// Glued surface: charts + DOF identification.

struct GluingRecord {
  int chart_a = 0, loop_a = 0;
  int chart_b = 0, loop_b = 0;
  bool reverse = false;  // theta_index map a -> (n - a) mod n
};

class GluedSurface {
 public:
  std::vector<ChartMesh> charts;
  std::vector<GluingRecord> gluings;
  std::vector<std::vector<int>> dof;  // per chart: vertex -> global dof
  int n_dofs = 0;

  MeshParams params;
  std::optional<AttachmentSpec> attachment;
  std::vector<Eigen::Vector2d> poles;  // background coordinates of x0 (, x1)

  int n_triangles() const {
    int t = 0;
    for (const auto& c : charts) t += static_cast<int>(c.triangles.size());
    return t;
  }

  double total_area() const {
    double a = 0;
    for (const auto& c : charts) a += c.total_area();
    return a;
  }

  int dof_of(int chart, int vertex) const { return dof[chart][vertex]; }

  const ChartMesh* strip_chart() const {
    for (const auto& c : charts)
      if (c.role == ChartRole::Strip) return &c;
    return nullptr;
  }

  const ChartMesh* annulus_chart(int pole) const {
    for (const auto& c : charts)
      if (c.role == ChartRole::Annulus && c.pole == pole) return &c;
    return nullptr;
  }

  const ChartMesh& background_chart() const {
    for (const auto& c : charts)
      if (c.role == ChartRole::Background) return c;
    throw MeshError("no background chart");
  }

  // Background coordinates of a vertex in a background/annulus chart.
  Eigen::Vector2d background_point(int chart, int vertex) const {
    const ChartMesh& c = charts[chart];
    if (c.role == ChartRole::Background) return c.vertices[vertex];
    if (c.role == ChartRole::Annulus) {
      Eigen::Vector2d p = poles[c.pole] + c.vertices[vertex];
      p.x() -= std::floor(p.x());
      p.y() -= std::floor(p.y());
      return p;
    }
    throw MeshError("background_point: not a background chart");
  }

  // Euclidean distance to pole `p` respecting the torus wrap.
  double pole_radius(int chart, int vertex, int p) const {
    const ChartMesh& c = charts[chart];
    if (c.role == ChartRole::Annulus && c.pole == p) return c.vertices[vertex].norm();
    const Eigen::Vector2d q = background_point(chart, vertex) - poles[p];
    auto wrap = [](double d) {
      d -= std::round(d);
      return d;
    };
    return std::hypot(wrap(q.x()), wrap(q.y()));
  }

  // Connectivity of the DOF graph (single component expected).
  bool connected() const {
    if (n_dofs == 0) return true;
    std::vector<int> comp(n_dofs, -1);
    std::vector<int> stack{0};
    comp[0] = 0;
    std::vector<std::vector<int>> adj(n_dofs);
    for (size_t ci = 0; ci < charts.size(); ++ci)
      for (const auto& tri : charts[ci].triangles)
        for (int e = 0; e < 3; ++e) {
          const int u = dof[ci][tri[e]], v = dof[ci][tri[(e + 1) % 3]];
          adj[u].push_back(v);
          adj[v].push_back(u);
        }
    int seen = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : adj[u])
        if (comp[v] < 0) {
          comp[v] = 0;
          ++seen;
          stack.push_back(v);
        }
    }
    return seen == n_dofs;
  }

  int euler_characteristic() const {
    std::set<std::pair<int, int>> edges;
    for (size_t ci = 0; ci < charts.size(); ++ci)
      for (const auto& tri : charts[ci].triangles)
        for (int e = 0; e < 3; ++e) {
          int u = dof[ci][tri[e]], v = dof[ci][tri[(e + 1) % 3]];
          if (u > v) std::swap(u, v);
          edges.insert({u, v});
        }
    return n_dofs - static_cast<int>(edges.size()) + n_triangles();
  }
};

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) { parent_[find(a)] = find(b); }

 private:
  std::vector<int> parent_;
};

}  // namespace detail

// Glue charts along the listed loop pairs. Loops must have equal vertex
// counts; for direct gluings the theta sequences must agree bitwise, for
// reversed ones they must correspond under index reflection.
inline GluedSurface glue(std::vector<ChartMesh> charts, const std::vector<GluingRecord>& gluings) {
  GluedSurface g;
  g.charts = std::move(charts);
  g.gluings = gluings;
  for (size_t i = 0; i < g.charts.size(); ++i) g.charts[i].chart_id = static_cast<int>(i);

  std::vector<int> offset(g.charts.size() + 1, 0);
  for (size_t i = 0; i < g.charts.size(); ++i)
    offset[i + 1] = offset[i] + g.charts[i].n_vertices();
  detail::UnionFind uf(offset.back());

  for (size_t ci = 0; ci < g.charts.size(); ++ci)
    for (int v = 0; v < g.charts[ci].n_vertices(); ++v)
      if (g.charts[ci].alias[v] != v) uf.unite(offset[ci] + v, offset[ci] + g.charts[ci].alias[v]);

  for (const auto& gl : gluings) {
    const auto& la = g.charts.at(gl.chart_a).boundary_loops.at(gl.loop_a);
    const auto& lb = g.charts.at(gl.chart_b).boundary_loops.at(gl.loop_b);
    const int nl = static_cast<int>(la.vertices.size());
    if (nl != static_cast<int>(lb.vertices.size()))
      throw GluingMismatch("loop vertex counts differ: " + std::to_string(nl) + " vs " +
                           std::to_string(lb.vertices.size()));
    for (int p = 0; p < nl; ++p) {
      const int q = gl.reverse ? (nl - p) % nl : p;
      if (!gl.reverse) {
        if (la.theta[p] != lb.theta[q])
          throw GluingMismatch("theta grids do not agree at position " + std::to_string(p));
      } else {
        const double want = p == 0 ? 0.0 : kTwoPi - la.theta[p];
        if (std::abs(lb.theta[q] - want) > 1e-12)
          throw GluingMismatch("reflected theta grids do not agree at position " +
                               std::to_string(p));
      }
      uf.unite(offset[gl.chart_a] + la.vertices[p], offset[gl.chart_b] + lb.vertices[q]);
    }
  }

  // Only vertices referenced by a triangle carry DOFs; vertices interior to
  // removed holes stay in the chart arrays but map to -1.
  std::vector<char> used(offset.back(), 0);
  for (size_t ci = 0; ci < g.charts.size(); ++ci)
    for (const auto& tri : g.charts[ci].triangles)
      for (int e = 0; e < 3; ++e) used[uf.find(offset[ci] + tri[e])] = 1;

  std::vector<int> dof_of_root(offset.back(), -1);
  g.dof.resize(g.charts.size());
  int next = 0;
  for (size_t ci = 0; ci < g.charts.size(); ++ci) {
    g.dof[ci].resize(g.charts[ci].n_vertices());
    for (int v = 0; v < g.charts[ci].n_vertices(); ++v) {
      const int r = uf.find(offset[ci] + v);
      if (!used[r]) {
        g.dof[ci][v] = -1;
        continue;
      }
      if (dof_of_root[r] < 0) dof_of_root[r] = next++;
      g.dof[ci][v] = dof_of_root[r];
    }
  }
  g.n_dofs = next;
  return g;
}

// ---------------------------------------------------------------------------
// Assembled surfaces.

inline Eigen::Vector2d grid_point(const std::array<int, 2>& gp, int n) {
  return Eigen::Vector2d(double(gp[0]) / n, double(gp[1]) / n);
}

// Plain closed torus.
inline GluedSurface build_torus_only(const MeshParams& params) {
  GluedSurface g = glue({build_torus_mesh(params)}, {});
  g.params = params;
  return g;
}

// Standalone strip (model piece), uniform theta grid.
inline GluedSurface build_strip_only(const ModelPiece& piece, const MeshParams& params) {
  GluedSurface g = glue({build_strip_mesh(piece, params)}, {});
  g.params = params;
  return g;
}

namespace detail {

enum class CoreKind { Strip, Caps, Open };

inline GluedSurface build_attached(const AttachmentSpec& spec, const MeshParams& params,
                                   CoreKind core) {
  params.validate();
  spec.validate(params);
  const int n = params.n_background;
  const int m = params.hole_halfwidth_cells();
  const double S = double(m) / n;
  const double r_in = std::pow(spec.eps, spec.k);
  const int np = spec.n_poles();

  std::vector<std::array<int, 2>> holes;
  for (int p = 0; p < np; ++p) holes.push_back(spec.pole_grid(p));

  std::vector<ChartMesh> charts;
  charts.push_back(build_torus_mesh(params, holes));
  for (int p = 0; p < np; ++p) {
    ChartMesh a = build_annulus_mesh(r_in, S, params, core == CoreKind::Caps);
    a.pole = p;
    charts.push_back(std::move(a));
  }

  std::vector<GluingRecord> gl;
  for (int p = 0; p < np; ++p) gl.push_back({0, p, 1 + p, 0, false});

  if (core == CoreKind::Strip) {
    const auto ring = square_ring(m, n);
    ChartMesh strip = build_strip_mesh(spec.piece(), params, ring.theta);
    charts.push_back(std::move(strip));
    const int strip_id = static_cast<int>(charts.size()) - 1;
    if (spec.kind == PieceKind::CrossCap) {
      gl.push_back({1, 1, strip_id, 0, false});  // annulus inner <-> rim
    } else {
      gl.push_back({1, 1, strip_id, 0, false});  // x0 annulus <-> t=0 loop
      gl.push_back({2, 1, strip_id, 1, true});   // x1 annulus <-> t=h loop, reversed
    }
  }

  GluedSurface g = glue(std::move(charts), gl);
  g.params = params;
  g.attachment = spec;
  for (int p = 0; p < np; ++p) g.poles.push_back(grid_point(spec.pole_grid(p), n));
  return g;
}

}  // namespace detail

// Background with holes filled by graded annuli + caps: a closed torus mesh
// with polar refinement around the attachment points. Charts 0..np coincide
// with the glued surface's background charts vertex-by-vertex.
inline GluedSurface build_background_closed(const AttachmentSpec& spec, const MeshParams& params) {
  return detail::build_attached(spec, params, detail::CoreKind::Caps);
}

// Sigma minus the ball(s): boundary left open (natural conditions downstream).
inline GluedSurface build_background_open(const AttachmentSpec& spec, const MeshParams& params) {
  return detail::build_attached(spec, params, detail::CoreKind::Open);
}

// The glued surface Sigma_{eps,h}.
inline GluedSurface build_glued_surface(const AttachmentSpec& spec, const MeshParams& params) {
  return detail::build_attached(spec, params, detail::CoreKind::Strip);
}

// ---------------------------------------------------------------------------
// Plain-text export: sections VERTICES (chart_id, x, y), TRIANGLES, DOFMAP,
// GLUINGS; newline-delimited, coordinates with 17 significant digits.

inline std::string export_mesh(const GluedSurface& g) {
  std::ostringstream os;
  char buf[64];
  int nv = 0;
  for (const auto& c : g.charts) nv += c.n_vertices();
  os << "VERTICES " << nv << "\n";
  for (const auto& c : g.charts)
    for (const auto& v : c.vertices) {
      std::snprintf(buf, sizeof(buf), "%d %.17g %.17g\n", c.chart_id, v.x(), v.y());
      os << buf;
    }
  os << "TRIANGLES " << g.n_triangles() << "\n";
  for (const auto& c : g.charts)
    for (const auto& t : c.triangles)
      os << c.chart_id << " " << t[0] << " " << t[1] << " " << t[2] << "\n";
  int nd = 0;
  for (const auto& d : g.dof) nd += static_cast<int>(d.size());
  os << "DOFMAP " << nd << "\n";
  for (size_t ci = 0; ci < g.charts.size(); ++ci)
    for (size_t v = 0; v < g.dof[ci].size(); ++v)
      os << ci << " " << v << " " << g.dof[ci][v] << "\n";
  os << "GLUINGS " << g.gluings.size() << "\n";
  for (const auto& gl : g.gluings)
    os << gl.chart_a << " " << gl.loop_a << " " << gl.chart_b << " " << gl.loop_b << " "
       << (gl.reverse ? 1 : 0) << "\n";
  return os.str();
}

}  // namespace sgl
