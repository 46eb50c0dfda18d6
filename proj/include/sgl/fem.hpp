#pragma once

// Linear-element forms on a GluedSurface, a block shift-inverted eigensolver
// for the lowest modes, Dirichlet restriction, discrete harmonic extension,
// and the W^{1,2}-dual residual norm used by the quasimode analysis.
// Assembly is exact per flat chart and accumulated through the DOF map, so
// the discrete space is a conforming subspace of W^{1,2} of the glued
// surface even though the metric jumps across gluing circles.

#include <Eigen/SparseCholesky>

#include <functional>
#include <map>

#include "sgl/mesh.hpp"

namespace sgl {

enum class OperatorKind { Stiffness, Mass, Shifted };

struct AssembledForms {
  SpMat stiffness;
  SpMat mass;
};

using TriangleFilter = std::function<bool(const ChartMesh&, int /*triangle*/)>;

inline AssembledForms assemble(const GluedSurface& mesh, const TriangleFilter& filter = {}) {
  std::vector<Triplet> kt, mt;
  for (size_t ci = 0; ci < mesh.charts.size(); ++ci) {
    const ChartMesh& c = mesh.charts[ci];
    for (size_t t = 0; t < c.triangles.size(); ++t) {
      if (filter && !filter(c, static_cast<int>(t))) continue;
      const auto& tri = c.triangles[t];
      const Eigen::Vector2d p0 = c.vertices[tri[0]], p1 = c.vertices[tri[1]],
                            p2 = c.vertices[tri[2]];
      const double area = 0.5 * ((p1 - p0).x() * (p2 - p0).y() - (p1 - p0).y() * (p2 - p0).x());
      if (!(area > 0))
        throw MeshError("assemble: degenerate triangle " + std::to_string(t) + " in chart " +
                        std::to_string(c.chart_id));
      // Gradients of the barycentric basis.
      const Eigen::Vector2d e0 = p2 - p1, e1 = p0 - p2, e2 = p1 - p0;
      const Eigen::Vector2d grads[3] = {Eigen::Vector2d(-e0.y(), e0.x()) / (2 * area),
                                        Eigen::Vector2d(-e1.y(), e1.x()) / (2 * area),
                                        Eigen::Vector2d(-e2.y(), e2.x()) / (2 * area)};
      int dofs[3];
      for (int a = 0; a < 3; ++a) {
        dofs[a] = mesh.dof[ci][tri[a]];
        if (dofs[a] < 0) throw MeshError("assemble: triangle references an unused vertex");
      }
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          kt.emplace_back(dofs[a], dofs[b], area * grads[a].dot(grads[b]));
          mt.emplace_back(dofs[a], dofs[b], area / 12.0 * (a == b ? 2.0 : 1.0));
        }
    }
  }
  AssembledForms f;
  f.stiffness.resize(mesh.n_dofs, mesh.n_dofs);
  f.mass.resize(mesh.n_dofs, mesh.n_dofs);
  f.stiffness.setFromTriplets(kt.begin(), kt.end());
  f.mass.setFromTriplets(mt.begin(), mt.end());
  return f;
}

inline AssembledForms assemble_region(const GluedSurface& mesh,
                                      const std::vector<ChartRole>& roles) {
  return assemble(mesh, [roles](const ChartMesh& c, int) {
    return std::find(roles.begin(), roles.end(), c.role) != roles.end();
  });
}

// ---------------------------------------------------------------------------
// Eigen solves.

struct EigenPair {
  double value = 0;
  Vec vector;        // mass-normalized, sign fixed
  double residual = 0;  // ||K v - lambda M v|| in the M^{-1} norm
};

struct Spectrum {
  std::vector<EigenPair> pairs;
  int iterations = 0;
  double shift = 0;
  std::string mesh_fingerprint;

  std::vector<double> values() const {
    std::vector<double> v;
    for (const auto& p : pairs) v.push_back(p.value);
    return v;
  }
};

struct SolveOptions {
  int m = 6;
  double rtol = 1e-9;
  std::uint64_t seed = 12345;
  int max_iter = 800;
  int block_extra = 6;
};

inline void fix_sign(Vec& v) {
  int imax = 0;
  for (int i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
  if (v[imax] < 0) v = -v;
}

// Block inverse iteration on (K + shift M)^{-1} M with Rayleigh-Ritz
// projection each sweep. Deterministic for a fixed seed.
inline Spectrum solve_lowest(const SpMat& K, const SpMat& M, const SolveOptions& opt = {}) {
  const int n = static_cast<int>(K.rows());
  if (opt.m < 1) throw InvalidParameter("solve_lowest: m >= 1");
  if (opt.m > n) throw InvalidParameter("solve_lowest: m exceeds dimension");
  const int p = std::min(n, opt.m + opt.block_extra);
  const double shift = 1.0;

  SpMat A = K + shift * M;
  Eigen::SimplicialLDLT<SpMat> solver(A);
  if (solver.info() != Eigen::Success) throw SolverFailure("solve_lowest: factorization failed");
  Eigen::SimplicialLDLT<SpMat> msolver(M);
  if (msolver.info() != Eigen::Success) throw SolverFailure("solve_lowest: mass factorization");

  auto rng = make_rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat X(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) X(i, j) = gauss(rng);

  Spectrum out;
  out.shift = -shift;
  Eigen::VectorXd ritz(p);
  double best_worst = std::numeric_limits<double>::max();
  int stalled = 0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    Mat Y = solver.solve(M * X);
    // M-orthonormalize the block before projecting; the raw block becomes
    // numerically rank-deficient as clusters converge.
    Mat My = Y.transpose() * (M * Y).eval();
    My = 0.5 * (My + My.transpose());
    Eigen::LLT<Mat> llt(My);
    if (llt.info() != Eigen::Success) {
      My += 1e-14 * My.trace() * Mat::Identity(p, p);
      llt.compute(My);
      if (llt.info() != Eigen::Success) throw SolverFailure("solve_lowest: block degenerated");
    }
    Y = llt.matrixU().template solve<Eigen::OnTheRight>(Y);
    Mat Ky = Y.transpose() * (K * Y).eval();
    Eigen::SelfAdjointEigenSolver<Mat> rr(0.5 * (Ky + Ky.transpose()));
    if (rr.info() != Eigen::Success) throw SolverFailure("solve_lowest: Rayleigh-Ritz failed");
    X = Y * rr.eigenvectors();
    ritz = rr.eigenvalues();
    out.iterations = it;

    if (it % 4 == 0 || it == opt.max_iter) {
      double worst = 0;
      for (int j = 0; j < opt.m; ++j) {
        const Vec x = X.col(j);
        const Vec r = K * x - ritz[j] * (M * x);
        const double rn = std::sqrt(std::max(0.0, r.dot(msolver.solve(r))));
        worst = std::max(worst, rn / std::max(std::abs(ritz[j]), 1.0));
      }
      if (worst <= opt.rtol) break;
      // Accept a roundoff-floor stagnation: the M^{-1}-norm residual bottoms
      // out above rtol on strongly graded meshes.
      if (worst >= 0.97 * best_worst) {
        if (++stalled >= 12 && worst <= 1e4 * opt.rtol) {
          logf(2, "solve_lowest: accepting stagnated residual " + std::to_string(worst));
          break;
        }
      } else {
        stalled = 0;
      }
      best_worst = std::min(best_worst, worst);
    }
  }

  for (int j = 0; j < opt.m; ++j) {
    EigenPair pair;
    pair.vector = X.col(j);
    const double mn = std::sqrt(pair.vector.dot(M * pair.vector));
    pair.vector /= mn;
    fix_sign(pair.vector);
    pair.value = pair.vector.dot(K * pair.vector);
    const Vec r = K * pair.vector - pair.value * (M * pair.vector);
    pair.residual = std::sqrt(std::max(0.0, r.dot(msolver.solve(r))));
    if (pair.residual > 2e4 * opt.rtol * std::max(std::abs(pair.value), 1.0))
      throw SolverFailure("solve_lowest: mode " + std::to_string(j) + " residual " +
                          std::to_string(pair.residual) + " after " +
                          std::to_string(out.iterations) + " iterations");
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dirichlet restriction.

struct DofSubset {
  std::vector<int> kept;         // global dofs kept, ascending
  std::vector<int> full_to_sub;  // -1 for eliminated dofs

  int sub_dim() const { return static_cast<int>(kept.size()); }

  Vec restrict_vec(const Vec& full) const {
    Vec s(sub_dim());
    for (int i = 0; i < sub_dim(); ++i) s[i] = full[kept[i]];
    return s;
  }

  Vec prolong(const Vec& sub, int n_full) const {
    Vec f = Vec::Zero(n_full);
    for (int i = 0; i < sub_dim(); ++i) f[kept[i]] = sub[i];
    return f;
  }
};

inline std::vector<int> loop_dofs(const GluedSurface& mesh, int chart, int loop) {
  if (chart < 0 || chart >= static_cast<int>(mesh.charts.size()))
    throw InvalidParameter("loop_dofs: unknown chart");
  const auto& loops = mesh.charts[chart].boundary_loops;
  if (loop < 0 || loop >= static_cast<int>(loops.size()))
    throw InvalidParameter("loop_dofs: unknown loop id");
  std::vector<int> d;
  for (int v : loops[loop].vertices) d.push_back(mesh.dof[chart][v]);
  return d;
}

inline DofSubset eliminate_dofs(int n_dofs, const std::vector<int>& eliminated) {
  std::vector<char> gone(n_dofs, 0);
  for (int d : eliminated) {
    if (d < 0 || d >= n_dofs) throw InvalidParameter("eliminate_dofs: dof out of range");
    gone[d] = 1;
  }
  DofSubset s;
  s.full_to_sub.assign(n_dofs, -1);
  for (int d = 0; d < n_dofs; ++d)
    if (!gone[d]) {
      s.full_to_sub[d] = static_cast<int>(s.kept.size());
      s.kept.push_back(d);
    }
  return s;
}

inline SpMat restrict_matrix(const SpMat& A, const DofSubset& s) {
  std::vector<Triplet> t;
  for (int col = 0; col < A.outerSize(); ++col) {
    const int sc = s.full_to_sub[col];
    if (sc < 0) continue;
    for (SpMat::InnerIterator it(A, col); it; ++it) {
      const int sr = s.full_to_sub[it.row()];
      if (sr >= 0) t.emplace_back(sr, sc, it.value());
    }
  }
  SpMat R(s.sub_dim(), s.sub_dim());
  R.setFromTriplets(t.begin(), t.end());
  return R;
}

// Sub-operators with the listed boundary loops eliminated (homogeneous
// Dirichlet); index maps retained in the returned subset.
inline std::tuple<SpMat, SpMat, DofSubset> dirichlet_restrict(
    const AssembledForms& forms, const GluedSurface& mesh,
    const std::vector<std::pair<int, int>>& loops) {
  std::vector<int> elim;
  for (const auto& [chart, loop] : loops) {
    const auto d = loop_dofs(mesh, chart, loop);
    elim.insert(elim.end(), d.begin(), d.end());
  }
  DofSubset s = eliminate_dofs(static_cast<int>(forms.stiffness.rows()), elim);
  return {restrict_matrix(forms.stiffness, s), restrict_matrix(forms.mass, s), s};
}

// ---------------------------------------------------------------------------
// Harmonic extension into a set of charts, given trace values on dofs.

struct HarmonicExtension {
  Vec values;     // full-length; trace + harmonic fill inside the region, 0 outside
  double energy;  // Dirichlet energy of the extension
};

inline HarmonicExtension harmonic_extension(const GluedSurface& mesh,
                                            const std::vector<int>& region_charts,
                                            const std::map<int, double>& trace) {
  AssembledForms forms = assemble(mesh, [&](const ChartMesh& c, int) {
    return std::find(region_charts.begin(), region_charts.end(), c.chart_id) !=
           region_charts.end();
  });
  // Region dofs = dofs touched by region triangles.
  std::vector<char> in_region(mesh.n_dofs, 0);
  for (int ci : region_charts)
    for (const auto& tri : mesh.charts[ci].triangles)
      for (int e = 0; e < 3; ++e) in_region[mesh.dof[ci][tri[e]]] = 1;

  std::vector<int> boundary;
  for (const auto& [d, v] : trace) {
    if (d < 0 || d >= mesh.n_dofs || !in_region[d])
      throw InvalidParameter("harmonic_extension: trace dof outside region");
    boundary.push_back(d);
  }
  std::vector<int> interior;
  for (int d = 0; d < mesh.n_dofs; ++d)
    if (in_region[d] && !trace.count(d)) interior.push_back(d);

  Vec full = Vec::Zero(mesh.n_dofs);
  for (const auto& [d, v] : trace) full[d] = v;

  if (!interior.empty()) {
    std::vector<int> full_to_int(mesh.n_dofs, -1);
    for (size_t i = 0; i < interior.size(); ++i) full_to_int[interior[i]] = static_cast<int>(i);
    std::vector<Triplet> kt;
    Vec rhs = Vec::Zero(interior.size());
    for (int col = 0; col < forms.stiffness.outerSize(); ++col) {
      for (SpMat::InnerIterator it(forms.stiffness, col); it; ++it) {
        const int ri = full_to_int[it.row()];
        if (ri < 0) continue;
        const int cif = full_to_int[col];
        if (cif >= 0)
          kt.emplace_back(ri, cif, it.value());
        else if (trace.count(col))
          rhs[ri] -= it.value() * full[col];
      }
    }
    SpMat Kii(interior.size(), interior.size());
    Kii.setFromTriplets(kt.begin(), kt.end());
    Eigen::SimplicialLDLT<SpMat> solver(Kii);
    if (solver.info() != Eigen::Success)
      throw SolverFailure("harmonic_extension: singular interior system");
    const Vec ui = solver.solve(rhs);
    for (size_t i = 0; i < interior.size(); ++i) full[interior[i]] = ui[i];
  }

  HarmonicExtension ext;
  ext.energy = full.dot(forms.stiffness * full);
  ext.values = std::move(full);
  return ext;
}

// ---------------------------------------------------------------------------
// W^{1,2}-dual norm of the eigenvalue-equation residual: delta = sqrt(r^T z)
// with r = (K - lambda M) f and (K + M) z = r. This is the discrete dual
// norm of phi -> <grad f, grad phi> - lambda <f, phi> over the Riesz map
// K + M.
class DualNorm {
 public:
  DualNorm(const SpMat& K, const SpMat& M) : K_(K), M_(M), riesz_(K + M) {
    if (riesz_.info() != Eigen::Success) throw SolverFailure("DualNorm: factorization failed");
  }

  double residual_norm(const Vec& f, double lambda) const {
    const Vec r = K_ * f - lambda * (M_ * f);
    const Vec z = riesz_.solve(r);
    return std::sqrt(std::max(0.0, r.dot(z)));
  }

  const SpMat& stiffness() const { return K_; }
  const SpMat& mass() const { return M_; }

 private:
  SpMat K_, M_;
  Eigen::SimplicialLDLT<SpMat> riesz_;
};

// Lowest m Neumann modes of a background-with-holes mesh (natural boundary
// conditions are the do-nothing case of the assembled forms).
inline Spectrum neumann_spectrum(const GluedSurface& mesh, int m, const SolveOptions& base = {}) {
  if (mesh.strip_chart() != nullptr)
    throw InvalidParameter("neumann_spectrum: expected a background mesh without a strip");
  AssembledForms forms = assemble(mesh);
  SolveOptions opt = base;
  opt.m = m;
  return solve_lowest(forms.stiffness, forms.mass, opt);
}

// L2 norm squared of the P1 trace along a boundary loop (exact per edge).
// Strip rims measure edge length as eps * dtheta, since the cross-cap rim
// alternates between the t=0 and t=h rows of the chart.
inline double boundary_l2_squared(const GluedSurface& mesh, int chart, int loop, const Vec& f) {
  const ChartMesh& cm = mesh.charts[chart];
  const auto& bl = cm.boundary_loops.at(loop);
  const auto& verts = bl.vertices;
  const int n = static_cast<int>(verts.size());
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    const int vi = verts[i], vj = verts[(i + 1) % n];
    double len;
    if (cm.role == ChartRole::Strip) {
      const double t0 = bl.theta[i];
      const double t1 = i + 1 < n ? bl.theta[i + 1] : bl.theta[0] + kTwoPi;
      len = cm.strip_eps * (t1 - t0);
    } else {
      len = (cm.vertices[vi] - cm.vertices[vj]).norm();
    }
    const double a = f[mesh.dof[chart][vi]], b = f[mesh.dof[chart][vj]];
    acc += len * (a * a + a * b + b * b) / 3.0;
  }
  return acc;
}

inline double w12_norm_squared(const AssembledForms& forms, const Vec& f) {
  return f.dot(forms.stiffness * f) + f.dot(forms.mass * f);
}

inline std::string mesh_fingerprint(const GluedSurface& mesh) {
  std::string s = std::to_string(mesh.n_dofs) + ":" + std::to_string(mesh.n_triangles());
  for (const auto& c : mesh.charts) {
    s += ":" + std::to_string(c.n_vertices());
    if (!c.vertices.empty()) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%a:%a", c.vertices.back().x(), c.vertices.back().y());
      s += buf;
    }
  }
  return hex64(fnv1a(s));
}

}  // namespace sgl
