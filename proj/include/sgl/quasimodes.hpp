#pragma once

// Eigenbasis rotation at the attachment points, mass-deflated resolvent
// kernels with log-matched pole behavior, cutoff functions, the quasimode
// constructions concentrated on the surface and on the attached piece, and
// the spectral localization bound.

#include <Eigen/SparseLU>

#include <map>

#include "sgl/fem.hpp"

namespace sgl {

// ---------------------------------------------------------------------------
// Transfer between the closed background mesh (torus + annuli + caps) and the
// glued mesh (torus + annuli + strip): the background charts coincide
// vertex-by-vertex by construction.

struct BackgroundTransfer {
  std::vector<int> glued_to_closed;  // per glued dof: closed-mesh dof or -1
  int n_glued = 0, n_closed = 0;

  Vec to_glued(const Vec& closed_vec) const {
    Vec v = Vec::Zero(n_glued);
    for (int d = 0; d < n_glued; ++d)
      if (glued_to_closed[d] >= 0) v[d] = closed_vec[glued_to_closed[d]];
    return v;
  }
};

inline BackgroundTransfer make_transfer(const GluedSurface& closed, const GluedSurface& glued) {
  BackgroundTransfer t;
  t.n_glued = glued.n_dofs;
  t.n_closed = closed.n_dofs;
  t.glued_to_closed.assign(glued.n_dofs, -1);
  for (size_t ci = 0; ci < glued.charts.size(); ++ci) {
    if (glued.charts[ci].role == ChartRole::Strip) continue;
    if (ci >= closed.charts.size()) throw MeshError("make_transfer: chart mismatch");
    const int nv = glued.charts[ci].n_vertices();
    if (closed.charts[ci].n_vertices() < nv) throw MeshError("make_transfer: vertex mismatch");
    for (int v = 0; v < nv; ++v) {
      const int dg = glued.dof[ci][v], dc = closed.dof[ci][v];
      if (dg < 0) continue;
      if (t.glued_to_closed[dg] >= 0 && t.glued_to_closed[dg] != dc)
        throw MeshError("make_transfer: inconsistent dof identification");
      t.glued_to_closed[dg] = dc;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Rotated lambda_1-cluster basis.

struct RotatedBasis {
  std::vector<Vec> vectors;  // mass-orthonormal, on the closed background mesh
  std::vector<double> values;
  Mat rotation;                                 // K x K orthogonal
  std::vector<std::vector<double>> pole_values;  // [pole][j]: phi_j(x_p)
  double eval0 = 0;   // combined evaluation of the first rotated vector, >= 0
  bool degenerate = false;  // all evaluations vanish (common-zero regime)

  int K() const { return static_cast<int>(vectors.size()); }
  double lambda1() const {
    double s = 0;
    for (double v : values) s += v;
    return s / values.size();
  }
};

// Pole evaluation uses the cap center vertex of each pole's annulus chart.
inline int pole_center_dof(const GluedSurface& closed, int pole) {
  const ChartMesh* ann = closed.annulus_chart(pole);
  if (!ann || ann->cap_center_vertex < 0)
    throw InvalidParameter("pole_center_dof: closed background mesh with caps required");
  return closed.dof[ann->chart_id][ann->cap_center_vertex];
}

// Rotate the cluster so that all but the first basis vector have vanishing
// combined evaluation (phi(x0), or phi(x0) + phi(x1) for cylinders), and the
// first one evaluates to eval0 >= 0.
inline RotatedBasis rotate_basis(const std::vector<EigenPair>& cluster,
                                 const GluedSurface& closed, int n_poles) {
  if (cluster.empty()) throw InvalidParameter("rotate_basis: empty cluster");
  const int K = static_cast<int>(cluster.size());
  Vec evals(K);
  std::vector<int> centers;
  for (int p = 0; p < n_poles; ++p) centers.push_back(pole_center_dof(closed, p));
  for (int j = 0; j < K; ++j) {
    double e = 0;
    for (int c : centers) e += cluster[j].vector[c];
    evals[j] = e;
  }
  RotatedBasis rb;
  const double norm = evals.norm();
  if (norm < 1e-10) {
    rb.degenerate = true;
    rb.rotation = Mat::Identity(K, K);
  } else {
    // Householder reflection mapping the evaluation vector onto |e| e_1.
    Vec v = evals;
    v[0] -= norm;
    if (v.norm() < 1e-14 * norm) {
      rb.rotation = Mat::Identity(K, K);
    } else {
      v.normalize();
      rb.rotation = Mat::Identity(K, K) - 2.0 * v * v.transpose();
    }
  }
  for (int j = 0; j < K; ++j) {
    Vec w = Vec::Zero(cluster[0].vector.size());
    for (int i = 0; i < K; ++i) w += rb.rotation(j, i) * cluster[i].vector;
    rb.vectors.push_back(std::move(w));
    rb.values.push_back(cluster[j].value);
  }
  rb.pole_values.resize(n_poles);
  for (int p = 0; p < n_poles; ++p)
    for (int j = 0; j < K; ++j) rb.pole_values[p].push_back(rb.vectors[j][centers[p]]);
  double e0 = 0;
  for (int p = 0; p < n_poles; ++p) e0 += rb.pole_values[p][0];
  rb.eval0 = rb.degenerate ? 0.0 : e0;
  return rb;
}

// ---------------------------------------------------------------------------
// Deflated resolvent kernels.

struct KernelField {
  Vec values;  // on the closed background mesh
  double lambda = 0;
  std::vector<int> poles;
  std::vector<double> match_constant;  // per pole: lim (field - (1/2pi)log(1/r)) at the pole;
                                       // includes the other pole's regular value for sums
  double e_eps_lambda(double eps, double k) const {
    return kTwoPi * match_constant.at(0) / std::log(1.0 / std::pow(eps, k));
  }
};

namespace detail {

// Ring-mean extrapolation of field - (1/2pi) log(1/r) over the innermost
// annulus circles (r_in, gamma r_in, ...), Richardson in r^2.
inline double extract_match_constant(const GluedSurface& closed, const Vec& field, int pole) {
  const ChartMesh* ann = closed.annulus_chart(pole);
  if (!ann) throw InvalidParameter("extract_match_constant: no annulus at pole");
  const int n_rings_total = static_cast<int>(ann->ring_radii.size());
  const int n_main = ann->cap_center_vertex >= 0 ? n_rings_total - 2 : n_rings_total;
  if (n_main < 3) throw InvalidParameter("extract_match_constant: too few rings");
  double e[3], r[3];
  for (int j = 0; j < 3; ++j) {
    const int ring = n_main - 1 - j;  // innermost first
    r[j] = ann->ring_radii[ring];
    double mean = 0;
    for (int i = 0; i < ann->ring_size; ++i)
      mean += field[closed.dof[ann->chart_id][ring * ann->ring_size + i]];
    mean /= ann->ring_size;
    e[j] = mean - std::log(1.0 / r[j]) / kTwoPi;
  }
  // e(r) = e0 + c r^2 + ..., angular means kill the gradient term.
  const double e01 = (r[1] * r[1] * e[0] - r[0] * r[0] * e[1]) / (r[1] * r[1] - r[0] * r[0]);
  const double e12 = (r[2] * r[2] * e[1] - r[1] * r[1] * e[2]) / (r[2] * r[2] - r[1] * r[1]);
  (void)e12;
  return e01;  // pair of the two innermost rings
}

}  // namespace detail

// Solve the deflated discrete system for H_lambda with a unit point load at
// the pole: (K - lambda M) H = e_pole - (lambda/lambda1) sum_j phi_j(x_p) M phi_j,
// with the cluster components pinned to <H, phi_j>_M = phi_j(x_p)/lambda1 by
// a bordered (saddle-point) solve. Nonsingular uniformly through lambda =
// lambda1, which is the point of the deflation.
inline KernelField deflated_resolvent(const GluedSurface& closed, const AssembledForms& forms,
                                      const Spectrum& bg_spectrum, const RotatedBasis& basis,
                                      int pole, double lambda) {
  const int n = static_cast<int>(forms.stiffness.rows());
  const int K = basis.K();
  const double lambda1 = basis.lambda1();

  for (const auto& p : bg_spectrum.pairs) {
    const bool in_cluster = std::abs(p.value - lambda1) < 0.5 * std::abs(lambda1);
    if (!in_cluster && std::abs(p.value - lambda) < 1e-6)
      throw SolverFailure("deflated_resolvent: lambda within 1e-6 of a non-deflated eigenvalue");
  }

  const int center = pole_center_dof(closed, pole);
  Vec rhs = Vec::Zero(n + K);
  rhs[center] = 1.0;
  for (int j = 0; j < K; ++j) {
    const double cj = basis.pole_values[pole][j];
    rhs.head(n) -= (lambda / lambda1) * cj * (forms.mass * basis.vectors[j]);
    rhs[n + j] = cj / lambda1;
  }

  std::vector<Triplet> t;
  SpMat A = forms.stiffness - lambda * forms.mass;
  for (int col = 0; col < A.outerSize(); ++col)
    for (SpMat::InnerIterator it(A, col); it; ++it) t.emplace_back(it.row(), col, it.value());
  for (int j = 0; j < K; ++j) {
    const Vec mphi = forms.mass * basis.vectors[j];
    for (int i = 0; i < n; ++i)
      if (mphi[i] != 0.0) {
        t.emplace_back(i, n + j, mphi[i]);
        t.emplace_back(n + j, i, mphi[i]);
      }
  }
  SpMat bordered(n + K, n + K);
  bordered.setFromTriplets(t.begin(), t.end());
  Eigen::SparseLU<SpMat> lu(bordered);
  if (lu.info() != Eigen::Success) throw SolverFailure("deflated_resolvent: factorization failed");
  const Vec sol = lu.solve(rhs);

  KernelField kf;
  kf.values = sol.head(n);
  kf.lambda = lambda;
  kf.poles = {pole};
  kf.match_constant = {detail::extract_match_constant(closed, kf.values, pole)};
  return kf;
}

// Sum kernel J_lambda = H_{lambda,0} + H_{lambda,1}; its per-pole match
// constants include the other pole's regular part, which is exactly the
// additive constant the cylinder quasimode needs.
inline KernelField symmetric_kernel(const GluedSurface& closed, const AssembledForms& forms,
                                    const Spectrum& bg_spectrum, const RotatedBasis& basis,
                                    double lambda) {
  KernelField h0 = deflated_resolvent(closed, forms, bg_spectrum, basis, 0, lambda);
  KernelField h1 = deflated_resolvent(closed, forms, bg_spectrum, basis, 1, lambda);
  KernelField j;
  j.values = h0.values + h1.values;
  j.lambda = lambda;
  j.poles = {0, 1};
  j.match_constant = {detail::extract_match_constant(closed, j.values, 0),
                      detail::extract_match_constant(closed, j.values, 1)};
  return j;
}

// ---------------------------------------------------------------------------
// Cutoff fields on the glued mesh.

enum class CutoffVariant { Smooth, Log };

inline double smoothstep01(double s) { return s <= 0 ? 0.0 : s >= 1 ? 1.0 : s * s * (3 - 2 * s); }

// Smooth variant: 0 for r <= eps^k, cubic in r/eps^k on [1,2], 1 beyond.
// Log variant: 1 - log(r/eps^{k/2})/log(eps^{k/2}) inside B_{eps^{k/2}},
// 1 outside, 0 on the strip.
inline Vec cutoff(const GluedSurface& mesh, int pole, double eps, double k,
                  CutoffVariant variant) {
  const double rk = std::pow(eps, k);
  const ChartMesh* ann = mesh.annulus_chart(pole);
  if (!ann) throw InvalidParameter("cutoff: no annulus chart at pole");
  int resolved = 0;
  const double zone = variant == CutoffVariant::Smooth ? 2.0 * rk : std::pow(eps, k / 2);
  for (double r : ann->ring_radii)
    if (r > rk * 1.0000001 && r < zone) ++resolved;
  if (resolved < 1)
    throw MeshError("cutoff: refinement needed, transition zone unresolved");

  Vec eta(mesh.n_dofs);
  for (size_t ci = 0; ci < mesh.charts.size(); ++ci) {
    const ChartMesh& c = mesh.charts[ci];
    for (int v = 0; v < c.n_vertices(); ++v) {
      const int d = mesh.dof[ci][v];
      if (d < 0) continue;
      double val;
      if (c.role == ChartRole::Strip) {
        val = 0.0;
      } else {
        const double r = mesh.pole_radius(static_cast<int>(ci), v, pole);
        if (variant == CutoffVariant::Smooth) {
          val = smoothstep01(r / rk - 1.0);
        } else {
          const double rh = std::pow(eps, k / 2);
          if (r >= rh)
            val = 1.0;
          else
            val = 1.0 - std::log(std::max(r, rk) / rh) / std::log(rk / rh);
        }
      }
      eta[d] = val;
    }
  }
  return eta;
}

// ---------------------------------------------------------------------------
// Quasimodes.

enum class QuasimodeKind { CutoffSurface, NeumannBridge, CrossCapGreen, CrossCapChi, CylinderGreen };

inline const char* to_string(QuasimodeKind k) {
  switch (k) {
    case QuasimodeKind::CutoffSurface: return "cutoff_surface";
    case QuasimodeKind::NeumannBridge: return "neumann_bridge";
    case QuasimodeKind::CrossCapGreen: return "crosscap_green";
    case QuasimodeKind::CrossCapChi: return "crosscap_chi";
    case QuasimodeKind::CylinderGreen: return "cylinder_green";
  }
  return "?";
}

struct Quasimode {
  QuasimodeKind kind;
  Vec vector;  // glued-mesh dof coefficients
  double lambda_target = 0;
  double delta = 0;    // measured dual residual at lambda_target
  double norm_l2 = 0;  // mass norm; the localization lemma needs [1/2, 2]
  std::map<std::string, double> defect_terms;
};

inline void finalize_quasimode(Quasimode& q, const AssembledForms& glued_forms,
                               const DualNorm& dual) {
  q.norm_l2 = std::sqrt(q.vector.dot(glued_forms.mass * q.vector));
  q.delta = dual.residual_norm(q.vector, q.lambda_target);
}

// Strip height coordinate per glued dof (NaN for background dofs).
inline Vec strip_t_field(const GluedSurface& glued) {
  const ChartMesh* strip = glued.strip_chart();
  if (!strip) throw InvalidParameter("strip_t_field: no strip chart");
  Vec t = Vec::Constant(glued.n_dofs, std::numeric_limits<double>::quiet_NaN());
  for (int v = 0; v < strip->n_vertices(); ++v) t[glued.dof[strip->chart_id][v]] = strip->vertices[v].y();
  return t;
}

// The analytic ground state of the piece interpolated on the strip dofs,
// zero elsewhere.
inline Vec psi_field(const GluedSurface& glued) {
  const AttachmentSpec& spec = glued.attachment.value();
  const ModelPiece piece = spec.piece();
  const ChartMesh* strip = glued.strip_chart();
  Vec psi = Vec::Zero(glued.n_dofs);
  for (int v = 0; v < strip->n_vertices(); ++v)
    psi[glued.dof[strip->chart_id][v]] = psi_profile(piece, strip->vertices[v].y());
  return psi;
}

// eta_eps phi + (1 - eta_eps) phi(x0) across the cutoff annulus, constant
// phi(x0) on the cross cap.
inline Quasimode quasimode_surface(const Vec& phi_closed, double phi_at_pole, double lambda_target,
                                   const GluedSurface& glued, const BackgroundTransfer& transfer,
                                   const AssembledForms& glued_forms, const DualNorm& dual) {
  const AttachmentSpec& spec = glued.attachment.value();
  if (spec.kind != PieceKind::CrossCap)
    throw InvalidParameter("quasimode_surface: cross-cap attachment required");
  const Vec eta = cutoff(glued, 0, spec.eps, spec.k, CutoffVariant::Smooth);
  const Vec phi = transfer.to_glued(phi_closed);
  Quasimode q;
  q.kind = QuasimodeKind::CutoffSurface;
  q.lambda_target = lambda_target;
  q.vector = Vec::Zero(glued.n_dofs);
  const ChartMesh* strip = glued.strip_chart();
  for (size_t ci = 0; ci < glued.charts.size(); ++ci) {
    const ChartMesh& c = glued.charts[ci];
    for (int v = 0; v < c.n_vertices(); ++v) {
      const int d = glued.dof[ci][v];
      if (d < 0) continue;
      q.vector[d] = (c.role == ChartRole::Strip)
                        ? phi_at_pole
                        : eta[d] * phi[d] + (1.0 - eta[d]) * phi_at_pole;
    }
  }
  (void)strip;
  finalize_quasimode(q, glued_forms, dual);
  return q;
}

// Antisymmetric Neumann-mode bridge across the cylinder: phi outside the
// cutoff balls, phi(x_p) ramps inside them, phi(x0) cos(pi t / h) on the
// strip. Requires the symmetry phi(x0) + phi(x1) = 0.
inline Quasimode quasimode_neumann_bridge(const Vec& phi_closed, double phi_x0, double phi_x1,
                                          double lambda_target, const GluedSurface& glued,
                                          const BackgroundTransfer& transfer,
                                          const AssembledForms& glued_forms, const DualNorm& dual) {
  const AttachmentSpec& spec = glued.attachment.value();
  if (spec.kind != PieceKind::Cylinder)
    throw InvalidParameter("quasimode_neumann_bridge: cylinder attachment required");
  const double scale = std::max({std::abs(phi_x0), std::abs(phi_x1), 1e-8});
  if (std::abs(phi_x0 + phi_x1) > 1e-8 * std::max(1.0, scale))
    throw HypothesisViolated("quasimode_neumann_bridge: phi(x0) + phi(x1) != 0");
  const Vec eta0 = cutoff(glued, 0, spec.eps, spec.k, CutoffVariant::Smooth);
  const Vec eta1 = cutoff(glued, 1, spec.eps, spec.k, CutoffVariant::Smooth);
  const Vec phi = transfer.to_glued(phi_closed);
  const double rk2 = 2.0 * std::pow(spec.eps, spec.k);

  Quasimode q;
  q.kind = QuasimodeKind::NeumannBridge;
  q.lambda_target = lambda_target;
  q.vector = Vec::Zero(glued.n_dofs);
  for (size_t ci = 0; ci < glued.charts.size(); ++ci) {
    const ChartMesh& c = glued.charts[ci];
    for (int v = 0; v < c.n_vertices(); ++v) {
      const int d = glued.dof[ci][v];
      if (d < 0) continue;
      if (c.role == ChartRole::Strip) {
        q.vector[d] = phi_x0 * std::cos(kPi * c.vertices[v].y() / spec.h);
      } else {
        const double r0 = glued.pole_radius(static_cast<int>(ci), v, 0);
        const double r1 = glued.pole_radius(static_cast<int>(ci), v, 1);
        if (r0 <= rk2)
          q.vector[d] = eta0[d] * phi[d] + (1.0 - eta0[d]) * phi_x0;
        else if (r1 <= rk2)
          q.vector[d] = eta1[d] * phi[d] + (1.0 - eta1[d]) * phi_x1;
        else
          q.vector[d] = phi[d];
      }
    }
  }
  finalize_quasimode(q, glued_forms, dual);
  return q;
}

// Green-kernel quasimode concentrated on the cross cap: scaled H_lambda with
// the log part matched so the flux through the gluing circle cancels the
// normal derivative of psi.
inline Quasimode quasimode_crosscap_green(const KernelField& kernel, const GluedSurface& glued,
                                          const BackgroundTransfer& transfer,
                                          const AssembledForms& glued_forms, const DualNorm& dual) {
  const AttachmentSpec& spec = glued.attachment.value();
  const ModelPiece piece = spec.piece();
  if (spec.kind != PieceKind::CrossCap)
    throw InvalidParameter("quasimode_crosscap_green: cross-cap attachment required");
  if (std::abs(kernel.lambda - model_lambda0(piece)) > 1e-9 * model_lambda0(piece))
    throw InvalidParameter("quasimode_crosscap_green: kernel lambda does not match the piece");

  const double rk = piece.ball_radius();
  const double scale = std::pow(kTwoPi / spec.h, 1.5) * std::sqrt(spec.eps);
  const double e0 = kernel.match_constant.at(0);
  const double strip_const = scale * (std::log(1.0 / rk) / kTwoPi + e0);
  const Vec eta = cutoff(glued, 0, spec.eps, spec.k, CutoffVariant::Smooth);
  const Vec H = transfer.to_glued(kernel.values);

  Quasimode q;
  q.kind = QuasimodeKind::CrossCapGreen;
  q.lambda_target = kernel.lambda;
  q.vector = Vec::Zero(glued.n_dofs);
  for (size_t ci = 0; ci < glued.charts.size(); ++ci) {
    const ChartMesh& c = glued.charts[ci];
    for (int v = 0; v < c.n_vertices(); ++v) {
      const int d = glued.dof[ci][v];
      if (d < 0) continue;
      if (c.role == ChartRole::Strip) {
        q.vector[d] = psi_profile(piece, c.vertices[v].y()) + strip_const;
      } else {
        const double r = glued.pole_radius(static_cast<int>(ci), v, 0);
        const double logpart = std::log(1.0 / r) / kTwoPi + e0;
        q.vector[d] = scale * (eta[d] * H[d] + (1.0 - eta[d]) * logpart);
      }
    }
  }
  q.defect_terms["strip_constant"] = strip_const;
  q.defect_terms["e_eps_lambda"] = kernel.e_eps_lambda(spec.eps, spec.k);
  finalize_quasimode(q, glued_forms, dual);
  return q;
}

// chi differs from the Green quasimode by the correction along phi_{0,eps}:
// chi = psi~ - strip_const * phi_{0,eps} / phi_0(x_0); on the strip this
// cancels the additive constant exactly.
inline Quasimode quasimode_crosscap_chi(const KernelField& kernel, const GluedSurface& glued,
                                        const BackgroundTransfer& transfer,
                                        const RotatedBasis& basis,
                                        const AssembledForms& glued_forms, const DualNorm& dual) {
  if (!(basis.eval0 > 0))
    throw HypothesisViolated("quasimode_crosscap_chi: phi_0(x_0) > 0 required");
  Quasimode psi = quasimode_crosscap_green(kernel, glued, transfer, glued_forms, dual);
  Quasimode phi0 =
      quasimode_surface(basis.vectors[0], basis.eval0, basis.lambda1(), glued, transfer,
                        glued_forms, dual);
  Quasimode q;
  q.kind = QuasimodeKind::CrossCapChi;
  q.lambda_target = kernel.lambda;
  const double coeff = psi.defect_terms.at("strip_constant") / basis.eval0;
  q.vector = psi.vector - coeff * phi0.vector;
  q.defect_terms["correction_coefficient"] = coeff;
  q.defect_terms["strip_constant"] = psi.defect_terms.at("strip_constant");
  finalize_quasimode(q, glued_forms, dual);
  return q;
}

// Cylinder variant: J_lambda on the background with per-ball log matching,
// and a smoothstep bridge between the two matched constants on the strip.
// The cross terms H_{other}(x_p) live inside the kernel's match constants.
inline Quasimode quasimode_cylinder_green(const KernelField& kernel, const GluedSurface& glued,
                                          const BackgroundTransfer& transfer,
                                          const AssembledForms& glued_forms, const DualNorm& dual) {
  const AttachmentSpec& spec = glued.attachment.value();
  const ModelPiece piece = spec.piece();
  if (spec.kind != PieceKind::Cylinder)
    throw InvalidParameter("quasimode_cylinder_green: cylinder attachment required");
  if (kernel.poles.size() != 2)
    throw InvalidParameter("quasimode_cylinder_green: kernel must have both poles");
  if (std::abs(kernel.lambda - model_lambda0(piece)) > 1e-9 * model_lambda0(piece))
    throw InvalidParameter("quasimode_cylinder_green: kernel lambda does not match the piece");

  const double rk = piece.ball_radius();
  // Per-circle flux of the ground state is 2 (pi/h)^{3/2} eps^{1/2}; the
  // scaled unit log flux cancels it.
  const double scale = 2.0 * std::pow(kPi / spec.h, 1.5) * std::sqrt(spec.eps);
  const double kappa0 = std::log(1.0 / rk) / kTwoPi + kernel.match_constant.at(0);
  const double kappa1 = std::log(1.0 / rk) / kTwoPi + kernel.match_constant.at(1);
  const Vec eta0 = cutoff(glued, 0, spec.eps, spec.k, CutoffVariant::Smooth);
  const Vec eta1 = cutoff(glued, 1, spec.eps, spec.k, CutoffVariant::Smooth);
  const Vec J = transfer.to_glued(kernel.values);
  const double rk2 = 2.0 * rk;

  Quasimode q;
  q.kind = QuasimodeKind::CylinderGreen;
  q.lambda_target = kernel.lambda;
  q.vector = Vec::Zero(glued.n_dofs);
  for (size_t ci = 0; ci < glued.charts.size(); ++ci) {
    const ChartMesh& c = glued.charts[ci];
    for (int v = 0; v < c.n_vertices(); ++v) {
      const int d = glued.dof[ci][v];
      if (d < 0) continue;
      if (c.role == ChartRole::Strip) {
        const double t = c.vertices[v].y();
        const double rho = 1.0 - smoothstep01(t / spec.h);  // rho(0)=1, rho(h)=0, |rho'|<=1.5/h
        q.vector[d] = psi_profile(piece, t) + scale * (rho * kappa0 + (1.0 - rho) * kappa1);
      } else {
        const double r0 = glued.pole_radius(static_cast<int>(ci), v, 0);
        const double r1 = glued.pole_radius(static_cast<int>(ci), v, 1);
        if (r1 <= rk2) {
          const double logpart = std::log(1.0 / r1) / kTwoPi + kernel.match_constant.at(1);
          q.vector[d] = scale * (eta1[d] * J[d] + (1.0 - eta1[d]) * logpart);
        } else {
          const double logpart = std::log(1.0 / r0) / kTwoPi + kernel.match_constant.at(0);
          q.vector[d] = scale * (eta0[d] * J[d] + (1.0 - eta0[d]) * logpart);
        }
      }
    }
  }
  q.defect_terms["kappa0"] = kappa0;
  q.defect_terms["kappa1"] = kappa1;
  finalize_quasimode(q, glued_forms, dual);
  return q;
}

// Zero extension of the piece ground state (the naive quasimode; its dual
// residual is the eps^{1/2} log(1/eps^k) benchmark the kernel constructions
// must beat).
inline Quasimode quasimode_zero_extension(const GluedSurface& glued,
                                          const AssembledForms& glued_forms, const DualNorm& dual) {
  const ModelPiece piece = glued.attachment.value().piece();
  Quasimode q;
  q.kind = QuasimodeKind::CutoffSurface;
  q.lambda_target = model_lambda0(piece);
  q.vector = psi_field(glued);
  // The rim dofs carry the Dirichlet zero already via psi(0) = psi(h) = 0.
  finalize_quasimode(q, glued_forms, dual);
  return q;
}

// ---------------------------------------------------------------------------
// Spectral localization (tail bound).

struct TailBoundReport {
  double s = 0;
  double delta = 0;
  double lambda = 0;
  double norm_l2 = 0;
  double measured_tail = 0;  // ||g||_{L2}^2 + ||grad g||^2 from the discrete spectrum
  double bound = 0;          // explicit per-branch chain bound on the same quantity
  double measured_low_l2 = 0, measured_high_l2 = 0;  // per-branch L2 norms
  double chain_l2_bound = 0;                         // max(delta, (lambda+2) delta / s)
  double fitted_c = 0;                               // measured * s^2 / delta^2
  bool chain_holds = false;
  bool locates_eigenvalue = false;  // measured tail < ||f||^2 (Remark criterion)
};

inline TailBoundReport spectral_tail_bound(const Spectrum& spectrum, const AssembledForms& forms,
                                           const DualNorm& dual, const Vec& f, double lambda,
                                           double s) {
  TailBoundReport r;
  r.s = s;
  r.lambda = lambda;
  if (!(s > 0 && s < 1)) throw InvalidParameter("spectral_tail_bound: need 0 < s < 1");
  r.norm_l2 = std::sqrt(f.dot(forms.mass * f));
  if (r.norm_l2 < 0.5 || r.norm_l2 > 2.0)
    throw HypothesisViolated("spectral_tail_bound: ||f|| outside [1/2, 2]");
  if (spectrum.pairs.back().value <= lambda + s)
    throw InvalidParameter("spectral_tail_bound: spectrum does not cover the window");

  r.delta = dual.residual_norm(f, lambda);

  const double f_m = f.dot(forms.mass * f);
  const double f_k = f.dot(forms.stiffness * f);
  double in_m = 0, in_k = 0, low_m = 0;
  for (const auto& p : spectrum.pairs) {
    const double c = p.vector.dot(forms.mass * f);
    if (std::abs(p.value - lambda) <= s) {
      in_m += c * c;
      in_k += p.value * c * c;
    } else if (p.value < lambda - s) {
      low_m += c * c;
    }
  }
  const double tail_m = std::max(0.0, f_m - in_m);
  const double tail_k = std::max(0.0, f_k - in_k);
  r.measured_tail = tail_m + tail_k;
  r.measured_low_l2 = std::sqrt(low_m);
  r.measured_high_l2 = std::sqrt(std::max(0.0, tail_m - low_m));

  r.chain_l2_bound = std::max(r.delta, (lambda + 2.0) * r.delta / s);
  const double w_branch = (lambda + 2.0) * r.chain_l2_bound + r.delta;
  r.bound = 2.0 * w_branch * w_branch;
  r.fitted_c = r.delta > 0 ? r.measured_tail * s * s / (r.delta * r.delta) : 0.0;
  const double tol = 1e-8 * (1.0 + f_k);
  r.chain_holds = r.measured_low_l2 <= r.chain_l2_bound + tol &&
                  r.measured_high_l2 <= r.chain_l2_bound + tol && r.measured_tail <= r.bound + tol;
  r.locates_eigenvalue = r.measured_tail < r.norm_l2 * r.norm_l2;
  return r;
}

// Dimension-counting certification: K near-orthonormal quasimodes with small
// tails force at least `count` eigenvalues inside [lambda - s, lambda + s].
inline int certify_eigenvalue_count(const Spectrum& spectrum, const AssembledForms& forms,
                                    const std::vector<const Quasimode*>& modes, double lambda,
                                    double s) {
  const int K = static_cast<int>(modes.size());
  Mat gram = Mat::Zero(K, K);
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) {
      double ip = 0;
      for (const auto& p : spectrum.pairs)
        if (std::abs(p.value - lambda) <= s)
          ip += (p.vector.dot(forms.mass * modes[a]->vector)) *
                (p.vector.dot(forms.mass * modes[b]->vector));
      gram(a, b) = ip;
    }
  Eigen::SelfAdjointEigenSolver<Mat> es(gram);
  int count = 0;
  for (int i = 0; i < K; ++i)
    if (es.eigenvalues()[i] >= 0.5) ++count;
  return count;
}

}  // namespace sgl
