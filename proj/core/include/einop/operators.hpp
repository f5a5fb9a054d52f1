#pragma once

#include "einop/curvature.hpp"
#include "einop/fields.hpp"
#include "einop/tensor_algebra.hpp"

namespace einop {

/// Metric plus its connection coefficients; the pair every first-order
/// operator needs.  Non-owning views.
struct Geometry {
  const MetricField& metric;
  const ChristoffelField& gamma;
};

inline Geometry geometry(const Background& bg) { return {bg.g, bg.christoffels}; }

// ---- first order ------------------------------------------------------------

/// du (metric-independent).
OneFormField differential(const ScalarField& u);

/// d* omega = -g^{ij} D_i omega_j.
ScalarField codifferential(const Geometry& geo, const OneFormField& omega);

/// D_i omega_j (first index is the derivative direction).
Tensor2Field covariant_derivative(const Geometry& geo, const OneFormField& omega);

/// D_k h_ij.
Sym2GradientField covariant_derivative(const Geometry& geo, const SymTensorField& h);

/// Hess u_ij = d_i d_j u - Gamma^m_ij d_m u.
SymTensorField hessian(const Geometry& geo, const ScalarField& u);

/// Trace-free part of the Hessian.
SymTensorField tracefree_hessian(const Geometry& geo, const ScalarField& u);

/// Killing operator (L omega)_ij = 1/2 (D_i omega_j + D_j omega_i).
SymTensorField killing(const Geometry& geo, const OneFormField& omega);

/// (div u)_i = -D^j u_ji.
OneFormField divergence(const Geometry& geo, const SymTensorField& u);

struct BianchiForms {
  OneFormField divergence;   // div_g u
  OneFormField bianchi;      // B_g(u)  = div + 1/2 d Tr
  OneFormField ein_bianchi;  // div + (2k+1)/(2(1+kn)) d Tr
};

/// All three first-order forms in one pass; kappa = -1/n is rejected.
BianchiForms divergence_and_bianchi(const Geometry& geo, const SymTensorField& u,
                                    double kappa);

// ---- second order -----------------------------------------------------------

// Rough Laplacian -tr grad^2 per bundle.  The principal part uses the direct
// repeated-axis second-derivative stencil; on a constant metric these reduce
// exactly to the componentwise positive FD Laplacian.
ScalarField laplacian(const Geometry& geo, const ScalarField& u);
OneFormField laplacian(const Geometry& geo, const OneFormField& omega);
SymTensorField laplacian(const Geometry& geo, const SymTensorField& h);

/// (Ric u)_ij = 1/2 (Ric_ik u^k_j + Ric_jk u^k_i).
SymTensorField ricci_action(const Background& bg, const SymTensorField& u);

/// (Riem u)_ij = Riem_ikjl u^{kl}.
SymTensorField riemann_action(const Background& bg, const SymTensorField& u);

/// Lichnerowicz Laplacian Delta_L = Delta + 2 (Ric - Riem action).
SymTensorField lichnerowicz_laplacian(const Background& bg, const SymTensorField& h);

/// Hodge Laplacian on 1-forms via the Weitzenboeck form Delta + Ric.
OneFormField hodge_laplacian(const Background& bg, const OneFormField& omega);

// ---- gauge term ---------------------------------------------------------------

/// Pointwise application of the inverse Ein endomorphism to a 1-form.
OneFormField apply_ein_inverse(const Background& bg, const OneFormField& omega);

/// L_g Ein_g^{-1} B^ein_{g+h}(E): the ein-Bianchi form of E in the metric g+h,
/// mapped through Ein_g^{-1}, then symmetrized with the background Killing
/// operator.  Throws if Ein(g) is degenerate or g+h is not SPD.
SymTensorField gauge_term(const Background& bg, const SymTensorField& h,
                          const SymTensorField& E);

/// Same, with the perturbed metric and its connection already built.
SymTensorField gauge_term_at(const Background& bg, const MetricField& g_hat,
                             const ChristoffelField& gamma_hat, const SymTensorField& E);

}  // namespace einop
