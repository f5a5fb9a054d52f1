#pragma once

#include <vector>

#include "einop/fields.hpp"
#include "einop/tensor_algebra.hpp"

namespace einop {

// Sign conventions, fixed here and tested in test_curvature.cpp:
//
//   Gamma^k_ij = 1/2 g^{ks} (d_i g_sj + d_j g_is - d_s g_ij)
//
//   Riem_ijkl  = 1/2 (d_j d_k g_il + d_i d_l g_jk - d_j d_l g_ik - d_i d_k g_jl)
//                + g_np (Gamma^n_jk Gamma^p_il - Gamma^n_jl Gamma^p_ik)
//
//   Ric_jl = g^{ik} Riem_ijkl,   R = g^{jl} Ric_jl,   Laplacian = -tr grad^2.
//
// This is the convention in which the round sphere has positive Ricci and a
// 2-d conformal metric e^{2f} delta has Ric = -(f_11 + f_22) delta.  The
// second-derivative form of Riem is used (rather than contracting
// dGamma - dGamma + [Gamma,Gamma]) because it keeps all four curvature-type
// symmetries exact at the stencil level, not just up to truncation error.

/// Levi-Civita connection coefficients; exactly symmetric in the lower pair,
/// exactly zero for constant metrics.
ChristoffelField christoffel(const MetricField& g);

struct CurvatureSet {
  FourTensorField riem;
  SymTensorField ric;    // trace of riem
  ScalarField scalar;    // trace of ric
};

CurvatureSet riemann_ricci_scalar(const MetricField& g);

/// Ric + kappa R g + lambda g evaluated from a precomputed curvature set.
SymTensorField ein_from_curvature(const CurvatureSet& c, const MetricField& g,
                                  double kappa, double lambda);

// ---- background -------------------------------------------------------------

struct BackgroundFlags {
  bool ricci_parallel = false;
  double ricci_parallel_dev = 0.0;  // sup |grad Ric| relative to curvature scale
  bool einstein = false;
  double einstein_dev = 0.0;        // sup |Ric - tau g| relative
  bool ein_nondegenerate = false;
  double ein_margin = 0.0;          // min/max |eigenvalue| of the Ein endomorphism
  bool metric_constant = false;     // bitwise-constant metric (flat torus model)
};

/// Reference metric with its constants, cached curvature, Ein(g), and the
/// pointwise inverse of the Ein endomorphism of T*M.  Validity is recorded in
/// flags rather than enforced here; the hypothesis report is the gate that
/// turns flags into a licensing verdict.
struct Background {
  static constexpr double ricci_parallel_tol = 1e-10;
  static constexpr double nondeg_tol = 1e-10;

  MetricField g;
  double kappa = 0.0;
  double lambda = 0.0;
  double tau = 0.0;  // Einstein constant when flags.einstein

  ChristoffelField christoffels;
  CurvatureSet curvature;
  SymTensorField ein_g;
  Tensor2Field ein_endo_inv;  // pointwise inverse of Ein_i^j = Ein_ik g^{kj}
  BackgroundFlags flags;

  const GridSpec& grid() const { return g.grid(); }
  int dim() const { return g.grid().dim; }
};

/// Builds a background.  Throws for the hard exclusions kappa = -1/n and
/// kappa = -1/(2(n-1)); everything else lands in flags.
Background make_background(MetricField g, double kappa, double lambda);

/// Ein of another metric on the same grid, with this background's constants.
SymTensorField ein(const Background& bg, const MetricField& g_eval);

// ---- DeTurck tensor and the Ricci increment ----------------------------------

/// T^k_ij = 1/2 [(g+h)^{-1}]^{ks} (D_i h_sj + D_j h_is - D_s h_ij), D the
/// g-covariant derivative.  Throws (naming the worst point) if g+h is not SPD.
ChristoffelField deturck_tensor(const MetricField& g, const ChristoffelField& gamma,
                                const SymTensorField& h);
ChristoffelField deturck_tensor(const MetricField& g, const SymTensorField& h);

/// Ric(g+h) - Ric(g) in the first-order form
/// D_l T^l_jk - D_k T^l_jl + T^p_jk T^l_pl - T^p_jl T^l_pk.
/// Exists for cross-validation against the two-curvature difference.
SymTensorField ricci_increment(const MetricField& g, const ChristoffelField& gamma,
                               const SymTensorField& h);
SymTensorField ricci_increment(const MetricField& g, const SymTensorField& h);

// ---- curvature-type four-tensor families -------------------------------------

struct KnEin {
  FourTensorField tensor;  // Riem + g ^o (a Ric + b R g + c g)
  double a = 0.0, b = 0.0, c = 0.0;
  double trace_factor = 0.0;  // Tr_g tensor = trace_factor * Ein(g)
};

/// The four-tensor Riem(g) + g ^o (a Ric(g) + b R(g) g + c g) with
/// b = (kappa [1 + a(n-2)] - a) / (2(n-1)) and c = (1 + (n-2)a) Lambda / (2(n-1)).
/// a = -1/(n-2) is excluded for n >= 3.
KnEin kn_ein(const Background& bg, double a);

/// Riemann-Christoffel form: tau^i_{klm} = g^{ij} (kn_ein tensor)_{jklm}.
Tensor13Field riemann_christoffel(const Background& bg, double a);

// ---- symmetry checkers --------------------------------------------------------

struct CurvatureSymmetryReport {
  double scale = 0.0;           // sup norm of the tensor
  double antisym_first = 0.0;   // sup |F_ijkl + F_jikl|
  double antisym_second = 0.0;  // sup |F_ijkl + F_ijlk|
  double pair_exchange = 0.0;   // sup |F_ijkl - F_klij|
  double first_bianchi = 0.0;   // sup |F_ijkl + F_iklj + F_iljk|
  double worst() const;
};

CurvatureSymmetryReport check_curvature_symmetries(const FourTensorField& f);

struct R13SymmetryReport {
  double scale = 0.0;
  double trace = 0.0;    // sup |tau^i_{ilm}|
  double antisym = 0.0;  // sup |tau^i_{klm} + tau^i_{kml}|
  double cyclic = 0.0;   // sup |tau^i_{klm} + tau^i_{mkl} + tau^i_{lmk}|
  double worst() const;
};

R13SymmetryReport check_r13_symmetries(const Tensor13Field& t);

}  // namespace einop
