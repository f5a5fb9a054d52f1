#pragma once

#include <memory>
#include <string>
#include <vector>

#include "einop/curvature.hpp"
#include "einop/spectral.hpp"

namespace einop {

struct SolveOptions {
  double newton_tol = 1e-10;  // relative residual stop
  int max_newton = 12;
  double linear_tol = 1e-11;  // inner GMRES relative tolerance
  enum class Damping { None, Backtracking };
  Damping damping = Damping::Backtracking;
  double fd_step = 5e-6;      // directional-derivative step (on unit directions)
  double smallness = 1e-2;    // admissible sup |e|
  int gmres_max = 120;
};

struct SolveReport {
  SymTensorField h;
  int iterations = 0;
  bool converged = false;
  bool exploratory = false;
  std::vector<double> residual_history;  // weighted L2 of the gauged residual
  double equation_residual = 0.0;  // sup |Ein(g+h) - Ein(g) - e + Pi(h)/2|
  double gauge_residual = 0.0;     // sup |ein-Bianchi of E in the metric g+h|
  double pi_component = 0.0;       // weighted L2 of Pi(h)
  std::string message;

  std::string to_text() const;
  void write_history_csv(const std::string& path) const;
};

/// E = Ein(g) + e - 1/2 Pi(h).
SymTensorField build_E(const Background& bg, const SymTensorField& h,
                       const SymTensorField& e, const S2KernelProjector& pi);

/// The gauged residual and its exposed decomposition
/// F = [Ric(g+h) - Ric(g)] + Z - gauge, with
/// Z = (kappa Tr_{g+h} E + Lambda)/(1 + kappa n) (g+h) - E + Ric(g).
struct ResidualParts {
  SymTensorField total;
  SymTensorField ricci_part;
  SymTensorField zero_order;
  SymTensorField gauge;
};

ResidualParts residual_parts(const Background& bg, const SymTensorField& h,
                             const SymTensorField& e, const S2KernelProjector& pi);
SymTensorField residual_F(const Background& bg, const SymTensorField& h,
                          const SymTensorField& e, const S2KernelProjector& pi);

/// Derivative of F at (0,0) in the split form: for v = u g + h_tf,
///   1/2 [p(u) + pi(u)] g - (n-2) n kappa / (2(1+kappa n)) Hess0 u
///   + 1/2 (P_tf + Pi_tf) h_tf,
/// with Hess0 the trace-free Hessian.  h_tf must be trace-free to 1e-10.
SymTensorField linearized_F0(const Background& bg, const ScalarField& u,
                             const SymTensorField& h_tracefree,
                             const S2KernelProjector& pi);

/// Same, splitting a full symmetric input internally.
SymTensorField linearized_F0_split(const Background& bg, const SymTensorField& v,
                                   const S2KernelProjector& pi);

/// Exact inverse of the linearization at h = 0 on a constant-metric
/// background, block-diagonal in the discrete Fourier basis.  Used as the
/// Newton preconditioner.
class FlatLinearizedInverse {
 public:
  FlatLinearizedInverse(const Background& bg, const S2KernelProjector& pi);
  SymTensorField apply(const SymTensorField& r) const;

 private:
  const Background* bg_;
  std::shared_ptr<FourierBlockInverse> block_;
};

/// Newton iteration on F(h, e) = 0 with matrix-free central-difference
/// directional derivatives, preconditioned by the h = 0 linearization.
/// Refuses (NotLicensedError, quoting the report verdict) when the hypothesis
/// report failed, unless exploratory is set.
SolveReport newton_solve(const Background& bg, const SymTensorField& e,
                         const S2KernelProjector& pi, const HypothesisReport& license,
                         const SolveOptions& opts = {}, bool exploratory = false,
                         const SymTensorField* initial_guess = nullptr);

struct VerificationRecord {
  double equation_residual = 0.0;
  double gauge_residual = 0.0;
  double equation_tol = 0.0;
  double gauge_tol = 0.0;
  bool pass_equation = false;
  bool pass_gauge = false;
  double lipschitz_coarse = 0.0;  // |h(e') - h(e)| / |e' - e| at the coarse step
  double lipschitz_fine = 0.0;    // same at half the step
  bool lipschitz_stable = false;

  std::string to_text() const;
};

/// Recomputes Ein(g+h) through the curvature module, forms both residuals and
/// probes the Lipschitz continuity of e -> h along a refined segment.
VerificationRecord verify_solution(const Background& bg, const SolveReport& report,
                                   const SymTensorField& e, const S2KernelProjector& pi,
                                   const HypothesisReport& license,
                                   const SolveOptions& opts, double equation_tol,
                                   double gauge_tol);

}  // namespace einop
