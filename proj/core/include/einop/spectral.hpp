#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "einop/curvature.hpp"
#include "einop/fields.hpp"
#include "einop/fourier.hpp"

namespace einop {

enum class BundleTag { Function, OneForm, Sym2, TraceFreeSym2 };
enum class OperatorTag {
  ScalarP,              // p = (1 + 2(n-1)k) Delta + 2 Lambda on functions
  TraceFreeP,           // [Delta_L + 2 k R + 2 Lambda] restricted to trace-free S2
  HodgeP,               // Delta_H + 2 k R + 2 Lambda on 1-forms
  FullP,                // Delta_L + 2kR + 2L + (k/(n(1+kn)))[(n-2) Delta Tr - 2 n tau Tr] g
  LichnerowiczShifted,  // Delta_L + 2 Lambda on S2
};

const char* to_string(OperatorTag tag);
BundleTag bundle_of(OperatorTag tag, int dim);

/// Self-adjoint discrete operator on one of the bundles: matrix-free apply in
/// the flat component layout, pointwise mass (weighted L2 Gram), optional
/// assembled form.  Self-adjointness is with respect to the weighted inner
/// product x^T M y.
class LinearOperatorHandle {
 public:
  LinearOperatorHandle(const Background& bg, OperatorTag tag);

  const Background& background() const { return *bg_; }
  OperatorTag op() const { return tag_; }
  BundleTag bundle() const { return bundle_; }
  int ncomp() const { return ncomp_; }
  long dof() const { return ncomp_ * bg_->grid().num_points(); }
  bool flat_background() const { return bg_->flags.metric_constant; }

  void apply(std::span<const double> in, std::span<double> out) const;
  void mass_apply(std::span<const double> in, std::span<double> out) const;
  void mass_solve(std::span<const double> in, std::span<double> out) const;
  double weighted_dot(std::span<const double> a, std::span<const double> b) const;
  double weighted_norm(std::span<const double> a) const {
    return std::sqrt(std::max(0.0, weighted_dot(a, a)));
  }

  /// Dense weak-form matrix S = M A (symmetric) and mass M; desk scale only.
  void assemble_dense(Eigen::MatrixXd& S, Eigen::MatrixXd& M) const;

  /// Largest-eigenvalue estimate by power iteration (weighted geometry).
  double operator_norm_estimate(int iters = 25) const;

  /// Exact symbol of the operator on a flat background at integer modes k
  /// (componentwise part only; FullP trace coupling excluded).
  double flat_symbol(const std::array<int, 3>& k) const;

  /// Fourier diagonal preconditioner from the flat symbol (identity fallback
  /// on curved backgrounds).
  std::shared_ptr<FourierDiagonalPreconditioner> make_preconditioner(double floor) const;

 private:
  const Background* bg_;
  OperatorTag tag_;
  BundleTag bundle_;
  int ncomp_;
  // pointwise Gram blocks (ncomp x ncomp per point) and their inverses
  std::vector<double> gram_, gram_inv_;
  void build_mass();
};

struct EigenPair {
  double value = 0.0;
  std::vector<double> vec;  // M-normalized
  double residual = 0.0;    // ||A v - lambda M v||_{M^{-1}} / norm scale
};

struct EigenOptions {
  int max_iter = 400;
  double tol = 1e-10;        // relative to the operator norm scale
  long dense_limit = 2200;   // dense path when dof <= limit
  std::uint64_t seed = 0x5eed;
};

/// k smallest eigenpairs, ascending.  Dense generalized solve at small sizes,
/// preconditioned LOBPCG above.
std::vector<EigenPair> eigen_small(const LinearOperatorHandle& handle, int k,
                                   const EigenOptions& opts = {});

struct KernelBasis {
  BundleTag bundle = BundleTag::Function;
  double threshold = 0.0;   // absolute eigenvalue cut used
  double gap_ratio = 0.0;   // |first rejected| / max(|last kept|, threshold/10)
  std::vector<double> eigenvalues;        // of the kept fields
  std::vector<std::vector<double>> fields;  // M-orthonormal
  int dim() const { return static_cast<int>(fields.size()); }
  bool empty() const { return fields.empty(); }
};

/// Kernel by spectral gap: keeps eigenvalues with |lambda| <= tol * scale and
/// requires a factor >= 10 gap to the first rejected one, otherwise throws
/// AmbiguousKernelError naming the eigenvalue window.
KernelBasis kernel_and_projection(const LinearOperatorHandle& handle, double tol,
                                  const EigenOptions& opts = {});

/// L2-orthogonal projection onto the kernel span. in/out in component layout.
void project(const LinearOperatorHandle& handle, const KernelBasis& kb,
             std::span<const double> in, std::span<double> out);

struct ShiftedSolveStats {
  int iterations = 0;
  double residual = 0.0;  // ||(A + c Pi) x - y||_M / ||y||_M
};

/// Solves (P + c Pi) x = y by splitting y into kernel and complement,
/// mirroring the isomorphism proof; c must be nonzero.  The complement solve
/// is deflated PCG with the flat-symbol preconditioner.  x0, when nonempty,
/// seeds the iteration (the solution must not depend on it).
std::vector<double> shifted_solve(const LinearOperatorHandle& handle, double c,
                                  const KernelBasis& kb, std::span<const double> y,
                                  double rel_tol = 1e-10, ShiftedSolveStats* stats = nullptr,
                                  std::span<const double> x0 = {});

// ---- S2 kernel projector -----------------------------------------------------

/// The split projection on S2: Pi(u g + h_tf) = pi(u) g + Pi_tf(h_tf), with
/// pi the projection onto ker p (functions) and Pi_tf onto ker of the
/// trace-free operator.
class S2KernelProjector {
 public:
  S2KernelProjector() = default;
  S2KernelProjector(const Background& bg, KernelBasis scalar_kernel,
                    KernelBasis tracefree_kernel);

  bool empty() const { return scalar_.empty() && tracefree_.empty(); }
  int scalar_dim() const { return scalar_.dim(); }
  int tracefree_dim() const { return tracefree_.dim(); }

  SymTensorField project(const SymTensorField& h) const;
  ScalarField project_scalar(const ScalarField& u) const;
  SymTensorField project_tracefree(const SymTensorField& h_tf) const;

  const Background& background() const { return *bg_; }

 private:
  const Background* bg_ = nullptr;
  KernelBasis scalar_, tracefree_;
  std::optional<LinearOperatorHandle> scalar_handle_, tracefree_handle_;
};

struct SpectralOptions {
  double kernel_tol = 1e-8;  // relative eigenvalue cut for kernel detection
  int report_modes = 8;      // eigenvalues listed per operator in reports
  EigenOptions eigen;
};

S2KernelProjector build_projector(const Background& bg,
                                  const SpectralOptions& opts = {});

// ---- hypothesis report ---------------------------------------------------------

struct OperatorSpectrum {
  OperatorTag tag = OperatorTag::ScalarP;
  std::vector<double> eigenvalues;
  int kernel_dim = 0;
  double threshold = 0.0;
  bool kernel_is_constants = false;
};

struct HypothesisReport {
  double kappa = 0.0, lambda = 0.0, tau = 0.0;
  std::vector<OperatorSpectrum> spectra;  // p, trace-free, Hodge, shifted Delta_L
  bool kappa_valid = true;
  bool background_ok = true;       // Ricci-parallel (plus Einstein when kappa != 0)
  bool ein_nondegenerate = true;
  double ein_margin = 0.0;
  bool p_kernel_ok = true;         // trivial or constants only
  bool hodge_kernel_ok = true;     // trivial
  bool spectrum_collision = false; // -2 Lambda hits the discrete Delta_L spectrum
  bool licensed = false;
  std::vector<std::string> failures;  // one line per failed hypothesis
  std::string verdict;                // "licensed" or "hypotheses fail: ..."

  std::string to_text() const;
  void write_csv(const std::string& path) const;  // operator,index,eigenvalue
};

HypothesisReport hypothesis_report(const Background& bg,
                                   const SpectralOptions& opts = {});

}  // namespace einop
