#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "einop/grid.hpp"

namespace einop {

/// Real-to-complex discrete Fourier transform on the grid, matching the
/// row-major field layout.  The inverse is normalized (inverse(forward(x)) = x
/// up to roundoff).
class FourierTransform {
 public:
  explicit FourierTransform(const GridSpec& grid);
  ~FourierTransform();
  FourierTransform(const FourierTransform&) = delete;
  FourierTransform& operator=(const FourierTransform&) = delete;

  const GridSpec& grid() const { return grid_; }
  long spectral_size() const { return nspec_; }

  void forward(std::span<const double> in, std::span<std::complex<double>> out) const;
  void inverse(std::span<const std::complex<double>> in, std::span<double> out) const;

  /// Integer mode numbers of a spectral index; axes before the last run over
  /// [0, N_a) (interpret k > N/2 as k - N), the last axis over [0, N/2].
  std::array<int, 3> modes(long spectral_index) const;

 private:
  GridSpec grid_;
  long nspec_ = 0;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Signed integer mode folded into (-N/2, N/2].
int fold_mode(int k, int n);

/// Symbol s of the 4th-order first-derivative stencil (D e^{ikx} = i s e^{ikx})
/// at integer mode k on an axis with N points and period L.
double first_derivative_symbol(int k, int N, double L);

/// Symbol of the direct 4th-order stencil for -d^2/dx^2 (nonnegative, and
/// strictly positive at the Nyquist mode).
double second_derivative_symbol(int k, int N, double L);

/// Symbol of Delta = -g0^{ab} d_a d_b for a constant inverse metric g0_inv
/// (row-major dim x dim) at integer modes k.
double flat_laplacian_symbol(const GridSpec& grid, const std::vector<double>& g0_inv,
                             const std::array<int, 3>& k);

/// Componentwise diagonal preconditioner x = F^{-1}[ F r / max(|sym(k)|, floor) ].
/// Symmetric positive whenever the symbol is even in k, which all stencil
/// symbols here are.
class FourierDiagonalPreconditioner {
 public:
  FourierDiagonalPreconditioner(const GridSpec& grid, int ncomp,
                                std::function<double(const std::array<int, 3>&)> symbol,
                                double floor);

  /// in/out are ncomp * npoints vectors in field layout.
  void apply(std::span<const double> in, std::span<double> out) const;

 private:
  std::shared_ptr<FourierTransform> fft_;
  int ncomp_;
  std::vector<double> inv_symbol_;
};

/// Block-diagonal solve in Fourier space: out = F^{-1} A(k)^{-1} F in, with a
/// dense ncomp x ncomp real matrix per mode.  A(k) must be even in k (true for
/// all constant-coefficient operators built from the stencil symbols).
class FourierBlockInverse {
 public:
  using Assemble = std::function<void(const std::array<int, 3>& modes, Eigen::MatrixXd&)>;

  FourierBlockInverse(const GridSpec& grid, int ncomp, const Assemble& assemble);

  void apply(std::span<const double> in, std::span<double> out) const;

 private:
  std::shared_ptr<FourierTransform> fft_;
  int ncomp_;
  std::vector<Eigen::MatrixXd> inverses_;
};

}  // namespace einop
