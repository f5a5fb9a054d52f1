#include "einop/fourier.hpp"

#include <fftw3.h>

#include <cmath>
#include <numbers>

namespace einop {

struct FourierTransform::Impl {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  long nreal = 0, nspec = 0;

  ~Impl() {
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    if (real) fftw_free(real);
    if (spec) fftw_free(spec);
  }
};

FourierTransform::FourierTransform(const GridSpec& grid)
    : grid_(grid), impl_(std::make_unique<Impl>()) {
  const int n = grid.dim;
  int dims[3];
  for (int a = 0; a < n; ++a) dims[a] = grid.npts[a];
  impl_->nreal = grid.num_points();
  nspec_ = 1;
  for (int a = 0; a < n - 1; ++a) nspec_ *= grid.npts[a];
  nspec_ *= grid.npts[n - 1] / 2 + 1;
  impl_->nspec = nspec_;

  impl_->real = fftw_alloc_real(impl_->nreal);
  impl_->spec = fftw_alloc_complex(impl_->nspec);
  impl_->fwd = fftw_plan_dft_r2c(n, dims, impl_->real, impl_->spec, FFTW_ESTIMATE);
  impl_->bwd = fftw_plan_dft_c2r(n, dims, impl_->spec, impl_->real, FFTW_ESTIMATE);
  if (!impl_->fwd || !impl_->bwd) throw Error("FourierTransform: plan creation failed");
}

FourierTransform::~FourierTransform() = default;

void FourierTransform::forward(std::span<const double> in,
                               std::span<std::complex<double>> out) const {
  if (static_cast<long>(in.size()) != impl_->nreal ||
      static_cast<long>(out.size()) != nspec_)
    throw Error("FourierTransform::forward: size mismatch");
  std::copy(in.begin(), in.end(), impl_->real);
  fftw_execute(impl_->fwd);
  for (long i = 0; i < nspec_; ++i) out[i] = {impl_->spec[i][0], impl_->spec[i][1]};
}

void FourierTransform::inverse(std::span<const std::complex<double>> in,
                               std::span<double> out) const {
  if (static_cast<long>(in.size()) != nspec_ ||
      static_cast<long>(out.size()) != impl_->nreal)
    throw Error("FourierTransform::inverse: size mismatch");
  for (long i = 0; i < nspec_; ++i) {
    impl_->spec[i][0] = in[i].real();
    impl_->spec[i][1] = in[i].imag();
  }
  fftw_execute(impl_->bwd);
  const double scale = 1.0 / impl_->nreal;
  for (long i = 0; i < impl_->nreal; ++i) out[i] = impl_->real[i] * scale;
}

std::array<int, 3> FourierTransform::modes(long spectral_index) const {
  const int n = grid_.dim;
  std::array<int, 3> k{0, 0, 0};
  long rest = spectral_index;
  const int last = grid_.npts[n - 1] / 2 + 1;
  k[n - 1] = static_cast<int>(rest % last);
  rest /= last;
  for (int a = n - 2; a >= 0; --a) {
    k[a] = static_cast<int>(rest % grid_.npts[a]);
    rest /= grid_.npts[a];
  }
  return k;
}

int fold_mode(int k, int n) { return (k > n / 2) ? k - n : k; }

double first_derivative_symbol(int k, int N, double L) {
  const double h = L / N;
  const double t = 2.0 * std::numbers::pi * k / N;
  return (8.0 * std::sin(t) - std::sin(2.0 * t)) / (6.0 * h);
}

double second_derivative_symbol(int k, int N, double L) {
  const double h = L / N;
  const double t = 2.0 * std::numbers::pi * k / N;
  return (30.0 - 32.0 * std::cos(t) + 2.0 * std::cos(2.0 * t)) / (12.0 * h * h);
}

double flat_laplacian_symbol(const GridSpec& grid, const std::vector<double>& g0_inv,
                             const std::array<int, 3>& k) {
  const int n = grid.dim;
  double sym = 0.0;
  for (int a = 0; a < n; ++a)
    sym += g0_inv[a * n + a] *
           second_derivative_symbol(k[a], grid.npts[a], grid.length[a]);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      sym += g0_inv[a * n + b] *
             first_derivative_symbol(k[a], grid.npts[a], grid.length[a]) *
             first_derivative_symbol(k[b], grid.npts[b], grid.length[b]);
    }
  return sym;
}

FourierDiagonalPreconditioner::FourierDiagonalPreconditioner(
    const GridSpec& grid, int ncomp,
    std::function<double(const std::array<int, 3>&)> symbol, double floor)
    : fft_(std::make_shared<FourierTransform>(grid)), ncomp_(ncomp) {
  inv_symbol_.resize(fft_->spectral_size());
  for (long i = 0; i < fft_->spectral_size(); ++i) {
    std::array<int, 3> k = fft_->modes(i);
    for (int ax = 0; ax < grid.dim; ++ax) k[ax] = fold_mode(k[ax], grid.npts[ax]);
    const double s = symbol(k);
    inv_symbol_[i] = 1.0 / std::max(std::abs(s), floor);
  }
}

void FourierDiagonalPreconditioner::apply(std::span<const double> in,
                                          std::span<double> out) const {
  const long np = fft_->grid().num_points();
  const long ns = fft_->spectral_size();
  std::vector<std::complex<double>> spec(ns);
  for (int c = 0; c < ncomp_; ++c) {
    fft_->forward(in.subspan(static_cast<size_t>(c) * np, np), spec);
    for (long i = 0; i < ns; ++i) spec[i] *= inv_symbol_[i];
    fft_->inverse(spec, out.subspan(static_cast<size_t>(c) * np, np));
  }
}

FourierBlockInverse::FourierBlockInverse(const GridSpec& grid, int ncomp,
                                         const Assemble& assemble)
    : fft_(std::make_shared<FourierTransform>(grid)), ncomp_(ncomp) {
  inverses_.resize(fft_->spectral_size());
  Eigen::MatrixXd a(ncomp, ncomp);
  for (long i = 0; i < fft_->spectral_size(); ++i) {
    std::array<int, 3> k = fft_->modes(i);
    for (int ax = 0; ax < grid.dim; ++ax) k[ax] = fold_mode(k[ax], grid.npts[ax]);
    assemble(k, a);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible())
      throw Error("FourierBlockInverse: singular block at a Fourier mode");
    inverses_[i] = lu.inverse();
  }
}

void FourierBlockInverse::apply(std::span<const double> in,
                                std::span<double> out) const {
  const long np = fft_->grid().num_points();
  const long ns = fft_->spectral_size();
  std::vector<std::vector<std::complex<double>>> spec(
      ncomp_, std::vector<std::complex<double>>(ns));
  for (int c = 0; c < ncomp_; ++c)
    fft_->forward(in.subspan(static_cast<size_t>(c) * np, np), spec[c]);

  Eigen::VectorXcd v(ncomp_), w(ncomp_);
  for (long i = 0; i < ns; ++i) {
    for (int c = 0; c < ncomp_; ++c) v(c) = spec[c][i];
    w = inverses_[i] * v;
    for (int c = 0; c < ncomp_; ++c) spec[c][i] = w(c);
  }
  for (int c = 0; c < ncomp_; ++c)
    fft_->inverse(spec[c], out.subspan(static_cast<size_t>(c) * np, np));
}

}  // namespace einop
