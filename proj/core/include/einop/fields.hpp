#pragma once

#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include "einop/grid.hpp"

namespace einop {

/// Common storage for tensor fields on a grid: one double per point per
/// independent component, each component contiguous in lexicographic point
/// order.  Fields are immutable after construction by convention; all
/// operations below return new fields.
class FieldBase {
 public:
  FieldBase() = default;
  FieldBase(const GridSpec& grid, int ncomp, double init = 0.0)
      : grid_(grid),
        ncomp_(ncomp),
        npoints_(grid.num_points()),
        values_(static_cast<size_t>(ncomp) * grid.num_points(), init) {}

  const GridSpec& grid() const { return grid_; }
  int components() const { return ncomp_; }
  long points() const { return npoints_; }

  double* raw() { return values_.data(); }
  const double* raw() const { return values_.data(); }
  size_t size() const { return values_.size(); }

  std::span<double> comp(int c) {
    return {values_.data() + static_cast<size_t>(c) * npoints_,
            static_cast<size_t>(npoints_)};
  }
  std::span<const double> comp(int c) const {
    return {values_.data() + static_cast<size_t>(c) * npoints_,
            static_cast<size_t>(npoints_)};
  }

  double value(int c, long p) const {
    return values_[static_cast<size_t>(c) * npoints_ + p];
  }
  double& value(int c, long p) {
    return values_[static_cast<size_t>(c) * npoints_ + p];
  }

  void fill(double v) { values_.assign(values_.size(), v); }
  bool all_finite() const;

  /// this += a * other (same shape required).
  void add_scaled(double a, const FieldBase& other);
  void scale(double a);

 protected:
  GridSpec grid_;
  int ncomp_ = 0;
  long npoints_ = 0;
  std::vector<double> values_;
};

/// Largest absolute component value over the grid.
double sup_norm(const FieldBase& u);

class ScalarField : public FieldBase {
 public:
  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double init = 0.0) : FieldBase(g, 1, init) {}
  double at(long p) const { return values_[p]; }
  double& at(long p) { return values_[p]; }
};

class OneFormField : public FieldBase {
 public:
  OneFormField() = default;
  explicit OneFormField(const GridSpec& g, double init = 0.0)
      : FieldBase(g, g.dim, init) {}
  double at(int i, long p) const { return value(i, p); }
  double& at(int i, long p) { return value(i, p); }
};

/// Symmetric 2-tensor, upper triangle stored once: u_ij = u_ji by construction.
class SymTensorField : public FieldBase {
 public:
  SymTensorField() = default;
  explicit SymTensorField(const GridSpec& g, double init = 0.0)
      : FieldBase(g, g.sym_components(), init) {}
  double at(int i, int j, long p) const { return value(sym_index(grid_.dim, i, j), p); }
  double& at(int i, int j, long p) { return value(sym_index(grid_.dim, i, j), p); }
};

/// General (not necessarily symmetric) 2-tensor or endomorphism field.
class Tensor2Field : public FieldBase {
 public:
  Tensor2Field() = default;
  explicit Tensor2Field(const GridSpec& g, double init = 0.0)
      : FieldBase(g, g.dim * g.dim, init) {}
  double at(int i, int j, long p) const { return value(i * grid_.dim + j, p); }
  double& at(int i, int j, long p) { return value(i * grid_.dim + j, p); }
};

/// Connection-type coefficients C^k_ij, symmetric in the lower pair (i,j).
/// Also used for the gradient of a symmetric 2-tensor, D_k h_ij, where the
/// distinguished first index is the derivative direction.
class ChristoffelField : public FieldBase {
 public:
  ChristoffelField() = default;
  explicit ChristoffelField(const GridSpec& g, double init = 0.0)
      : FieldBase(g, g.dim * g.sym_components(), init) {}
  double at(int k, int i, int j, long p) const {
    return value(k * grid_.dim * (grid_.dim + 1) / 2 + sym_index(grid_.dim, i, j), p);
  }
  double& at(int k, int i, int j, long p) {
    return value(k * grid_.dim * (grid_.dim + 1) / 2 + sym_index(grid_.dim, i, j), p);
  }
};

using Sym2GradientField = ChristoffelField;

/// Covariant 4-tensor stored in full (n^4 components); curvature-type
/// symmetries are validated, not exploited, at desk scale.
class FourTensorField : public FieldBase {
 public:
  FourTensorField() = default;
  explicit FourTensorField(const GridSpec& g, double init = 0.0)
      : FieldBase(g, g.dim * g.dim * g.dim * g.dim, init) {}
  double at(int i, int j, int k, int l, long p) const {
    const int n = grid_.dim;
    return value(((i * n + j) * n + k) * n + l, p);
  }
  double& at(int i, int j, int k, int l, long p) {
    const int n = grid_.dim;
    return value(((i * n + j) * n + k) * n + l, p);
  }
};

/// (1,3)-tensor tau^i_{klm}, one contravariant slot, stored in full.
class Tensor13Field : public FieldBase {
 public:
  Tensor13Field() = default;
  explicit Tensor13Field(const GridSpec& g, double init = 0.0)
      : FieldBase(g, g.dim * g.dim * g.dim * g.dim, init) {}
  double at(int i, int k, int l, int m, long p) const {
    const int n = grid_.dim;
    return value(((i * n + k) * n + l) * n + m, p);
  }
  double& at(int i, int k, int l, int m, long p) {
    const int n = grid_.dim;
    return value(((i * n + k) * n + l) * n + m, p);
  }
};

/// Riemannian metric with cached pointwise inverse and sqrt(det g).
/// Construction rejects any point where g is not symmetric positive definite
/// (relative eigenvalue tolerance spd_tol) and verifies g * g^{-1} = id to
/// 1e-13 per point.
class MetricField {
 public:
  static constexpr double spd_tol = 1e-10;

  MetricField() = default;
  static MetricField build(SymTensorField g);

  const GridSpec& grid() const { return g_.grid(); }
  const SymTensorField& tensor() const { return g_; }
  const SymTensorField& inverse() const { return inv_; }
  const ScalarField& sqrt_det() const { return sqrt_det_; }

  double lo(int i, int j, long p) const { return g_.at(i, j, p); }
  double up(int i, int j, long p) const { return inv_.at(i, j, p); }

  /// Smallest / largest pointwise eigenvalue over the whole grid.
  double min_eigenvalue() const { return min_eig_; }
  double max_eigenvalue() const { return max_eig_; }

 private:
  SymTensorField g_;
  SymTensorField inv_;
  ScalarField sqrt_det_;
  double min_eig_ = 0.0, max_eig_ = 0.0;
};

// ---- constructors of model metrics ----------------------------------------

/// Constant metric g_ij(x) = G0_ij; G0 given row-major (dim x dim), must be
/// SPD or the error names the offending eigenvalue.
MetricField make_flat_metric(const GridSpec& grid, const std::vector<double>& g0);

/// Identity flat metric.
MetricField make_euclidean_metric(const GridSpec& grid);

/// Conformal metric g_ij = e^{2 f} delta_ij.
MetricField make_conformal_metric(const ScalarField& f);

// ---- pointwise algebra -----------------------------------------------------

template <class F>
concept FieldType = std::derived_from<F, FieldBase>;

/// Componentwise linear combination a*u + b*v of same-type fields.
template <FieldType F>
F lin_comb(double a, const F& u, double b, const F& v) {
  require_same_grid(u.grid(), v.grid(), "lin_comb");
  F out = u;
  out.scale(a);
  out.add_scaled(b, v);
  return out;
}

template <FieldType F>
F operator+(const F& u, const F& v) {
  return lin_comb(1.0, u, 1.0, v);
}
template <FieldType F>
F operator-(const F& u, const F& v) {
  return lin_comb(1.0, u, -1.0, v);
}
template <FieldType F>
F scaled(double a, const F& u) {
  F out = u;
  out.scale(a);
  return out;
}

// ---- deterministic analytic fields ----------------------------------------

/// amplitude * sin(x_axis) as a scalar field.
ScalarField make_sin_field(const GridSpec& grid, int axis, double amplitude);

/// Random real trigonometric polynomial with modes |k_a| <= kmax, coefficient
/// magnitude ~ amplitude / (1+|k|^2), reproducible from the seed.
ScalarField random_trig_scalar(const GridSpec& grid, std::uint64_t seed,
                               double amplitude, int kmax = 2);
OneFormField random_trig_one_form(const GridSpec& grid, std::uint64_t seed,
                                  double amplitude, int kmax = 2);
SymTensorField random_trig_sym(const GridSpec& grid, std::uint64_t seed,
                               double amplitude, int kmax = 2);

// ---- grid translations -----------------------------------------------------

/// Pullback by the grid translation x -> x + shift*h: out at index I equals
/// in at index I + shift (mod N), axis by axis.  Exact (pure relabeling).
template <class F>
F translate(const F& u, const std::array<int, 3>& shift) {
  F out = u;
  const GridSpec& g = u.grid();
  const long np = g.num_points();
  for (int c = 0; c < u.components(); ++c) {
    auto src = u.comp(c);
    auto dst = out.comp(c);
    for (long p = 0; p < np; ++p) {
      std::array<int, 3> idx = g.unflatten(p);
      for (int a = 0; a < g.dim; ++a) {
        idx[a] = (idx[a] + shift[a] % g.npts[a] + g.npts[a]) % g.npts[a];
      }
      dst[p] = src[g.flatten(idx)];
    }
  }
  return out;
}

MetricField translate_metric(const MetricField& g, const std::array<int, 3>& shift);

}  // namespace einop
