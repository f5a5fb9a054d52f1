#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace einop {

/// Base error type of the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matrix or metric that is required to be symmetric positive definite is not.
class SpdError : public Error {
 public:
  using Error::Error;
};

/// A coefficient of the form 1/(1+kappa*n) or similar hit its singular value.
class SingularCoefficientError : public Error {
 public:
  using Error::Error;
};

/// Kernel detection found no clear spectral gap between kept and rejected modes.
class AmbiguousKernelError : public Error {
 public:
  using Error::Error;
};

/// A solve was requested on a background whose hypothesis report failed.
class NotLicensedError : public Error {
 public:
  using Error::Error;
};

/// An iterative method exhausted its budget without meeting its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Uniform grid on the flat torus [0,L_1) x ... x [0,L_n), n = 2 or 3.
/// Point (i_1,...,i_n) sits at x_a = i_a * L_a / N_a.  Linear indices are
/// row-major with the last axis fastest.
struct GridSpec {
  int dim = 0;
  std::array<int, 3> npts{1, 1, 1};
  std::array<double, 3> length{1.0, 1.0, 1.0};

  /// Validates dim in {2,3}, N_a >= 8, L_a > 0.
  static GridSpec make(int dim, const std::array<int, 3>& npts,
                       const std::array<double, 3>& length);

  /// Convenience: N points and period L on every axis.
  static GridSpec make_uniform(int dim, int n_per_axis, double length_per_axis);

  double spacing(int axis) const { return length[axis] / npts[axis]; }
  double coord(int axis, int index) const { return spacing(axis) * index; }

  long num_points() const {
    long n = 1;
    for (int a = 0; a < dim; ++a) n *= npts[a];
    return n;
  }

  /// Row-major stride of an axis (last axis has stride 1).
  long stride(int axis) const {
    long s = 1;
    for (int a = dim - 1; a > axis; --a) s *= npts[a];
    return s;
  }

  long flatten(const std::array<int, 3>& idx) const {
    long p = 0;
    for (int a = 0; a < dim; ++a) p = p * npts[a] + idx[a];
    return p;
  }

  std::array<int, 3> unflatten(long p) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int a = dim - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(p % npts[a]);
      p /= npts[a];
    }
    return idx;
  }

  int sym_components() const { return dim * (dim + 1) / 2; }

  bool operator==(const GridSpec& o) const {
    if (dim != o.dim) return false;
    for (int a = 0; a < dim; ++a)
      if (npts[a] != o.npts[a] || length[a] != o.length[a]) return false;
    return true;
  }
  bool operator!=(const GridSpec& o) const { return !(*this == o); }

  std::string describe() const;
};

/// Index of the (i,j) component in upper-triangle storage of a symmetric
/// 2-tensor, i,j in [0,dim).
inline int sym_index(int dim, int i, int j) {
  if (i > j) std::swap(i, j);
  return i * dim - i * (i - 1) / 2 + (j - i);
}

/// Throws unless both grids are identical.
void require_same_grid(const GridSpec& a, const GridSpec& b, const char* where);

}  // namespace einop
