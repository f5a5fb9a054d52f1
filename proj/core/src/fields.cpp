#include "einop/fields.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace einop {

bool FieldBase::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

void FieldBase::add_scaled(double a, const FieldBase& other) {
  if (other.values_.size() != values_.size())
    throw Error("add_scaled: shape mismatch");
  for (size_t i = 0; i < values_.size(); ++i) values_[i] += a * other.values_[i];
}

void FieldBase::scale(double a) {
  for (double& v : values_) v *= a;
}

double sup_norm(const FieldBase& u) {
  double m = 0.0;
  const double* d = u.raw();
  for (size_t i = 0; i < u.size(); ++i) m = std::max(m, std::abs(d[i]));
  return m;
}

namespace {

// Pointwise symmetric matrix helpers for n = 2, 3.
struct PointMatrix {
  int n;
  double a[9];  // row-major n x n

  static PointMatrix from_sym(const SymTensorField& s, long p) {
    PointMatrix m;
    m.n = s.grid().dim;
    for (int i = 0; i < m.n; ++i)
      for (int j = 0; j < m.n; ++j) m.a[i * m.n + j] = s.at(i, j, p);
    return m;
  }

  double det() const {
    if (n == 2) return a[0] * a[3] - a[1] * a[2];
    return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
           a[2] * (a[3] * a[7] - a[4] * a[6]);
  }

  PointMatrix inverse() const {
    PointMatrix r;
    r.n = n;
    const double d = det();
    if (n == 2) {
      r.a[0] = a[3] / d;
      r.a[1] = -a[1] / d;
      r.a[2] = -a[2] / d;
      r.a[3] = a[0] / d;
    } else {
      r.a[0] = (a[4] * a[8] - a[5] * a[7]) / d;
      r.a[1] = (a[2] * a[7] - a[1] * a[8]) / d;
      r.a[2] = (a[1] * a[5] - a[2] * a[4]) / d;
      r.a[3] = (a[5] * a[6] - a[3] * a[8]) / d;
      r.a[4] = (a[0] * a[8] - a[2] * a[6]) / d;
      r.a[5] = (a[2] * a[3] - a[0] * a[5]) / d;
      r.a[6] = (a[3] * a[7] - a[4] * a[6]) / d;
      r.a[7] = (a[1] * a[6] - a[0] * a[7]) / d;
      r.a[8] = (a[0] * a[4] - a[1] * a[3]) / d;
    }
    return r;
  }

  void sym_eigenvalues(double* eig) const {
    if (n == 2) {
      Eigen::Matrix2d m;
      m << a[0], a[1], a[2], a[3];
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es;
      es.computeDirect(m, Eigen::EigenvaluesOnly);
      eig[0] = es.eigenvalues()(0);
      eig[1] = es.eigenvalues()(1);
    } else {
      Eigen::Matrix3d m;
      m << a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8];
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
      es.computeDirect(m, Eigen::EigenvaluesOnly);
      for (int i = 0; i < 3; ++i) eig[i] = es.eigenvalues()(i);
    }
  }
};

std::string point_string(const GridSpec& g, long p) {
  auto idx = g.unflatten(p);
  std::ostringstream os;
  os << "(";
  for (int a = 0; a < g.dim; ++a)
    os << (a ? ", " : "") << g.coord(a, idx[a]);
  os << ")";
  return os.str();
}

}  // namespace

MetricField MetricField::build(SymTensorField g) {
  MetricField m;
  const GridSpec& grid = g.grid();
  const int n = grid.dim;
  const long np = grid.num_points();

  m.inv_ = SymTensorField(grid);
  m.sqrt_det_ = ScalarField(grid);
  m.min_eig_ = std::numeric_limits<double>::max();
  m.max_eig_ = 0.0;

  // First pass: global eigenvalue range, then the relative SPD gate.
  std::vector<double> min_eig_at(np);
  for (long p = 0; p < np; ++p) {
    double eig[3];
    PointMatrix::from_sym(g, p).sym_eigenvalues(eig);
    min_eig_at[p] = eig[0];
    m.min_eig_ = std::min(m.min_eig_, eig[0]);
    m.max_eig_ = std::max(m.max_eig_, eig[n - 1]);
  }
  const double gate = spd_tol * m.max_eig_;
  for (long p = 0; p < np; ++p) {
    if (!(min_eig_at[p] > gate)) {
      throw SpdError("metric not positive definite at point " +
                     point_string(grid, p) + ": min eigenvalue " +
                     std::to_string(min_eig_at[p]) + " (gate " +
                     std::to_string(gate) + ")");
    }
  }

  double worst_id = 0.0;
  for (long p = 0; p < np; ++p) {
    PointMatrix gm = PointMatrix::from_sym(g, p);
    PointMatrix gi = gm.inverse();
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) m.inv_.at(i, j, p) = gi.a[i * n + j];
    m.sqrt_det_.at(p) = std::sqrt(gm.det());
    // g * g^{-1} = id check
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += gm.a[i * n + k] * gi.a[k * n + j];
        worst_id = std::max(worst_id, std::abs(s - (i == j ? 1.0 : 0.0)));
      }
  }
  if (worst_id > 1e-13 * std::max(1.0, m.max_eig_ / m.min_eig_))
    throw Error("metric inverse check failed: |g*g^{-1} - id| = " +
                std::to_string(worst_id));

  m.g_ = std::move(g);
  return m;
}

MetricField make_flat_metric(const GridSpec& grid, const std::vector<double>& g0) {
  const int n = grid.dim;
  if (g0.size() != static_cast<size_t>(n) * n)
    throw Error("make_flat_metric: G0 must be " + std::to_string(n) + "x" +
                std::to_string(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (g0[i * n + j] != g0[j * n + i])
        throw Error("make_flat_metric: G0 not symmetric");
  // SPD gate with the offending eigenvalue in the message.
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g0[i * n + j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (!(es.eigenvalues()(0) > 0.0))
    throw SpdError("make_flat_metric: G0 not positive definite, eigenvalue " +
                   std::to_string(es.eigenvalues()(0)));

  SymTensorField g(grid);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      auto c = g.comp(sym_index(n, i, j));
      const double v = g0[i * n + j];
      for (long p = 0; p < grid.num_points(); ++p) c[p] = v;
    }
  return MetricField::build(std::move(g));
}

MetricField make_euclidean_metric(const GridSpec& grid) {
  const int n = grid.dim;
  std::vector<double> id(n * n, 0.0);
  for (int i = 0; i < n; ++i) id[i * n + i] = 1.0;
  return make_flat_metric(grid, id);
}

MetricField make_conformal_metric(const ScalarField& f) {
  const GridSpec& grid = f.grid();
  const int n = grid.dim;
  SymTensorField g(grid);
  for (long p = 0; p < grid.num_points(); ++p) {
    const double w = std::exp(2.0 * f.at(p));
    for (int i = 0; i < n; ++i) g.at(i, i, p) = w;
  }
  return MetricField::build(std::move(g));
}

ScalarField make_sin_field(const GridSpec& grid, int axis, double amplitude) {
  ScalarField u(grid);
  const double k = 2.0 * std::numbers::pi / grid.length[axis];
  for (long p = 0; p < grid.num_points(); ++p) {
    auto idx = grid.unflatten(p);
    u.at(p) = amplitude * std::sin(k * grid.coord(axis, idx[axis]));
  }
  return u;
}

namespace {

// Uniform double in [-1, 1), reproducible across platforms.
double unit_draw(std::mt19937_64& rng) {
  return 2.0 * ((rng() >> 11) * (1.0 / 9007199254740992.0)) - 1.0;
}

void fill_random_trig(std::span<double> out, const GridSpec& grid,
                      std::mt19937_64& rng, double amplitude, int kmax) {
  const int n = grid.dim;
  const long np = grid.num_points();
  for (long p = 0; p < np; ++p) out[p] = 0.0;
  std::array<int, 3> k{0, 0, 0};
  const int lo = -kmax;
  // One representative per +-k pair: iterate all k, keep the lexicographically
  // positive half plus k = 0.
  for (k[0] = lo; k[0] <= kmax; ++k[0])
    for (k[1] = lo; k[1] <= kmax; ++k[1])
      for (k[2] = (n == 3 ? lo : 0); k[2] <= (n == 3 ? kmax : 0); ++k[2]) {
        int first_nonzero = 0;
        for (int a = 0; a < n; ++a) {
          if (k[a] != 0) {
            first_nonzero = k[a];
            break;
          }
        }
        if (first_nonzero < 0) continue;
        double k2 = 0.0;
        for (int a = 0; a < n; ++a) k2 += double(k[a]) * k[a];
        const double w = amplitude / (1.0 + k2);
        const double ac = w * unit_draw(rng);
        const double as = (first_nonzero == 0) ? 0.0 : w * unit_draw(rng);
        for (long p = 0; p < np; ++p) {
          auto idx = grid.unflatten(p);
          double phase = 0.0;
          for (int a = 0; a < n; ++a)
            phase += 2.0 * std::numbers::pi * k[a] * idx[a] / grid.npts[a];
          out[p] += ac * std::cos(phase) + as * std::sin(phase);
        }
      }
}

}  // namespace

ScalarField random_trig_scalar(const GridSpec& grid, std::uint64_t seed,
                               double amplitude, int kmax) {
  ScalarField u(grid);
  std::mt19937_64 rng(seed);
  fill_random_trig(u.comp(0), grid, rng, amplitude, kmax);
  return u;
}

OneFormField random_trig_one_form(const GridSpec& grid, std::uint64_t seed,
                                  double amplitude, int kmax) {
  OneFormField u(grid);
  std::mt19937_64 rng(seed);
  for (int c = 0; c < u.components(); ++c)
    fill_random_trig(u.comp(c), grid, rng, amplitude, kmax);
  return u;
}

SymTensorField random_trig_sym(const GridSpec& grid, std::uint64_t seed,
                               double amplitude, int kmax) {
  SymTensorField u(grid);
  std::mt19937_64 rng(seed);
  for (int c = 0; c < u.components(); ++c)
    fill_random_trig(u.comp(c), grid, rng, amplitude, kmax);
  return u;
}

MetricField translate_metric(const MetricField& g, const std::array<int, 3>& shift) {
  return MetricField::build(translate(g.tensor(), shift));
}

}  // namespace einop
