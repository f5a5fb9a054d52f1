#include "einop/curvature.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "einop/derivatives.hpp"
#include "einop/operators.hpp"

namespace einop {

ChristoffelField christoffel(const MetricField& g) {
  const GridSpec& grid = g.grid();
  const int n = grid.dim;
  const long np = grid.num_points();

  std::vector<SymTensorField> dg(n);
  for (int a = 0; a < n; ++a) dg[a] = partial_derivative(g.tensor(), a);

  ChristoffelField gamma(grid);
  for (long p = 0; p < np; ++p)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          double s = 0.0;
          for (int m = 0; m < n; ++m)
            s += g.up(k, m, p) *
                 (dg[i].at(m, j, p) + dg[j].at(i, m, p) - dg[m].at(i, j, p));
          gamma.at(k, i, j, p) = 0.5 * s;
        }
  return gamma;
}

CurvatureSet riemann_ricci_scalar(const MetricField& g) {
  const GridSpec& grid = g.grid();
  const int n = grid.dim;
  const long np = grid.num_points();

  ChristoffelField gamma = christoffel(g);

  // Second derivatives of the metric, one field per axis pair a <= b.
  std::vector<SymTensorField> d2g(n * n);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      d2g[a * n + b] = second_partial(g.tensor(), a, b);
      if (b > a) d2g[b * n + a] = d2g[a * n + b];
    }

  // Lowered connection gamma_{m,ij} = g_mk Gamma^k_ij.
  ChristoffelField low(grid);
  for (long p = 0; p < np; ++p)
    for (int m = 0; m < n; ++m)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          double s = 0.0;
          for (int k = 0; k < n; ++k) s += g.lo(m, k, p) * gamma.at(k, i, j, p);
          low.at(m, i, j, p) = s;
        }

  CurvatureSet out;
  out.riem = FourTensorField(grid);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < np; ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            double v = 0.5 * (d2g[j * n + k].at(i, l, p) + d2g[i * n + l].at(j, k, p) -
                              d2g[j * n + l].at(i, k, p) - d2g[i * n + k].at(j, l, p));
            for (int m = 0; m < n; ++m)
              v += gamma.at(m, j, k, p) * low.at(m, i, l, p) -
                   gamma.at(m, j, l, p) * low.at(m, i, k, p);
            out.riem.at(i, j, k, l, p) = v;
          }

  out.ric = trace_four(g, out.riem);
  out.scalar = trace(g, out.ric);
  return out;
}

SymTensorField ein_from_curvature(const CurvatureSet& c, const MetricField& g,
                                  double kappa, double lambda) {
  const int n = g.grid().dim;
  SymTensorField e = c.ric;
  for (long p = 0; p < g.grid().num_points(); ++p) {
    const double w = kappa * c.scalar.at(p) + lambda;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) e.at(i, j, p) += w * g.lo(i, j, p);
  }
  return e;
}

namespace {

bool is_bitwise_constant(const FieldBase& f) {
  for (int c = 0; c < f.components(); ++c) {
    auto s = f.comp(c);
    for (size_t i = 1; i < s.size(); ++i)
      if (s[i] != s[0]) return false;
  }
  return true;
}

}  // namespace

Background make_background(MetricField g, double kappa, double lambda) {
  const int n = g.grid().dim;
  if (std::abs(1.0 + n * kappa) < 1e-9)
    throw SingularCoefficientError("kappa = -1/n is excluded (kappa = " +
                                   std::to_string(kappa) + ")");
  if (std::abs(1.0 + 2.0 * (n - 1) * kappa) < 1e-9)
    throw SingularCoefficientError("kappa = -1/(2(n-1)) is excluded (kappa = " +
                                   std::to_string(kappa) + ")");

  Background bg;
  bg.kappa = kappa;
  bg.lambda = lambda;
  bg.g = std::move(g);
  bg.christoffels = christoffel(bg.g);
  bg.curvature = riemann_ricci_scalar(bg.g);
  bg.ein_g = ein_from_curvature(bg.curvature, bg.g, kappa, lambda);

  const long np = bg.grid().num_points();
  const double ric_scale = std::max(sup_norm(bg.curvature.ric), 1e-14);

  // Ricci parallel: sup |D Ric| relative to the Ricci scale.
  Sym2GradientField dric =
      covariant_derivative(Geometry{bg.g, bg.christoffels}, bg.curvature.ric);
  bg.flags.ricci_parallel_dev = sup_norm(dric) / ric_scale;
  bg.flags.ricci_parallel = bg.flags.ricci_parallel_dev <= Background::ricci_parallel_tol;

  // Einstein constant: volume-weighted mean of R/n, then sup |Ric - tau g|.
  double vol = 0.0, rint = 0.0;
  for (long p = 0; p < np; ++p) {
    const double w = volume_element(bg.g, p);
    vol += w;
    rint += bg.curvature.scalar.at(p) * w;
  }
  bg.tau = rint / (n * vol);
  double dev = 0.0;
  for (long p = 0; p < np; ++p)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        dev = std::max(dev, std::abs(bg.curvature.ric.at(i, j, p) -
                                     bg.tau * bg.g.lo(i, j, p)));
  bg.flags.einstein_dev =
      dev / std::max({ric_scale, std::abs(bg.tau) * sup_norm(bg.g.tensor()), 1e-14});
  bg.flags.einstein = bg.flags.einstein_dev <= Background::ricci_parallel_tol;

  bg.flags.metric_constant = is_bitwise_constant(bg.g.tensor());

  // Ein endomorphism of T*M: eigenvalue margin and pointwise inverse.
  bg.ein_endo_inv = Tensor2Field(bg.grid());
  double min_abs = std::numeric_limits<double>::max(), max_abs = 0.0;
  bool invertible = true;
  for (long p = 0; p < np; ++p) {
    Eigen::MatrixXd e(n, n), gm(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        e(i, j) = bg.ein_g.at(i, j, p);
        gm(i, j) = bg.g.lo(i, j, p);
      }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(e, gm,
                                                                  Eigen::EigenvaluesOnly);
    for (int i = 0; i < n; ++i) {
      const double a = std::abs(ges.eigenvalues()(i));
      min_abs = std::min(min_abs, a);
      max_abs = std::max(max_abs, a);
    }
    Eigen::MatrixXd endo = e * gm.inverse();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(endo);
    if (!lu.isInvertible()) {
      invertible = false;
      continue;
    }
    Eigen::MatrixXd inv = lu.inverse();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) bg.ein_endo_inv.at(i, j, p) = inv(i, j);
  }
  bg.flags.ein_margin = (max_abs > 0.0) ? min_abs / max_abs : 0.0;
  bg.flags.ein_nondegenerate = invertible && bg.flags.ein_margin > Background::nondeg_tol;
  return bg;
}

SymTensorField ein(const Background& bg, const MetricField& g_eval) {
  require_same_grid(bg.grid(), g_eval.grid(), "ein");
  CurvatureSet c = riemann_ricci_scalar(g_eval);
  return ein_from_curvature(c, g_eval, bg.kappa, bg.lambda);
}

ChristoffelField deturck_tensor(const MetricField& g, const ChristoffelField& gamma,
                                const SymTensorField& h) {
  require_same_grid(g.grid(), h.grid(), "deturck_tensor");
  const GridSpec& grid = g.grid();
  const int n = grid.dim;

  MetricField ghat = MetricField::build(g.tensor() + h);
  Sym2GradientField dh = covariant_derivative(Geometry{g, gamma}, h);

  ChristoffelField t(grid);
  for (long p = 0; p < grid.num_points(); ++p)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          double s = 0.0;
          for (int m = 0; m < n; ++m)
            s += ghat.up(k, m, p) *
                 (dh.at(i, m, j, p) + dh.at(j, i, m, p) - dh.at(m, i, j, p));
          t.at(k, i, j, p) = 0.5 * s;
        }
  return t;
}

ChristoffelField deturck_tensor(const MetricField& g, const SymTensorField& h) {
  return deturck_tensor(g, christoffel(g), h);
}

SymTensorField ricci_increment(const MetricField& g, const ChristoffelField& gamma,
                               const SymTensorField& h) {
  const GridSpec& grid = g.grid();
  const int n = grid.dim;
  const long np = grid.num_points();

  ChristoffelField t = deturck_tensor(g, gamma, h);
  std::vector<ChristoffelField> dt(n);
  for (int a = 0; a < n; ++a) dt[a] = partial_derivative(t, a);

  // Trace 1-form t_j = T^l_jl and its plain derivatives.
  OneFormField tr(grid);
  for (long p = 0; p < np; ++p)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int l = 0; l < n; ++l) s += t.at(l, j, l, p);
      tr.at(j, p) = s;
    }
  std::vector<OneFormField> dtr(n);
  for (int a = 0; a < n; ++a) dtr[a] = partial_derivative(tr, a);

  SymTensorField out(grid);
  for (long p = 0; p < np; ++p)
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) {
        // D_l T^l_jk (connection terms of the (1,2)-tensor included)
        double div_t = 0.0;
        for (int l = 0; l < n; ++l) {
          div_t += dt[l].at(l, j, k, p);
          for (int q = 0; q < n; ++q)
            div_t += gamma.at(l, l, q, p) * t.at(q, j, k, p) -
                     gamma.at(q, l, j, p) * t.at(l, q, k, p) -
                     gamma.at(q, l, k, p) * t.at(l, j, q, p);
        }
        // D_k t_j
        double dk_tj = dtr[k].at(j, p);
        for (int q = 0; q < n; ++q) dk_tj -= gamma.at(q, k, j, p) * tr.at(q, p);
        // T T terms
        double tt = 0.0;
        for (int q = 0; q < n; ++q) {
          tt += t.at(q, j, k, p) * tr.at(q, p);
          for (int l = 0; l < n; ++l) tt -= t.at(q, j, l, p) * t.at(l, q, k, p);
        }
        out.at(j, k, p) = div_t - dk_tj + tt;
      }
  return out;
}

SymTensorField ricci_increment(const MetricField& g, const SymTensorField& h) {
  return ricci_increment(g, christoffel(g), h);
}

KnEin kn_ein(const Background& bg, double a) {
  const int n = bg.dim();
  if (n >= 3 && std::abs(a + 1.0 / (n - 2)) < 1e-12)
    throw Error("kn_ein: a = -1/(n-2) is excluded for n >= 3");

  KnEin out;
  out.a = a;
  out.b = (bg.kappa * (1.0 + a * (n - 2)) - a) / (2.0 * (n - 1));
  out.c = (1.0 + (n - 2) * a) * bg.lambda / (2.0 * (n - 1));
  out.trace_factor = a * (n - 2) + 1.0;

  SymTensorField s = bg.curvature.ric;  // a Ric + (b R + c) g
  s.scale(a);
  for (long p = 0; p < bg.grid().num_points(); ++p) {
    const double w = out.b * bg.curvature.scalar.at(p) + out.c;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) s.at(i, j, p) += w * bg.g.lo(i, j, p);
  }
  out.tensor = bg.curvature.riem + kulkarni_nomizu(bg.g.tensor(), s);
  return out;
}

Tensor13Field riemann_christoffel(const Background& bg, double a) {
  KnEin e4 = kn_ein(bg, a);
  const int n = bg.dim();
  const long np = bg.grid().num_points();
  Tensor13Field tau(bg.grid());
  for (long p = 0; p < np; ++p)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          for (int m = 0; m < n; ++m) {
            double s = 0.0;
            for (int j = 0; j < n; ++j)
              s += bg.g.up(i, j, p) * e4.tensor.at(j, k, l, m, p);
            tau.at(i, k, l, m, p) = s;
          }
  return tau;
}

double CurvatureSymmetryReport::worst() const {
  return std::max({antisym_first, antisym_second, pair_exchange, first_bianchi});
}

CurvatureSymmetryReport check_curvature_symmetries(const FourTensorField& f) {
  const int n = f.grid().dim;
  CurvatureSymmetryReport r;
  r.scale = std::max(sup_norm(f), 1e-30);
  for (long p = 0; p < f.grid().num_points(); ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            const double v = f.at(i, j, k, l, p);
            r.antisym_first = std::max(r.antisym_first, std::abs(v + f.at(j, i, k, l, p)));
            r.antisym_second = std::max(r.antisym_second, std::abs(v + f.at(i, j, l, k, p)));
            r.pair_exchange = std::max(r.pair_exchange, std::abs(v - f.at(k, l, i, j, p)));
            r.first_bianchi = std::max(
                r.first_bianchi,
                std::abs(v + f.at(i, k, l, j, p) + f.at(i, l, j, k, p)));
          }
  return r;
}

double R13SymmetryReport::worst() const { return std::max({trace, antisym, cyclic}); }

R13SymmetryReport check_r13_symmetries(const Tensor13Field& t) {
  const int n = t.grid().dim;
  R13SymmetryReport r;
  r.scale = std::max(sup_norm(t), 1e-30);
  for (long p = 0; p < t.grid().num_points(); ++p) {
    for (int l = 0; l < n; ++l)
      for (int m = 0; m < n; ++m) {
        double tr = 0.0;
        for (int i = 0; i < n; ++i) tr += t.at(i, i, l, m, p);
        r.trace = std::max(r.trace, std::abs(tr));
      }
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          for (int m = 0; m < n; ++m) {
            const double v = t.at(i, k, l, m, p);
            r.antisym = std::max(r.antisym, std::abs(v + t.at(i, k, m, l, p)));
            r.cyclic = std::max(
                r.cyclic, std::abs(v + t.at(i, m, k, l, p) + t.at(i, l, m, k, p)));
          }
  }
  return r;
}

}  // namespace einop
