#include "einop/operators.hpp"

#include <cmath>
#include <vector>

#include "einop/derivatives.hpp"

namespace einop {

OneFormField differential(const ScalarField& u) {
  const GridSpec& grid = u.grid();
  OneFormField d(grid);
  for (int a = 0; a < grid.dim; ++a)
    partial_derivative(grid, u.comp(0), d.comp(a), a);
  return d;
}

ScalarField codifferential(const Geometry& geo, const OneFormField& omega) {
  const GridSpec& grid = omega.grid();
  const int n = grid.dim;
  Tensor2Field dom = covariant_derivative(geo, omega);
  ScalarField out(grid);
  for (long p = 0; p < grid.num_points(); ++p) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += geo.metric.up(i, j, p) * dom.at(i, j, p);
    out.at(p) = -s;
  }
  return out;
}

Tensor2Field covariant_derivative(const Geometry& geo, const OneFormField& omega) {
  const GridSpec& grid = omega.grid();
  const int n = grid.dim;
  Tensor2Field out(grid);
  for (int a = 0; a < n; ++a) {
    for (int j = 0; j < n; ++j)
      partial_derivative(grid, omega.comp(j), out.comp(a * n + j), a);
  }
  for (long p = 0; p < grid.num_points(); ++p)
    for (int a = 0; a < n; ++a)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int m = 0; m < n; ++m) s += geo.gamma.at(m, a, j, p) * omega.at(m, p);
        out.at(a, j, p) -= s;
      }
  return out;
}

Sym2GradientField covariant_derivative(const Geometry& geo, const SymTensorField& h) {
  const GridSpec& grid = h.grid();
  const int n = grid.dim;
  const int nsym = grid.sym_components();
  Sym2GradientField out(grid);
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < nsym; ++c)
      partial_derivative(grid, h.comp(c), out.comp(a * nsym + c), a);
  for (long p = 0; p < grid.num_points(); ++p)
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          double s = 0.0;
          for (int m = 0; m < n; ++m)
            s += geo.gamma.at(m, a, i, p) * h.at(m, j, p) +
                 geo.gamma.at(m, a, j, p) * h.at(i, m, p);
          out.at(a, i, j, p) -= s;
        }
  return out;
}

SymTensorField hessian(const Geometry& geo, const ScalarField& u) {
  const GridSpec& grid = u.grid();
  const int n = grid.dim;
  OneFormField du = differential(u);
  SymTensorField hess(grid);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      second_partial(grid, u.comp(0), hess.comp(sym_index(n, i, j)), i, j);
  for (long p = 0; p < grid.num_points(); ++p)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int m = 0; m < n; ++m) s += geo.gamma.at(m, i, j, p) * du.at(m, p);
        hess.at(i, j, p) -= s;
      }
  return hess;
}

SymTensorField tracefree_hessian(const Geometry& geo, const ScalarField& u) {
  SymTensorField h = hessian(geo, u);
  TraceSplit split = trace_and_split(geo.metric, h);
  return split.tracefree_part;
}

SymTensorField killing(const Geometry& geo, const OneFormField& omega) {
  const GridSpec& grid = omega.grid();
  const int n = grid.dim;
  SymTensorField out(grid);
  std::vector<OneFormField> dom(n);
  for (int a = 0; a < n; ++a) dom[a] = partial_derivative(omega, a);
  for (long p = 0; p < grid.num_points(); ++p)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0.5 * (dom[i].at(j, p) + dom[j].at(i, p));
        for (int m = 0; m < n; ++m) s -= geo.gamma.at(m, i, j, p) * omega.at(m, p);
        out.at(i, j, p) = s;
      }
  return out;
}

OneFormField divergence(const Geometry& geo, const SymTensorField& u) {
  const GridSpec& grid = u.grid();
  const int n = grid.dim;
  Sym2GradientField du = covariant_derivative(geo, u);
  OneFormField out(grid);
  for (long p = 0; p < grid.num_points(); ++p)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          s += geo.metric.up(j, k, p) * du.at(k, j, i, p);
      out.at(i, p) = -s;
    }
  return out;
}

BianchiForms divergence_and_bianchi(const Geometry& geo, const SymTensorField& u,
                                    double kappa) {
  const int n = u.grid().dim;
  if (std::abs(1.0 + kappa * n) < 1e-12)
    throw SingularCoefficientError(
        "divergence_and_bianchi: 1 + kappa n vanishes (kappa = " +
        std::to_string(kappa) + ")");
  BianchiForms out;
  out.divergence = divergence(geo, u);
  OneFormField dtr = differential(trace(geo.metric, u));
  out.bianchi = lin_comb(1.0, out.divergence, 0.5, dtr);
  const double ck = (2.0 * kappa + 1.0) / (2.0 * (1.0 + kappa * n));
  out.ein_bianchi = lin_comb(1.0, out.divergence, ck, dtr);
  return out;
}

// ---- rough Laplacians ---------------------------------------------------------

ScalarField laplacian(const Geometry& geo, const ScalarField& u) {
  const GridSpec& grid = u.grid();
  const int n = grid.dim;
  OneFormField du = differential(u);
  std::vector<ScalarField> d2(n * n);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) d2[a * n + b] = second_partial(u, a, b);

  ScalarField out(grid);
  for (long p = 0; p < grid.num_points(); ++p) {
    double s = 0.0;
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) {
        double t = d2[std::min(k, l) * n + std::max(k, l)].at(p);
        for (int m = 0; m < n; ++m) t -= geo.gamma.at(m, k, l, p) * du.at(m, p);
        s += geo.metric.up(k, l, p) * t;
      }
    out.at(p) = -s;
  }
  return out;
}

OneFormField laplacian(const Geometry& geo, const OneFormField& omega) {
  const GridSpec& grid = omega.grid();
  const int n = grid.dim;
  const long np = grid.num_points();

  // W_{l i} = Gamma^m_{l i} omega_m; V = d omega - W is the covariant gradient.
  Tensor2Field w(grid);
  for (long p = 0; p < np; ++p)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int m = 0; m < n; ++m) s += geo.gamma.at(m, l, i, p) * omega.at(m, p);
        w.at(l, i, p) = s;
      }
  Tensor2Field v(grid);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      partial_derivative(grid, omega.comp(i), v.comp(l * n + i), l);
  v.add_scaled(-1.0, w);

  std::vector<Tensor2Field> dw(n);
  for (int a = 0; a < n; ++a) dw[a] = partial_derivative(w, a);

  // Second plain derivatives of each component, indexed [(a*n+b)*n + comp].
  std::vector<ScalarField> d2c(n * n * n);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b)
      for (int i = 0; i < n; ++i) {
        ScalarField tmp(grid);
        second_partial(grid, omega.comp(i), tmp.comp(0), a, b);
        d2c[(a * n + b) * n + i] = tmp;
      }

  OneFormField out(grid);
  for (long p = 0; p < np; ++p)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double t = d2c[(std::min(k, l) * n + std::max(k, l)) * n + i].at(p) -
                     dw[k].at(l, i, p);
          for (int q = 0; q < n; ++q)
            t -= geo.gamma.at(q, k, l, p) * v.at(q, i, p) +
                 geo.gamma.at(q, k, i, p) * v.at(l, q, p);
          s += geo.metric.up(k, l, p) * t;
        }
      out.at(i, p) = -s;
    }
  return out;
}

SymTensorField laplacian(const Geometry& geo, const SymTensorField& h) {
  const GridSpec& grid = h.grid();
  const int n = grid.dim;
  const int nsym = grid.sym_components();
  const long np = grid.num_points();

  // W_{l,ij} = Gamma^m_{l i} h_mj + Gamma^m_{l j} h_im; V = d h - W.
  Sym2GradientField w(grid);
  for (long p = 0; p < np; ++p)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          double s = 0.0;
          for (int m = 0; m < n; ++m)
            s += geo.gamma.at(m, l, i, p) * h.at(m, j, p) +
                 geo.gamma.at(m, l, j, p) * h.at(i, m, p);
          w.at(l, i, j, p) = s;
        }
  Sym2GradientField v(grid);
  for (int l = 0; l < n; ++l)
    for (int c = 0; c < nsym; ++c)
      partial_derivative(grid, h.comp(c), v.comp(l * nsym + c), l);
  v.add_scaled(-1.0, w);

  std::vector<Sym2GradientField> dw(n);
  for (int a = 0; a < n; ++a) dw[a] = partial_derivative(w, a);
  std::vector<SymTensorField> d2h(n * n);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) d2h[a * n + b] = second_partial(h, a, b);

  SymTensorField out(grid);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < np; ++p)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            double t = d2h[std::min(k, l) * n + std::max(k, l)].at(i, j, p) -
                       dw[k].at(l, i, j, p);
            for (int q = 0; q < n; ++q)
              t -= geo.gamma.at(q, k, l, p) * v.at(q, i, j, p) +
                   geo.gamma.at(q, k, i, p) * v.at(l, q, j, p) +
                   geo.gamma.at(q, k, j, p) * v.at(l, i, q, p);
            s += geo.metric.up(k, l, p) * t;
          }
        out.at(i, j, p) = -s;
      }
  return out;
}

SymTensorField ricci_action(const Background& bg, const SymTensorField& u) {
  const int n = bg.dim();
  SymTensorField out(bg.grid());
  for (long p = 0; p < bg.grid().num_points(); ++p)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k)
          for (int m = 0; m < n; ++m)
            s += bg.curvature.ric.at(i, k, p) * bg.g.up(k, m, p) * u.at(m, j, p) +
                 bg.curvature.ric.at(j, k, p) * bg.g.up(k, m, p) * u.at(m, i, p);
        out.at(i, j, p) = 0.5 * s;
      }
  return out;
}

SymTensorField riemann_action(const Background& bg, const SymTensorField& u) {
  const int n = bg.dim();
  SymTensorField out(bg.grid());
  const long np = bg.grid().num_points();
#pragma omp parallel for schedule(static)
  for (long p = 0; p < np; ++p) {
    // Raise both slots once per point.
    double up[9];
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) {
        double s = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            s += bg.g.up(k, a, p) * bg.g.up(l, b, p) * u.at(a, b, p);
        up[k * n + l] = s;
      }
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            s += bg.curvature.riem.at(i, k, j, l, p) * up[k * n + l];
        out.at(i, j, p) = s;
      }
  }
  return out;
}

SymTensorField lichnerowicz_laplacian(const Background& bg, const SymTensorField& h) {
  SymTensorField out = laplacian(geometry(bg), h);
  out.add_scaled(2.0, ricci_action(bg, h));
  out.add_scaled(-2.0, riemann_action(bg, h));
  return out;
}

OneFormField hodge_laplacian(const Background& bg, const OneFormField& omega) {
  const int n = bg.dim();
  OneFormField out = laplacian(geometry(bg), omega);
  for (long p = 0; p < bg.grid().num_points(); ++p)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m)
          s += bg.curvature.ric.at(i, k, p) * bg.g.up(k, m, p) * omega.at(m, p);
      out.at(i, p) += s;
    }
  return out;
}

OneFormField apply_ein_inverse(const Background& bg, const OneFormField& omega) {
  if (!bg.flags.ein_nondegenerate)
    throw Error("apply_ein_inverse: Ein(g) is degenerate (margin " +
                std::to_string(bg.flags.ein_margin) + ")");
  const int n = bg.dim();
  OneFormField out(bg.grid());
  for (long p = 0; p < bg.grid().num_points(); ++p)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += bg.ein_endo_inv.at(i, j, p) * omega.at(j, p);
      out.at(i, p) = s;
    }
  return out;
}

SymTensorField gauge_term_at(const Background& bg, const MetricField& g_hat,
                             const ChristoffelField& gamma_hat,
                             const SymTensorField& E) {
  BianchiForms forms =
      divergence_and_bianchi(Geometry{g_hat, gamma_hat}, E, bg.kappa);
  OneFormField mapped = apply_ein_inverse(bg, forms.ein_bianchi);
  return killing(geometry(bg), mapped);
}

SymTensorField gauge_term(const Background& bg, const SymTensorField& h,
                          const SymTensorField& E) {
  MetricField ghat = MetricField::build(bg.g.tensor() + h);
  ChristoffelField gamma_hat = christoffel(ghat);
  return gauge_term_at(bg, ghat, gamma_hat, E);
}

}  // namespace einop
