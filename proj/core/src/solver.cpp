#include "einop/solver.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

#include "einop/operators.hpp"
#include "einop/tensor_algebra.hpp"

namespace einop {

namespace {

std::vector<double> to_vec(const FieldBase& f) {
  return std::vector<double>(f.raw(), f.raw() + f.size());
}

SymTensorField sym_from_vec(const GridSpec& grid, const std::vector<double>& v) {
  SymTensorField f(grid);
  std::memcpy(f.raw(), v.data(), v.size() * sizeof(double));
  return f;
}

}  // namespace

SymTensorField build_E(const Background& bg, const SymTensorField& h,
                       const SymTensorField& e, const S2KernelProjector& pi) {
  require_same_grid(bg.grid(), h.grid(), "build_E");
  require_same_grid(bg.grid(), e.grid(), "build_E");
  SymTensorField out = bg.ein_g + e;
  if (!pi.empty()) out.add_scaled(-0.5, pi.project(h));
  return out;
}

ResidualParts residual_parts(const Background& bg, const SymTensorField& h,
                             const SymTensorField& e, const S2KernelProjector& pi) {
  const int n = bg.dim();
  if (std::abs(1.0 + bg.kappa * n) < 1e-12)
    throw SingularCoefficientError("residual_F: 1 + kappa n vanishes");

  ResidualParts parts;
  SymTensorField E = build_E(bg, h, e, pi);

  MetricField ghat = MetricField::build(bg.g.tensor() + h);
  ChristoffelField gamma_hat = christoffel(ghat);

  // Curvature of g+h from scratch (the increment form exists for validation).
  CurvatureSet chat = riemann_ricci_scalar(ghat);
  parts.ricci_part = chat.ric - bg.curvature.ric;

  ScalarField tr_E = trace(ghat, E);
  parts.zero_order = SymTensorField(bg.grid());
  for (long p = 0; p < bg.grid().num_points(); ++p) {
    const double w = (bg.kappa * tr_E.at(p) + bg.lambda) / (1.0 + bg.kappa * n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        parts.zero_order.at(i, j, p) =
            w * ghat.lo(i, j, p) - E.at(i, j, p) + bg.curvature.ric.at(i, j, p);
  }

  parts.gauge = gauge_term_at(bg, ghat, gamma_hat, E);

  parts.total = parts.ricci_part + parts.zero_order;
  parts.total.add_scaled(-1.0, parts.gauge);
  return parts;
}

SymTensorField residual_F(const Background& bg, const SymTensorField& h,
                          const SymTensorField& e, const S2KernelProjector& pi) {
  return residual_parts(bg, h, e, pi).total;
}

SymTensorField linearized_F0(const Background& bg, const ScalarField& u,
                             const SymTensorField& h_tracefree,
                             const S2KernelProjector& pi) {
  const int n = bg.dim();
  const double tf_dev = sup_norm(trace(bg.g, h_tracefree));
  if (tf_dev > 1e-10 * std::max(1.0, sup_norm(h_tracefree)))
    throw Error("linearized_F0: input is not trace-free (trace sup " +
                std::to_string(tf_dev) + ")");

  // Pure-trace part: 1/2 [p(u) + pi(u)] g - (n-2) n kappa/(2(1+kappa n)) Hess0 u.
  ScalarField pu = laplacian(geometry(bg), u);
  const double coef = 1.0 + 2.0 * (n - 1) * bg.kappa;
  for (long p = 0; p < bg.grid().num_points(); ++p)
    pu.at(p) = coef * pu.at(p) + 2.0 * bg.lambda * u.at(p);
  if (!pi.empty()) pu.add_scaled(1.0, pi.project_scalar(u));
  pu.scale(0.5);
  SymTensorField out = scalar_times_metric(pu, bg.g);

  const double hess_coef =
      (n - 2) * n * bg.kappa / (2.0 * (1.0 + bg.kappa * n));
  if (hess_coef != 0.0)
    out.add_scaled(-hess_coef, tracefree_hessian(geometry(bg), u));

  // Trace-free part: 1/2 (P_tf + Pi_tf) h_tf.
  SymTensorField pt = lichnerowicz_laplacian(bg, h_tracefree);
  for (long p = 0; p < bg.grid().num_points(); ++p) {
    const double sh = 2.0 * bg.kappa * bg.curvature.scalar.at(p) + 2.0 * bg.lambda;
    for (int c = 0; c < pt.components(); ++c)
      pt.value(c, p) += sh * h_tracefree.value(c, p);
  }
  if (!pi.empty()) pt.add_scaled(1.0, pi.project_tracefree(h_tracefree));
  out.add_scaled(0.5, pt);
  return out;
}

SymTensorField linearized_F0_split(const Background& bg, const SymTensorField& v,
                                   const S2KernelProjector& pi) {
  TraceSplit split = trace_and_split(bg.g, v);
  ScalarField u = split.trace;
  u.scale(1.0 / bg.dim());
  return linearized_F0(bg, u, split.tracefree_part, pi);
}

// ---- Fourier inverse of the h = 0 linearization --------------------------------

FlatLinearizedInverse::FlatLinearizedInverse(const Background& bg,
                                             const S2KernelProjector& pi)
    : bg_(&bg) {
  if (!bg.flags.metric_constant)
    throw Error("FlatLinearizedInverse: background metric is not constant");
  const int n = bg.dim();
  const int nsym = bg.grid().sym_components();
  const GridSpec grid = bg.grid();

  std::vector<double> g0(n * n), g0i(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      g0[i * n + j] = bg.g.lo(i, j, 0);
      g0i[i * n + j] = bg.g.up(i, j, 0);
    }
  const double kappa = bg.kappa, lambda = bg.lambda;
  const double coef_p = 1.0 + 2.0 * (n - 1) * kappa;
  const double hess_coef = (n - 2) * n * kappa / (2.0 * (1.0 + kappa * n));

  // kernel-mode tolerance relative to the largest symbol
  std::array<int, 3> kmax{0, 0, 0};
  for (int a = 0; a < n; ++a) kmax[a] = grid.npts[a] / 2;
  const double lap_max = flat_laplacian_symbol(grid, g0i, kmax);
  const double ktol = 1e-8 * (std::abs(coef_p) * lap_max + std::abs(2.0 * lambda) + 1.0);
  const bool scalar_kernel = pi.scalar_dim() > 0;
  const bool tracefree_kernel = pi.tracefree_dim() > 0;

  auto assemble = [=](const std::array<int, 3>& k, Eigen::MatrixXd& a) {
    const double lap = flat_laplacian_symbol(grid, g0i, k);
    const double p_sym = coef_p * lap + 2.0 * lambda;
    const double t_sym = lap + 2.0 * lambda;
    const double pi_scalar = (scalar_kernel && std::abs(p_sym) <= ktol) ? 1.0 : 0.0;
    const double pi_tf = (tracefree_kernel && std::abs(t_sym) <= ktol) ? 1.0 : 0.0;

    // Hessian symbol as a symmetric matrix and its trace-free part.
    std::vector<double> hs(n * n);
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) {
        if (x == y)
          hs[x * n + y] = -second_derivative_symbol(k[x], grid.npts[x], grid.length[x]);
        else
          hs[x * n + y] = -first_derivative_symbol(k[x], grid.npts[x], grid.length[x]) *
                          first_derivative_symbol(k[y], grid.npts[y], grid.length[y]);
      }
    double tr_h = 0.0;
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) tr_h += g0i[x * n + y] * hs[x * n + y];
    std::vector<double> hs_tf(n * n);
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        hs_tf[x * n + y] = hs[x * n + y] - (tr_h / n) * g0[x * n + y];

    a.setZero(nsym, nsym);
    for (int c = 0; c < nsym; ++c) {
      // expand stored component c to its (i,j) pair
      int ci = 0, cj = 0;
      for (int i = 0; i < n && !(ci || cj); ++i)
        for (int j = i; j < n; ++j)
          if (sym_index(n, i, j) == c) {
            ci = i;
            cj = j;
            i = n;
            break;
          }
      const double u_c = ((ci == cj) ? g0i[ci * n + cj] : 2.0 * g0i[ci * n + cj]) / n;
      for (int d = 0; d < nsym; ++d) {
        int di = 0, dj = 0;
        for (int i = 0; i < n && !(di || dj); ++i)
          for (int j = i; j < n; ++j)
            if (sym_index(n, i, j) == d) {
              di = i;
              dj = j;
              i = n;
              break;
            }
        const double e_cd = (d == c) ? 1.0 : 0.0;
        const double tf_cd = e_cd - u_c * g0[di * n + dj];
        a(d, c) = 0.5 * (p_sym + pi_scalar) * u_c * g0[di * n + dj] -
                  hess_coef * u_c * hs_tf[di * n + dj] +
                  0.5 * (t_sym + pi_tf) * tf_cd;
      }
    }
  };

  block_ = std::make_shared<FourierBlockInverse>(grid, nsym, assemble);
}

SymTensorField FlatLinearizedInverse::apply(const SymTensorField& r) const {
  SymTensorField out(r.grid());
  block_->apply({r.raw(), r.size()}, {out.raw(), out.size()});
  return out;
}

// ---- GMRES ----------------------------------------------------------------------

namespace {

using Apply = std::function<void(const std::vector<double>&, std::vector<double>&)>;

struct GmresStats {
  int iterations = 0;
  double rel_residual = 1.0;
};

// Right-preconditioned GMRES in the weighted geometry of `mass`.
GmresStats gmres(const Apply& matvec, const Apply& precond,
                 const LinearOperatorHandle& mass, const std::vector<double>& b,
                 std::vector<double>& x, double rtol, int maxit) {
  const long nd = static_cast<long>(b.size());
  const double bnorm = mass.weighted_norm(b);
  GmresStats stats;
  x.assign(nd, 0.0);
  if (bnorm == 0.0) {
    stats.rel_residual = 0.0;
    return stats;
  }

  std::vector<std::vector<double>> v;  // Krylov basis (preconditioned space)
  std::vector<double> h;               // Hessenberg, column-major (maxit+1 rows)
  const int rows = maxit + 1;
  h.assign(static_cast<size_t>(rows) * maxit, 0.0);
  std::vector<double> cs(maxit, 0.0), sn(maxit, 0.0), gamma(rows, 0.0);

  v.push_back(b);
  for (double& t : v[0]) t /= bnorm;
  gamma[0] = bnorm;

  std::vector<double> z(nd), w(nd);
  int ncols = 0;
  double prev = 1.0;
  int stall = 0;
  for (int j = 0; j < maxit; ++j) {
    precond(v[j], z);
    matvec(z, w);
    // modified Gram-Schmidt with one re-orthogonalization pass
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i <= j; ++i) {
        const double hij = mass.weighted_dot(w, v[i]);
        h[static_cast<size_t>(j) * rows + i] += hij;
        for (long t = 0; t < nd; ++t) w[t] -= hij * v[i][t];
      }
    const double hnext = mass.weighted_norm(w);

    // accumulated Givens rotations, then the new one
    for (int i = 0; i < j; ++i) {
      const double a = h[static_cast<size_t>(j) * rows + i];
      const double bb = h[static_cast<size_t>(j) * rows + i + 1];
      h[static_cast<size_t>(j) * rows + i] = cs[i] * a + sn[i] * bb;
      h[static_cast<size_t>(j) * rows + i + 1] = -sn[i] * a + cs[i] * bb;
    }
    const double a = h[static_cast<size_t>(j) * rows + j];
    const double r = std::hypot(a, hnext);
    ncols = j + 1;
    if (r == 0.0) break;
    cs[j] = a / r;
    sn[j] = hnext / r;
    h[static_cast<size_t>(j) * rows + j] = r;
    gamma[j + 1] = -sn[j] * gamma[j];
    gamma[j] = cs[j] * gamma[j];

    stats.rel_residual = std::abs(gamma[j + 1]) / bnorm;
    if (stats.rel_residual <= rtol || hnext == 0.0) break;
    if (j + 1 < maxit) {
      std::vector<double> vn = w;
      for (double& t : vn) t /= hnext;
      v.push_back(std::move(vn));
    }
    if (stats.rel_residual > 0.99 * prev) {
      if (++stall >= 5) break;  // FD-noise floor reached
    } else {
      stall = 0;
    }
    prev = stats.rel_residual;
  }

  // back substitution on the ncols x ncols triangular system
  std::vector<double> y(ncols, 0.0);
  for (int i = ncols - 1; i >= 0; --i) {
    double s = gamma[i];
    for (int j = i + 1; j < ncols; ++j)
      s -= h[static_cast<size_t>(j) * rows + i] * y[j];
    const double d = h[static_cast<size_t>(i) * rows + i];
    y[i] = (d != 0.0) ? s / d : 0.0;
  }
  std::vector<double> acc(nd, 0.0);
  for (int i = 0; i < ncols && i < static_cast<int>(v.size()); ++i)
    for (long t = 0; t < nd; ++t) acc[t] += y[i] * v[i][t];
  precond(acc, x);
  stats.iterations = ncols;
  return stats;
}

}  // namespace

// ---- Newton ----------------------------------------------------------------------

SolveReport newton_solve(const Background& bg, const SymTensorField& e,
                         const S2KernelProjector& pi, const HypothesisReport& license,
                         const SolveOptions& opts, bool exploratory,
                         const SymTensorField* initial_guess) {
  if (!license.licensed && !exploratory)
    throw NotLicensedError("solve refused: " + license.verdict);
  if (sup_norm(e) > opts.smallness)
    throw Error("newton_solve: sup|e| = " + std::to_string(sup_norm(e)) +
                " outside the smallness ball " + std::to_string(opts.smallness));

  const GridSpec& grid = bg.grid();
  LinearOperatorHandle mass(bg, OperatorTag::FullP);  // weighted dots only

  std::unique_ptr<FlatLinearizedInverse> inv0;
  if (bg.flags.metric_constant)
    inv0 = std::make_unique<FlatLinearizedInverse>(bg, pi);

  SolveReport rep;
  rep.exploratory = exploratory && !license.licensed;
  rep.h = initial_guess ? *initial_guess : SymTensorField(grid);
  if (initial_guess) MetricField::build(bg.g.tensor() + rep.h);  // SPD gate

  auto eval = [&](const SymTensorField& h) {
    return to_vec(residual_F(bg, h, e, pi));
  };

  std::vector<double> f = eval(rep.h);
  const double escale = std::max(mass.weighted_norm(to_vec(e)), 1e-300);
  double rnorm = mass.weighted_norm(f);
  rep.residual_history.push_back(rnorm);

  const double hscale0 = 1.0 + mass.weighted_norm(to_vec(rep.h));

  auto matvec = [&](const std::vector<double>& vin, std::vector<double>& vout) {
    const double vnorm = mass.weighted_norm(vin);
    if (vnorm == 0.0) {
      vout.assign(vin.size(), 0.0);
      return;
    }
    const double t = opts.fd_step * hscale0;
    SymTensorField dir = sym_from_vec(grid, vin);
    dir.scale(t / vnorm);
    SymTensorField hp = rep.h + dir;
    SymTensorField hm = rep.h - dir;
    std::vector<double> fp = eval(hp);
    std::vector<double> fm = eval(hm);
    vout.resize(vin.size());
    const double w = vnorm / (2.0 * t);
    for (size_t i = 0; i < vin.size(); ++i) vout[i] = (fp[i] - fm[i]) * w;
  };

  auto precond = [&](const std::vector<double>& vin, std::vector<double>& vout) {
    if (inv0) {
      SymTensorField r = sym_from_vec(grid, vin);
      SymTensorField z = inv0->apply(r);
      vout = to_vec(z);
    } else {
      vout = vin;
    }
  };

  bool diverged = false;
  int iter = 0;
  for (; iter < opts.max_newton; ++iter) {
    if (rnorm <= opts.newton_tol * escale) break;

    std::vector<double> rhs(f.size());
    for (size_t i = 0; i < f.size(); ++i) rhs[i] = -f[i];
    std::vector<double> delta;
    gmres(matvec, precond, mass, rhs, delta, opts.linear_tol, opts.gmres_max);

    // backtracking line search with SPD monitoring
    double alpha = 1.0;
    bool accepted = false;
    SymTensorField h_try(grid);
    std::vector<double> f_try;
    double rn_try = 0.0;
    while (alpha >= 1e-4) {
      SymTensorField step = sym_from_vec(grid, delta);
      step.scale(alpha);
      h_try = rep.h + step;
      try {
        f_try = eval(h_try);
      } catch (const SpdError&) {
        alpha *= 0.5;  // g + h left the SPD cone, shrink
        continue;
      }
      rn_try = mass.weighted_norm(f_try);
      if (rn_try <= (1.0 - 1e-4 * alpha) * rnorm ||
          opts.damping == SolveOptions::Damping::None) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // in the roundoff basin a non-decreasing step is not divergence
      if (rnorm <= 1e3 * opts.newton_tol * escale) break;
      diverged = true;
      break;
    }
    rep.h = h_try;
    f = std::move(f_try);
    rnorm = rn_try;
    rep.residual_history.push_back(rnorm);
  }

  if (diverged)
    throw ConvergenceError(
        "newton_solve: residual increase after damping exhausted (residual " +
        std::to_string(rnorm) + ")");

  rep.iterations = iter;
  rep.converged = rnorm <= 1e3 * opts.newton_tol * escale;
  if (!rep.converged)
    rep.message = "newton budget exhausted at relative residual " +
                  std::to_string(rnorm / escale);

  // a posteriori residuals through the curvature module
  MetricField ghat = MetricField::build(bg.g.tensor() + rep.h);
  SymTensorField ein_hat = ein(bg, ghat);
  SymTensorField eq = ein_hat - bg.ein_g;
  eq.add_scaled(-1.0, e);
  if (!pi.empty()) eq.add_scaled(0.5, pi.project(rep.h));
  rep.equation_residual = sup_norm(eq);

  SymTensorField E = build_E(bg, rep.h, e, pi);
  ChristoffelField gamma_hat = christoffel(ghat);
  BianchiForms forms = divergence_and_bianchi(Geometry{ghat, gamma_hat}, E, bg.kappa);
  rep.gauge_residual = sup_norm(forms.ein_bianchi);

  rep.pi_component = pi.empty() ? 0.0 : mass.weighted_norm(to_vec(pi.project(rep.h)));
  return rep;
}

VerificationRecord verify_solution(const Background& bg, const SolveReport& report,
                                   const SymTensorField& e, const S2KernelProjector& pi,
                                   const HypothesisReport& license,
                                   const SolveOptions& opts, double equation_tol,
                                   double gauge_tol) {
  VerificationRecord rec;
  rec.equation_tol = equation_tol;
  rec.gauge_tol = gauge_tol;

  // independent recomputation (ein path, not the solver's split form)
  MetricField ghat = MetricField::build(bg.g.tensor() + report.h);
  SymTensorField ein_hat = ein(bg, ghat);
  SymTensorField eq = ein_hat - bg.ein_g;
  eq.add_scaled(-1.0, e);
  if (!pi.empty()) eq.add_scaled(0.5, pi.project(report.h));
  rec.equation_residual = sup_norm(eq);
  rec.pass_equation = rec.equation_residual <= equation_tol;

  SymTensorField E = build_E(bg, report.h, e, pi);
  ChristoffelField gamma_hat = christoffel(ghat);
  BianchiForms forms = divergence_and_bianchi(Geometry{ghat, gamma_hat}, E, bg.kappa);
  rec.gauge_residual = sup_norm(forms.ein_bianchi);
  rec.pass_gauge = rec.gauge_residual <= gauge_tol;

  // Lipschitz probe of e -> h over a refined segment
  LinearOperatorHandle mass(bg, OperatorTag::FullP);
  const bool exploratory = report.exploratory;
  auto solve_at = [&](double factor) {
    SymTensorField ee = e;
    ee.scale(factor);
    return newton_solve(bg, ee, pi, license, opts, exploratory);
  };
  SolveReport r1 = solve_at(1.0 + 1e-4);
  SolveReport r2 = solve_at(1.0 + 5e-5);
  const double de1 = 1e-4 * mass.weighted_norm(to_vec(e));
  const double de2 = 5e-5 * mass.weighted_norm(to_vec(e));
  rec.lipschitz_coarse = mass.weighted_norm(to_vec(r1.h - report.h)) / std::max(de1, 1e-300);
  rec.lipschitz_fine = mass.weighted_norm(to_vec(r2.h - report.h)) / std::max(de2, 1e-300);
  const double cmax = std::max({rec.lipschitz_coarse, rec.lipschitz_fine, 1e-300});
  rec.lipschitz_stable =
      std::isfinite(cmax) &&
      std::abs(rec.lipschitz_coarse - rec.lipschitz_fine) <= 0.5 * cmax;
  return rec;
}

std::string SolveReport::to_text() const {
  std::ostringstream os;
  os << "newton solve: " << (converged ? "converged" : "NOT converged") << " in "
     << iterations << " iterations";
  if (exploratory) os << " [exploratory: hypotheses not satisfied]";
  os << "\n  residual history (weighted L2):";
  for (double r : residual_history) os << " " << r;
  os << "\n  equation residual (sup): " << equation_residual
     << "\n  gauge residual (sup):    " << gauge_residual
     << "\n  |Pi(h)| (weighted L2):   " << pi_component << "\n";
  if (!message.empty()) os << "  note: " << message << "\n";
  return os.str();
}

void SolveReport::write_history_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw Error("SolveReport::write_history_csv: cannot open " + path);
  os << "iteration,residual\n";
  char buf[32];
  for (size_t i = 0; i < residual_history.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", residual_history[i]);
    os << i << "," << buf << "\n";
  }
}

std::string VerificationRecord::to_text() const {
  std::ostringstream os;
  os << "verification:\n"
     << "  equation residual " << equation_residual << " (tol " << equation_tol
     << "): " << (pass_equation ? "pass" : "FAIL") << "\n"
     << "  gauge residual    " << gauge_residual << " (tol " << gauge_tol
     << "): " << (pass_gauge ? "pass" : "FAIL") << "\n"
     << "  lipschitz |dh|/|de| coarse " << lipschitz_coarse << ", fine "
     << lipschitz_fine << ": " << (lipschitz_stable ? "stable" : "UNSTABLE")
     << "\n";
  return os.str();
}

}  // namespace einop
