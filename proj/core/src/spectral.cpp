#include "einop/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "einop/operators.hpp"
#include "einop/tensor_algebra.hpp"

namespace einop {

const char* to_string(OperatorTag tag) {
  switch (tag) {
    case OperatorTag::ScalarP: return "p";
    case OperatorTag::TraceFreeP: return "P_tracefree";
    case OperatorTag::HodgeP: return "P_hodge";
    case OperatorTag::FullP: return "P_full";
    case OperatorTag::LichnerowiczShifted: return "lichnerowicz_shifted";
  }
  return "?";
}

BundleTag bundle_of(OperatorTag tag, int) {
  switch (tag) {
    case OperatorTag::ScalarP: return BundleTag::Function;
    case OperatorTag::TraceFreeP: return BundleTag::TraceFreeSym2;
    case OperatorTag::HodgeP: return BundleTag::OneForm;
    case OperatorTag::FullP: return BundleTag::Sym2;
    case OperatorTag::LichnerowiczShifted: return BundleTag::Sym2;
  }
  return BundleTag::Function;
}

namespace {

int ncomp_of(BundleTag b, int dim) {
  switch (b) {
    case BundleTag::Function: return 1;
    case BundleTag::OneForm: return dim;
    case BundleTag::Sym2:
    case BundleTag::TraceFreeSym2: return dim * (dim + 1) / 2;
  }
  return 1;
}

// Pairs (i,j) expanding a stored symmetric component.
int expand_sym(int dim, int c, int pairs[2][2]) {
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j)
      if (sym_index(dim, i, j) == c) {
        pairs[0][0] = i;
        pairs[0][1] = j;
        if (i != j) {
          pairs[1][0] = j;
          pairs[1][1] = i;
          return 2;
        }
        return 1;
      }
  return 0;
}

template <class F>
F field_from_span(const GridSpec& grid, std::span<const double> v) {
  F f(grid);
  std::memcpy(f.raw(), v.data(), v.size() * sizeof(double));
  return f;
}

void span_from_field(const FieldBase& f, std::span<double> v) {
  std::memcpy(v.data(), f.raw(), v.size() * sizeof(double));
}

// Pointwise trace-free projection in component layout.
void tracefree_constrain(const Background& bg, std::span<double> v) {
  const int n = bg.dim();
  const long np = bg.grid().num_points();
  const int nsym = bg.grid().sym_components();
  for (long p = 0; p < np; ++p) {
    double tr = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        tr += bg.g.up(i, j, p) * v[static_cast<size_t>(sym_index(n, i, j)) * np + p];
    const double u = tr / n;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        v[static_cast<size_t>(sym_index(n, i, j)) * np + p] -= u * bg.g.lo(i, j, p);
  }
  (void)nsym;
}

}  // namespace

LinearOperatorHandle::LinearOperatorHandle(const Background& bg, OperatorTag tag)
    : bg_(&bg), tag_(tag), bundle_(bundle_of(tag, bg.dim())),
      ncomp_(ncomp_of(bundle_, bg.dim())) {
  build_mass();
}

void LinearOperatorHandle::build_mass() {
  const int n = bg_->dim();
  const long np = bg_->grid().num_points();
  gram_.assign(static_cast<size_t>(ncomp_) * ncomp_ * np, 0.0);
  gram_inv_.assign(gram_.size(), 0.0);

  Eigen::MatrixXd g(ncomp_, ncomp_);
  for (long p = 0; p < np; ++p) {
    const double w = volume_element(bg_->g, p);
    if (bundle_ == BundleTag::Function) {
      g(0, 0) = w;
    } else if (bundle_ == BundleTag::OneForm) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = bg_->g.up(i, j, p) * w;
    } else {
      for (int c = 0; c < ncomp_; ++c)
        for (int d = 0; d < ncomp_; ++d) {
          int pc[2][2], pd[2][2];
          const int nc = expand_sym(n, c, pc);
          const int nd = expand_sym(n, d, pd);
          double s = 0.0;
          for (int a = 0; a < nc; ++a)
            for (int b = 0; b < nd; ++b)
              s += bg_->g.up(pc[a][0], pd[b][0], p) * bg_->g.up(pc[a][1], pd[b][1], p);
          g(c, d) = s * w;
        }
    }
    Eigen::MatrixXd gi = g.inverse();
    for (int c = 0; c < ncomp_; ++c)
      for (int d = 0; d < ncomp_; ++d) {
        gram_[(static_cast<size_t>(c) * ncomp_ + d) * np + p] = g(c, d);
        gram_inv_[(static_cast<size_t>(c) * ncomp_ + d) * np + p] = gi(c, d);
      }
  }
}

void LinearOperatorHandle::mass_apply(std::span<const double> in,
                                      std::span<double> out) const {
  const long np = bg_->grid().num_points();
  for (long p = 0; p < np; ++p)
    for (int c = 0; c < ncomp_; ++c) {
      double s = 0.0;
      for (int d = 0; d < ncomp_; ++d)
        s += gram_[(static_cast<size_t>(c) * ncomp_ + d) * np + p] *
             in[static_cast<size_t>(d) * np + p];
      out[static_cast<size_t>(c) * np + p] = s;
    }
}

void LinearOperatorHandle::mass_solve(std::span<const double> in,
                                      std::span<double> out) const {
  const long np = bg_->grid().num_points();
  for (long p = 0; p < np; ++p)
    for (int c = 0; c < ncomp_; ++c) {
      double s = 0.0;
      for (int d = 0; d < ncomp_; ++d)
        s += gram_inv_[(static_cast<size_t>(c) * ncomp_ + d) * np + p] *
             in[static_cast<size_t>(d) * np + p];
      out[static_cast<size_t>(c) * np + p] = s;
    }
}

double LinearOperatorHandle::weighted_dot(std::span<const double> a,
                                          std::span<const double> b) const {
  const long np = bg_->grid().num_points();
  double total = 0.0;
  for (long p = 0; p < np; ++p)
    for (int c = 0; c < ncomp_; ++c) {
      double s = 0.0;
      for (int d = 0; d < ncomp_; ++d)
        s += gram_[(static_cast<size_t>(c) * ncomp_ + d) * np + p] *
             b[static_cast<size_t>(d) * np + p];
      total += a[static_cast<size_t>(c) * np + p] * s;
    }
  return total;
}

void LinearOperatorHandle::apply(std::span<const double> in,
                                 std::span<double> out) const {
  const Background& bg = *bg_;
  const GridSpec& grid = bg.grid();
  const int n = bg.dim();
  const double shift_field_coef = 2.0 * bg.kappa;  // multiplies R(g)
  const double shift_const = 2.0 * bg.lambda;

  switch (tag_) {
    case OperatorTag::ScalarP: {
      ScalarField u = field_from_span<ScalarField>(grid, in);
      ScalarField lap = laplacian(geometry(bg), u);
      const double coef = 1.0 + 2.0 * (n - 1) * bg.kappa;
      for (long p = 0; p < grid.num_points(); ++p)
        lap.at(p) = coef * lap.at(p) + shift_const * u.at(p);
      span_from_field(lap, out);
      return;
    }
    case OperatorTag::HodgeP: {
      OneFormField w = field_from_span<OneFormField>(grid, in);
      OneFormField r = hodge_laplacian(bg, w);
      for (long p = 0; p < grid.num_points(); ++p) {
        const double sh = shift_field_coef * bg.curvature.scalar.at(p) + shift_const;
        for (int i = 0; i < n; ++i) r.at(i, p) += sh * w.at(i, p);
      }
      span_from_field(r, out);
      return;
    }
    case OperatorTag::TraceFreeP: {
      std::vector<double> tmp(in.begin(), in.end());
      tracefree_constrain(bg, tmp);
      SymTensorField h = field_from_span<SymTensorField>(grid, tmp);
      SymTensorField r = lichnerowicz_laplacian(bg, h);
      for (long p = 0; p < grid.num_points(); ++p) {
        const double sh = shift_field_coef * bg.curvature.scalar.at(p) + shift_const;
        for (int c = 0; c < ncomp_; ++c) r.value(c, p) += sh * h.value(c, p);
      }
      span_from_field(r, out);
      tracefree_constrain(bg, out);
      return;
    }
    case OperatorTag::FullP: {
      SymTensorField h = field_from_span<SymTensorField>(grid, in);
      SymTensorField r = lichnerowicz_laplacian(bg, h);
      ScalarField tr = trace(bg.g, h);
      ScalarField lap_tr = laplacian(geometry(bg), tr);
      const double kc = bg.kappa / (n * (1.0 + bg.kappa * n));
      for (long p = 0; p < grid.num_points(); ++p) {
        const double sh = shift_field_coef * bg.curvature.scalar.at(p) + shift_const;
        const double gterm =
            kc * ((n - 2) * lap_tr.at(p) - 2.0 * n * bg.tau * tr.at(p));
        for (int i = 0; i < n; ++i)
          for (int j = i; j < n; ++j)
            r.at(i, j, p) += sh * h.at(i, j, p) + gterm * bg.g.lo(i, j, p);
      }
      span_from_field(r, out);
      return;
    }
    case OperatorTag::LichnerowiczShifted: {
      SymTensorField h = field_from_span<SymTensorField>(grid, in);
      SymTensorField r = lichnerowicz_laplacian(bg, h);
      r.add_scaled(shift_const, h);
      span_from_field(r, out);
      return;
    }
  }
}

double LinearOperatorHandle::flat_symbol(const std::array<int, 3>& k) const {
  const Background& bg = *bg_;
  const int n = bg.dim();
  std::vector<double> g0_inv(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g0_inv[i * n + j] = bg.g.up(i, j, 0);
  const double lap = flat_laplacian_symbol(bg.grid(), g0_inv, k);
  switch (tag_) {
    case OperatorTag::ScalarP:
      return (1.0 + 2.0 * (n - 1) * bg.kappa) * lap + 2.0 * bg.lambda;
    default:
      // R = 0 on a constant metric, so every other tag reduces componentwise
      // to Delta + 2 Lambda (FullP trace coupling excluded on purpose).
      return lap + 2.0 * bg.lambda;
  }
}

std::shared_ptr<FourierDiagonalPreconditioner>
LinearOperatorHandle::make_preconditioner(double floor) const {
  if (!flat_background()) return nullptr;
  return std::make_shared<FourierDiagonalPreconditioner>(
      bg_->grid(), ncomp_,
      [this](const std::array<int, 3>& k) { return flat_symbol(k); }, floor);
}

void LinearOperatorHandle::assemble_dense(Eigen::MatrixXd& S, Eigen::MatrixXd& M) const {
  const long nd = dof();
  Eigen::MatrixXd A(nd, nd);
  M.resize(nd, nd);
  std::vector<double> e(nd, 0.0), col(nd);
  for (long j = 0; j < nd; ++j) {
    e[j] = 1.0;
    apply(e, col);
    for (long i = 0; i < nd; ++i) A(i, j) = col[i];
    mass_apply(e, col);
    for (long i = 0; i < nd; ++i) M(i, j) = col[i];
    e[j] = 0.0;
  }
  S = M * A;
  // For the constrained bundle push the pure-trace complement far away so the
  // generalized eigenproblem over the full coordinates does not see it.
  if (bundle_ == BundleTag::TraceFreeSym2) {
    const double sigma = 10.0 * std::max(1.0, operator_norm_estimate());
    std::vector<double> pe(nd);
    for (long j = 0; j < nd; ++j) {
      e[j] = 1.0;
      std::copy(e.begin(), e.end(), pe.begin());
      tracefree_constrain(*bg_, pe);
      mass_apply(pe, col);  // M P e_j
      for (long i = 0; i < nd; ++i) S(i, j) += sigma * (M(i, j) - col[i]);
      e[j] = 0.0;
    }
  }
}

double LinearOperatorHandle::operator_norm_estimate(int iters) const {
  const long nd = dof();
  std::mt19937_64 rng(0xA11CE);
  std::vector<double> v(nd), av(nd);
  for (long i = 0; i < nd; ++i)
    v[i] = 2.0 * ((rng() >> 11) * (1.0 / 9007199254740992.0)) - 1.0;
  if (bundle_ == BundleTag::TraceFreeSym2) tracefree_constrain(*bg_, v);
  double est = 0.0;
  for (int it = 0; it < iters; ++it) {
    const double nrm = weighted_norm(v);
    if (nrm == 0.0) break;
    for (long i = 0; i < nd; ++i) v[i] /= nrm;
    apply(v, av);
    est = std::abs(weighted_dot(v, av));
    v.swap(av);
    if (bundle_ == BundleTag::TraceFreeSym2) tracefree_constrain(*bg_, v);
  }
  return est;
}

// ---- eigen solvers ------------------------------------------------------------

namespace {

using Mat = Eigen::MatrixXd;

Mat handle_apply_block(const LinearOperatorHandle& h, const Mat& x) {
  Mat y(x.rows(), x.cols());
  std::vector<double> in(x.rows()), out(x.rows());
  for (int j = 0; j < x.cols(); ++j) {
    Eigen::VectorXd::Map(in.data(), x.rows()) = x.col(j);
    h.apply(in, out);
    y.col(j) = Eigen::VectorXd::Map(out.data(), x.rows());
  }
  return y;
}

Mat handle_mass_block(const LinearOperatorHandle& h, const Mat& x) {
  Mat y(x.rows(), x.cols());
  std::vector<double> in(x.rows()), out(x.rows());
  for (int j = 0; j < x.cols(); ++j) {
    Eigen::VectorXd::Map(in.data(), x.rows()) = x.col(j);
    h.mass_apply(in, out);
    y.col(j) = Eigen::VectorXd::Map(out.data(), x.rows());
  }
  return y;
}

void constrain_block(const LinearOperatorHandle& h, Mat& x) {
  if (h.bundle() != BundleTag::TraceFreeSym2) return;
  std::vector<double> v(x.rows());
  for (int j = 0; j < x.cols(); ++j) {
    Eigen::VectorXd::Map(v.data(), x.rows()) = x.col(j);
    tracefree_constrain(h.background(), v);
    x.col(j) = Eigen::VectorXd::Map(v.data(), x.rows());
  }
}

// M-orthonormalizes the columns of s, dropping near-dependent directions.
void m_orthonormalize(const LinearOperatorHandle& h, Mat& s) {
  for (int pass = 0; pass < 2; ++pass) {
    Mat ms = handle_mass_block(h, s);
    Mat gram = s.transpose() * ms;
    gram = 0.5 * (gram + gram.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(gram);
    const double gmax = std::max(es.eigenvalues().maxCoeff(), 1e-300);
    std::vector<int> keep;
    for (int i = 0; i < gram.rows(); ++i)
      if (es.eigenvalues()(i) > 1e-12 * gmax) keep.push_back(i);
    Mat t(gram.rows(), static_cast<int>(keep.size()));
    for (size_t i = 0; i < keep.size(); ++i)
      t.col(static_cast<int>(i)) =
          es.eigenvectors().col(keep[i]) / std::sqrt(es.eigenvalues()(keep[i]));
    s = s * t;
  }
}

std::vector<EigenPair> dense_eigen(const LinearOperatorHandle& h, int k) {
  Mat s, m;
  h.assemble_dense(s, m);
  s = 0.5 * (s + s.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(s, m);
  if (ges.info() != Eigen::Success)
    throw ConvergenceError("dense generalized eigensolve failed");
  std::vector<EigenPair> out;
  const long nd = h.dof();
  std::vector<double> av(nd), r(nd);
  for (int i = 0; i < k && i < ges.eigenvalues().size(); ++i) {
    EigenPair pair;
    pair.value = ges.eigenvalues()(i);
    pair.vec.resize(nd);
    Eigen::VectorXd::Map(pair.vec.data(), nd) = ges.eigenvectors().col(i);
    // operator-form residual A v - lambda v in the weighted norm
    h.apply(pair.vec, av);
    for (long j = 0; j < nd; ++j) r[j] = av[j] - pair.value * pair.vec[j];
    pair.residual = h.weighted_norm(r);
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<EigenPair> lobpcg(const LinearOperatorHandle& h, int k,
                              const EigenOptions& opts) {
  const long nd = h.dof();
  const int m = static_cast<int>(std::min<long>(nd, std::max(2 * k, k + 8)));
  const double scale = std::max(h.operator_norm_estimate(), 1e-12);

  auto precond = h.make_preconditioner(1e-6 * scale);

  std::mt19937_64 rng(opts.seed);
  Mat x(nd, m);
  for (long i = 0; i < nd; ++i)
    for (int j = 0; j < m; ++j)
      x(i, j) = 2.0 * ((rng() >> 11) * (1.0 / 9007199254740992.0)) - 1.0;
  constrain_block(h, x);
  m_orthonormalize(h, x);

  Mat p(nd, 0);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m);
  std::vector<double> vin(nd), vout(nd);

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    Mat ax = handle_apply_block(h, x);
    Mat mx = handle_mass_block(h, x);
    Mat hm = mx.transpose() * ax;  // X^T M A X, symmetric since M A is
    hm = 0.5 * (hm + hm.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(hm);
    x = x * es.eigenvectors();
    ax = ax * es.eigenvectors();
    theta = es.eigenvalues();

    Mat resid = ax - x * theta.asDiagonal();  // operator-form residuals

    // convergence of the k requested pairs in the weighted norm
    bool done = true;
    for (int j = 0; j < k && j < x.cols(); ++j) {
      Eigen::VectorXd::Map(vin.data(), nd) = resid.col(j);
      if (h.weighted_norm(vin) > opts.tol * scale) {
        done = false;
        break;
      }
    }
    if (done || iter == opts.max_iter - 1) break;

    Mat w(nd, x.cols());
    for (int j = 0; j < x.cols(); ++j) {
      Eigen::VectorXd::Map(vin.data(), nd) = resid.col(j);
      if (precond)
        precond->apply(vin, vout);
      else
        h.mass_solve(vin, vout);
      w.col(j) = Eigen::VectorXd::Map(vout.data(), nd);
    }
    constrain_block(h, w);

    // Deflate the new blocks against X before joining the trial space; the
    // near-parallel directions would otherwise wreck the Gram conditioning.
    w -= x * (mx.transpose() * w);
    m_orthonormalize(h, w);
    if (p.cols() > 0) {
      p -= x * (mx.transpose() * p);
      p -= w * (handle_mass_block(h, w).transpose() * p);
      m_orthonormalize(h, p);
    }

    Mat s(nd, x.cols() + w.cols() + p.cols());
    s.leftCols(x.cols()) = x;
    s.middleCols(x.cols(), w.cols()) = w;
    if (p.cols() > 0) s.rightCols(p.cols()) = p;
    m_orthonormalize(h, s);

    Mat as = handle_apply_block(h, s);
    Mat ms = handle_mass_block(h, s);
    Mat hs = ms.transpose() * as;
    hs = 0.5 * (hs + hs.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> ess(hs);
    const int mm = static_cast<int>(std::min<Eigen::Index>(m, hs.rows()));
    Mat y = ess.eigenvectors().leftCols(mm);
    Mat xnew = s * y;

    // next search directions: component of xnew M-orthogonal to x
    Mat mxn = handle_mass_block(h, xnew);
    p = xnew - x * (x.transpose() * mxn);
    x = xnew;
  }

  // final Ritz data
  Mat ax = handle_apply_block(h, x);
  Mat mx = handle_mass_block(h, x);
  Mat hm = mx.transpose() * ax;
  hm = 0.5 * (hm + hm.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(hm);
  x = x * es.eigenvectors();
  ax = ax * es.eigenvectors();
  theta = es.eigenvalues();

  std::vector<EigenPair> out;
  for (int j = 0; j < k && j < x.cols(); ++j) {
    EigenPair pair;
    pair.value = theta(j);
    pair.vec.resize(nd);
    Eigen::VectorXd::Map(pair.vec.data(), nd) = x.col(j);
    Eigen::VectorXd r = ax.col(j) - theta(j) * x.col(j);
    Eigen::VectorXd::Map(vin.data(), nd) = r;
    pair.residual = h.weighted_norm(vin);
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace

std::vector<EigenPair> eigen_small(const LinearOperatorHandle& handle, int k,
                                   const EigenOptions& opts) {
  if (k <= 0) return {};
  std::vector<EigenPair> pairs = (handle.dof() <= opts.dense_limit)
                                     ? dense_eigen(handle, k)
                                     : lobpcg(handle, k, opts);
  const double scale = std::max(handle.operator_norm_estimate(), 1e-12);
  for (const EigenPair& p : pairs)
    if (p.residual > 1e-8 * scale)
      throw ConvergenceError(
          std::string("eigen_small: residual ") + std::to_string(p.residual) +
          " above 1e-8 * operator scale " + std::to_string(scale) + " for " +
          to_string(handle.op()));
  return pairs;
}

KernelBasis kernel_and_projection(const LinearOperatorHandle& handle, double tol,
                                  const EigenOptions& opts) {
  const int probe = static_cast<int>(
      std::min<long>(handle.dof(), std::max(10, 2 * handle.ncomp() + 4)));
  std::vector<EigenPair> pairs = eigen_small(handle, probe, opts);
  const double scale = std::max(handle.operator_norm_estimate(), 1e-12);
  const double cut = tol * scale;

  KernelBasis kb;
  kb.bundle = handle.bundle();
  kb.threshold = cut;
  // The spectrum may be indefinite, so the kernel block need not sit at the
  // front of the ascending list: classify by |lambda|.
  std::vector<size_t> kept;
  double last_kept = 0.0;
  double first_rejected = std::numeric_limits<double>::max();
  for (size_t i = 0; i < pairs.size(); ++i) {
    const double a = std::abs(pairs[i].value);
    if (a <= cut) {
      kept.push_back(i);
      last_kept = std::max(last_kept, a);
    } else {
      first_rejected = std::min(first_rejected, a);
    }
  }
  if (kept.size() == pairs.size())
    throw AmbiguousKernelError(
        "kernel_and_projection: all probed eigenvalues below threshold " +
        std::to_string(cut) + "; enlarge the probe");
  kb.gap_ratio = first_rejected / std::max(last_kept, cut / 10.0);
  if (!kept.empty() && kb.gap_ratio < 10.0)
    throw AmbiguousKernelError(
        "kernel_and_projection: no clear spectral gap, eigenvalue window [" +
        std::to_string(last_kept) + ", " + std::to_string(first_rejected) +
        "] around threshold " + std::to_string(cut));

  for (size_t i : kept) {
    kb.eigenvalues.push_back(pairs[i].value);
    kb.fields.push_back(std::move(pairs[i].vec));
  }
  // Re-orthonormalize (M) and verify the Gram identity.
  if (!kb.fields.empty()) {
    const long nd = handle.dof();
    Mat s(nd, kb.dim());
    for (int j = 0; j < kb.dim(); ++j)
      s.col(j) = Eigen::VectorXd::Map(kb.fields[j].data(), nd);
    m_orthonormalize(handle, s);
    if (s.cols() != kb.dim())
      throw AmbiguousKernelError("kernel_and_projection: kernel basis degenerate");
    for (int j = 0; j < kb.dim(); ++j)
      Eigen::VectorXd::Map(kb.fields[j].data(), nd) = s.col(j);
    for (int a = 0; a < kb.dim(); ++a)
      for (int b = 0; b <= a; ++b) {
        const double dot = handle.weighted_dot(kb.fields[a], kb.fields[b]);
        if (std::abs(dot - (a == b ? 1.0 : 0.0)) > 1e-10)
          throw AmbiguousKernelError("kernel basis Gram deviates from identity");
      }
  }
  return kb;
}

void project(const LinearOperatorHandle& handle, const KernelBasis& kb,
             std::span<const double> in, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (const std::vector<double>& f : kb.fields) {
    const double c = handle.weighted_dot(in, f);
    for (size_t i = 0; i < out.size(); ++i) out[i] += c * f[i];
  }
}

std::vector<double> shifted_solve(const LinearOperatorHandle& handle, double c,
                                  const KernelBasis& kb, std::span<const double> y,
                                  double rel_tol, ShiftedSolveStats* stats,
                                  std::span<const double> x0) {
  if (c == 0.0) throw Error("shifted_solve: c must be nonzero");
  const long nd = handle.dof();
  std::vector<double> x(nd, 0.0);
  const double ynorm = handle.weighted_norm(y);
  if (ynorm == 0.0) return x;

  // Kernel part: (P + c Pi) maps ker components to c * themselves.
  std::vector<double> kcoef(kb.dim());
  std::vector<double> yperp(y.begin(), y.end());
  for (int i = 0; i < kb.dim(); ++i) {
    kcoef[i] = handle.weighted_dot(y, kb.fields[i]);
    for (long j = 0; j < nd; ++j) yperp[j] -= kcoef[i] * kb.fields[i][j];
  }

  auto deflate = [&](std::vector<double>& v) {
    for (const std::vector<double>& f : kb.fields) {
      const double d = handle.weighted_dot(v, f);
      for (long j = 0; j < nd; ++j) v[j] -= d * f[j];
    }
  };

  const double scale = std::max(handle.operator_norm_estimate(), 1e-12);
  auto precond = handle.make_preconditioner(1e-6 * scale);

  // Deflated PCG in the weighted geometry.
  std::vector<double> xp(nd, 0.0);
  if (!x0.empty()) {
    std::copy(x0.begin(), x0.end(), xp.begin());
    if (handle.bundle() == BundleTag::TraceFreeSym2)
      tracefree_constrain(handle.background(), xp);
    deflate(xp);
  }
  std::vector<double> r(nd), z(nd), p(nd), ap(nd);
  handle.apply(xp, ap);
  for (long j = 0; j < nd; ++j) r[j] = yperp[j] - ap[j];
  deflate(r);
  auto apply_precond = [&](const std::vector<double>& rin, std::vector<double>& zout) {
    if (precond)
      precond->apply(rin, zout);
    else
      handle.mass_solve(rin, zout);
    if (handle.bundle() == BundleTag::TraceFreeSym2)
      tracefree_constrain(handle.background(), zout);
    deflate(zout);
  };

  apply_precond(r, z);
  p = z;
  double rz = handle.weighted_dot(r, z);
  const int maxit = 500;
  int it = 0;
  for (; it < maxit; ++it) {
    if (handle.weighted_norm(r) <= 0.5 * rel_tol * ynorm) break;
    handle.apply(p, ap);
    const double pap = handle.weighted_dot(p, ap);
    if (!(pap > 0.0))
      throw ConvergenceError("shifted_solve: operator not positive on the "
                             "kernel complement (p^T A p = " +
                             std::to_string(pap) + ")");
    const double alpha = rz / pap;
    for (long j = 0; j < nd; ++j) {
      xp[j] += alpha * p[j];
      r[j] -= alpha * ap[j];
    }
    deflate(r);
    apply_precond(r, z);
    const double rz_new = handle.weighted_dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (long j = 0; j < nd; ++j) p[j] = z[j] + beta * p[j];
  }

  for (long j = 0; j < nd; ++j) x[j] = xp[j];
  for (int i = 0; i < kb.dim(); ++i)
    for (long j = 0; j < nd; ++j) x[j] += (kcoef[i] / c) * kb.fields[i][j];

  // Verify (P + c Pi) x = y.
  std::vector<double> ax(nd), px(nd);
  handle.apply(x, ax);
  project(handle, kb, x, px);
  for (long j = 0; j < nd; ++j) ax[j] += c * px[j] - y[j];
  const double res = handle.weighted_norm(ax) / ynorm;
  if (stats) {
    stats->iterations = it;
    stats->residual = res;
  }
  if (res > rel_tol * 10.0)
    throw ConvergenceError("shifted_solve: residual " + std::to_string(res) +
                           " did not meet tolerance");
  return x;
}

// ---- S2 projector ---------------------------------------------------------------

S2KernelProjector::S2KernelProjector(const Background& bg, KernelBasis scalar_kernel,
                                     KernelBasis tracefree_kernel)
    : bg_(&bg), scalar_(std::move(scalar_kernel)), tracefree_(std::move(tracefree_kernel)) {
  scalar_handle_.emplace(bg, OperatorTag::ScalarP);
  tracefree_handle_.emplace(bg, OperatorTag::TraceFreeP);
}

ScalarField S2KernelProjector::project_scalar(const ScalarField& u) const {
  ScalarField out(u.grid());
  if (!bg_ || scalar_.empty()) return out;
  std::vector<double> in(u.raw(), u.raw() + u.size()), res(u.size());
  einop::project(*scalar_handle_, scalar_, in, res);
  std::memcpy(out.raw(), res.data(), res.size() * sizeof(double));
  return out;
}

SymTensorField S2KernelProjector::project_tracefree(const SymTensorField& h) const {
  SymTensorField out(h.grid());
  if (!bg_ || tracefree_.empty()) return out;
  std::vector<double> in(h.raw(), h.raw() + h.size()), res(h.size());
  einop::project(*tracefree_handle_, tracefree_, in, res);
  std::memcpy(out.raw(), res.data(), res.size() * sizeof(double));
  return out;
}

SymTensorField S2KernelProjector::project(const SymTensorField& h) const {
  if (!bg_ || empty()) return SymTensorField(h.grid());
  TraceSplit split = trace_and_split(bg_->g, h);
  ScalarField u = split.trace;
  u.scale(1.0 / bg_->dim());
  SymTensorField out = scalar_times_metric(project_scalar(u), bg_->g);
  out.add_scaled(1.0, project_tracefree(split.tracefree_part));
  return out;
}

S2KernelProjector build_projector(const Background& bg, const SpectralOptions& opts) {
  LinearOperatorHandle ps(bg, OperatorTag::ScalarP);
  LinearOperatorHandle pt(bg, OperatorTag::TraceFreeP);
  KernelBasis ks = kernel_and_projection(ps, opts.kernel_tol, opts.eigen);
  KernelBasis kt = kernel_and_projection(pt, opts.kernel_tol, opts.eigen);
  return S2KernelProjector(bg, std::move(ks), std::move(kt));
}

// ---- hypothesis report ------------------------------------------------------------

namespace {

bool kernel_is_constant_field(const LinearOperatorHandle& h, const KernelBasis& kb) {
  if (kb.dim() != 1) return false;
  // Overlap of the kernel field with the constant field of its bundle.
  const long nd = h.dof();
  const long np = h.background().grid().num_points();
  std::vector<double> ones(nd, 0.0);
  for (long p = 0; p < np; ++p) ones[p] = 1.0;  // first component constant
  if (h.bundle() != BundleTag::Function) return false;
  const double nrm = h.weighted_norm(ones);
  const double overlap = std::abs(h.weighted_dot(kb.fields[0], ones)) /
                         std::max(nrm, 1e-300);
  return overlap > 1.0 - 1e-8;
}

}  // namespace

HypothesisReport hypothesis_report(const Background& bg, const SpectralOptions& opts) {
  HypothesisReport rep;
  rep.kappa = bg.kappa;
  rep.lambda = bg.lambda;
  rep.tau = bg.tau;
  rep.ein_margin = bg.flags.ein_margin;

  rep.kappa_valid = true;  // hard exclusions already rejected in make_background

  rep.background_ok = bg.flags.ricci_parallel;
  if (!bg.flags.ricci_parallel)
    rep.failures.push_back("background not Ricci-parallel (rel dev " +
                           std::to_string(bg.flags.ricci_parallel_dev) + ")");
  if (bg.kappa != 0.0 && !bg.flags.einstein) {
    rep.background_ok = false;
    rep.failures.push_back("background not Einstein (required for kappa != 0)");
  }

  rep.ein_nondegenerate = bg.flags.ein_nondegenerate;
  if (!rep.ein_nondegenerate)
    rep.failures.push_back("Ein(g) degenerate (eigenvalue margin " +
                           std::to_string(bg.flags.ein_margin) + ")");

  const OperatorTag tags[4] = {OperatorTag::ScalarP, OperatorTag::TraceFreeP,
                               OperatorTag::HodgeP, OperatorTag::LichnerowiczShifted};
  for (OperatorTag tag : tags) {
    LinearOperatorHandle h(bg, tag);
    OperatorSpectrum spec;
    spec.tag = tag;
    const int nmodes = std::max(opts.report_modes, 2 * h.ncomp() + 4);
    try {
      KernelBasis kb = kernel_and_projection(h, opts.kernel_tol, opts.eigen);
      spec.kernel_dim = kb.dim();
      spec.threshold = kb.threshold;
      spec.kernel_is_constants = kernel_is_constant_field(h, kb);
    } catch (const AmbiguousKernelError& e) {
      spec.kernel_dim = -1;
      rep.failures.push_back(std::string("ambiguous kernel for ") + to_string(tag) +
                             ": " + e.what());
    }
    std::vector<EigenPair> pairs =
        eigen_small(h, static_cast<int>(std::min<long>(h.dof(), nmodes)), opts.eigen);
    for (const EigenPair& p : pairs) spec.eigenvalues.push_back(p.value);
    rep.spectra.push_back(std::move(spec));
  }

  const OperatorSpectrum& sp_p = rep.spectra[0];
  const OperatorSpectrum& sp_h = rep.spectra[2];
  const OperatorSpectrum& sp_l = rep.spectra[3];

  rep.p_kernel_ok =
      sp_p.kernel_dim == 0 || (sp_p.kernel_dim == 1 && sp_p.kernel_is_constants);
  if (!rep.p_kernel_ok)
    rep.failures.push_back(
        "ker p nontrivial beyond constants (dim " +
        std::to_string(sp_p.kernel_dim) + ")");

  rep.hodge_kernel_ok = sp_h.kernel_dim == 0;
  if (!rep.hodge_kernel_ok)
    rep.failures.push_back("ker P_H nontrivial (dim " +
                           std::to_string(sp_h.kernel_dim) + ")");

  rep.spectrum_collision = sp_l.kernel_dim != 0;

  rep.licensed = rep.kappa_valid && rep.background_ok && rep.ein_nondegenerate &&
                 rep.p_kernel_ok && rep.hodge_kernel_ok &&
                 sp_p.kernel_dim >= 0 && sp_h.kernel_dim >= 0;

  if (rep.licensed) {
    rep.verdict = "licensed";
  } else {
    std::string v = "hypotheses fail: ";
    for (size_t i = 0; i < rep.failures.size(); ++i)
      v += (i ? "; " : "") + rep.failures[i];
    rep.verdict = v;
  }
  return rep;
}

std::string HypothesisReport::to_text() const {
  std::ostringstream os;
  os << "hypothesis report (kappa=" << kappa << ", lambda=" << lambda
     << ", tau=" << tau << ")\n";
  os << "  background Ricci-parallel/Einstein check: "
     << (background_ok ? "pass" : "FAIL") << "\n";
  os << "  Ein(g) nondegenerate: " << (ein_nondegenerate ? "pass" : "FAIL")
     << " (margin " << ein_margin << ")\n";
  for (const OperatorSpectrum& s : spectra) {
    os << "  " << to_string(s.tag) << ": kernel dim ";
    if (s.kernel_dim < 0)
      os << "ambiguous";
    else
      os << s.kernel_dim;
    if (s.kernel_is_constants) os << " (constants)";
    os << ", smallest eigenvalues:";
    for (size_t i = 0; i < s.eigenvalues.size() && i < 8; ++i)
      os << " " << s.eigenvalues[i];
    os << "\n";
  }
  if (spectrum_collision)
    os << "  note: -2*Lambda lies in the discrete Lichnerowicz spectrum "
          "(projection Pi is nonzero)\n";
  os << "  verdict: " << verdict << "\n";
  return os.str();
}

void HypothesisReport::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw Error("HypothesisReport::write_csv: cannot open " + path);
  os << "operator,index,eigenvalue\n";
  char buf[32];
  for (const OperatorSpectrum& s : spectra)
    for (size_t i = 0; i < s.eigenvalues.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", s.eigenvalues[i]);
      os << to_string(s.tag) << "," << i << "," << buf << "\n";
    }
}

}  // namespace einop
