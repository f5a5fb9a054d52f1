#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "einop/fields.hpp"
#include "einop/fourier.hpp"
#include "einop/spectral.hpp"
#include "einop/tensor_algebra.hpp"

using namespace einop;

namespace {
const double kTwoPi = 2.0 * std::numbers::pi;

Background flat_bg(int dim, int n, double kappa, double lambda) {
  GridSpec grid = GridSpec::make_uniform(dim, n, kTwoPi);
  return make_background(make_euclidean_metric(grid), kappa, lambda);
}

// Sorted lattice eigenvalues sym(k) + shift of the discrete componentwise
// Laplacian on the flat torus, with multiplicity = comps per mode.
std::vector<double> lattice_spectrum(const GridSpec& grid, double coef, double shift,
                                     int comps, size_t count) {
  std::vector<double> vals;
  std::array<int, 3> k{0, 0, 0};
  const int half0 = grid.npts[0] / 2, half1 = grid.npts[1] / 2;
  for (k[0] = -half0; k[0] < half0; ++k[0])
    for (k[1] = -half1; k[1] < half1; ++k[1]) {
      double sym = 0.0;
      for (int a = 0; a < grid.dim; ++a)
        sym += second_derivative_symbol(k[a], grid.npts[a], grid.length[a]);
      for (int c = 0; c < comps; ++c) vals.push_back(coef * sym + shift);
    }
  std::sort(vals.begin(), vals.end());
  if (vals.size() > count) vals.resize(count);
  return vals;
}

std::vector<double> vec_of(const FieldBase& f) {
  return std::vector<double>(f.raw(), f.raw() + f.size());
}
}  // namespace

TEST_CASE("fourier transform round trip and symbols") {
  GridSpec grid = GridSpec::make(2, {16, 12, 1}, {kTwoPi, 3.0, 1.0});
  FourierTransform fft(grid);
  ScalarField u = random_trig_scalar(grid, 3, 1.0);
  std::vector<std::complex<double>> spec(fft.spectral_size());
  std::vector<double> back(grid.num_points());
  fft.forward({u.raw(), u.size()}, spec);
  fft.inverse(spec, back);
  double err = 0.0;
  for (long p = 0; p < grid.num_points(); ++p)
    err = std::max(err, std::abs(back[p] - u.at(p)));
  CHECK(err <= 1e-12);

  // d2 symbol is positive away from k=0, including Nyquist
  CHECK(second_derivative_symbol(0, 16, kTwoPi) == 0.0);
  CHECK(second_derivative_symbol(8, 16, kTwoPi) > 0.0);
  // and matches k^2 to 4th order for low modes
  const double s1 = second_derivative_symbol(1, 64, kTwoPi);
  CHECK(std::abs(s1 - 1.0) <= 2.0 / 90.0 * std::pow(kTwoPi / 64, 4));
}

TEST_CASE("operator handles: closed-form actions") {
  Background bg = flat_bg(2, 32, 0.0, 1.0);
  const GridSpec& grid = bg.grid();

  SUBCASE("scalar p at kappa=0, lambda=1 sends cos(x1) to ~3 cos(x1)") {
    LinearOperatorHandle h(bg, OperatorTag::ScalarP);
    ScalarField u(grid);
    for (long p = 0; p < grid.num_points(); ++p)
      u.at(p) = std::cos(grid.coord(0, grid.unflatten(p)[0]));
    std::vector<double> out(u.size());
    h.apply(vec_of(u), out);
    const double lam = second_derivative_symbol(1, 32, kTwoPi) + 2.0;
    double err = 0.0, err_cont = 0.0;
    for (long p = 0; p < grid.num_points(); ++p) {
      err = std::max(err, std::abs(out[p] - lam * u.at(p)));
      err_cont = std::max(err_cont, std::abs(out[p] - 3.0 * u.at(p)));
    }
    CHECK(err <= 1e-12);                                     // exact discrete action
    CHECK(err_cont <= 3.0 * std::pow(grid.spacing(0), 4));   // continuum limit
  }

  SUBCASE("trace-free operator kills constant trace-free fields at lambda=0") {
    Background bg0 = flat_bg(2, 16, 0.0, 0.0);
    LinearOperatorHandle h(bg0, OperatorTag::TraceFreeP);
    SymTensorField t = constant_sym(bg0.grid(), {1.0, 0.5, 0.5, -1.0});
    std::vector<double> out(t.size());
    h.apply(vec_of(t), out);
    double m = 0.0;
    for (double v : out) m = std::max(m, std::abs(v));
    CHECK(m == 0.0);
  }

  SUBCASE("hodge operator maps dx1 to exactly 2 dx1 at lambda=1") {
    LinearOperatorHandle h(bg, OperatorTag::HodgeP);
    OneFormField w(grid);
    for (long p = 0; p < grid.num_points(); ++p) w.at(0, p) = 1.0;
    std::vector<double> out(w.size());
    h.apply(vec_of(w), out);
    double err = 0.0;
    for (long p = 0; p < grid.num_points(); ++p) {
      err = std::max(err, std::abs(out[p] - 2.0));
      err = std::max(err, std::abs(out[grid.num_points() + p]));
    }
    CHECK(err == 0.0);
  }

  SUBCASE("trace-free handle preserves trace-freeness to 1e-12") {
    LinearOperatorHandle h(bg, OperatorTag::TraceFreeP);
    SymTensorField u = random_trig_sym(grid, 5, 1.0);
    std::vector<double> in = vec_of(u), out(u.size());
    h.apply(in, out);
    SymTensorField r(grid);
    std::copy(out.begin(), out.end(), r.raw());
    CHECK(sup_norm(trace(bg.g, r)) <= 1e-12 * std::max(1.0, sup_norm(r)));
  }
}

TEST_CASE("dense assembly invariants") {
  Background bg = flat_bg(2, 8, 0.25, 0.7);  // dof small enough for dense
  LinearOperatorHandle h(bg, OperatorTag::FullP);
  Eigen::MatrixXd s, m;
  h.assemble_dense(s, m);

  SUBCASE("assembled weak form is symmetric to 1e-10") {
    const double scale = s.cwiseAbs().maxCoeff();
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale);
  }

  SUBCASE("assembled action matches apply on random probes to 1e-12") {
    std::vector<double> x(h.dof()), ax(h.dof());
    SymTensorField u = random_trig_sym(bg.grid(), 9, 1.0);
    std::copy(u.raw(), u.raw() + u.size(), x.begin());
    h.apply(x, ax);
    Eigen::VectorXd xd = Eigen::VectorXd::Map(x.data(), h.dof());
    Eigen::VectorXd want = m.ldlt().solve(s * xd);  // A = M^{-1} S
    double err = 0.0, scale = 0.0;
    for (long i = 0; i < h.dof(); ++i) {
      err = std::max(err, std::abs(want(i) - ax[i]));
      scale = std::max(scale, std::abs(ax[i]));
    }
    CHECK(err <= 1e-10 * std::max(scale, 1.0));
  }
}

TEST_CASE("eigen_small: dense and lobpcg agree with the lattice closed form") {
  Background bg = flat_bg(2, 16, 0.0, 0.0);
  LinearOperatorHandle h(bg, OperatorTag::ScalarP);

  EigenOptions dense_opts;
  dense_opts.dense_limit = 10000;  // force dense at dof = 256
  std::vector<EigenPair> dense = eigen_small(h, 8, dense_opts);

  EigenOptions iter_opts;
  iter_opts.dense_limit = 0;  // force lobpcg
  std::vector<EigenPair> iter = eigen_small(h, 8, iter_opts);

  std::vector<double> closed = lattice_spectrum(bg.grid(), 1.0, 0.0, 1, 8);
  for (int i = 0; i < 8; ++i) {
    CHECK(dense[i].value == doctest::Approx(closed[i]).epsilon(1e-9));
    CHECK(iter[i].value == doctest::Approx(closed[i]).epsilon(1e-8));
  }
  // spectrum starts 0 then the four |k|^2 = 1 modes
  CHECK(dense[0].value == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  const double s1 = second_derivative_symbol(1, 16, kTwoPi);
  for (int i = 1; i <= 4; ++i)
    CHECK(dense[i].value == doctest::Approx(s1).epsilon(1e-9));

  // eigenfields pairwise orthogonal in the weighted inner product
  for (size_t a = 0; a < iter.size(); ++a)
    for (size_t b = 0; b < a; ++b)
      CHECK(std::abs(h.weighted_dot(iter[a].vec, iter[b].vec)) <= 1e-9);
}

TEST_CASE("trace-free spectrum has the 2 Lambda gap") {
  Background bg = flat_bg(2, 16, 0.0, 1.0);
  LinearOperatorHandle h(bg, OperatorTag::TraceFreeP);
  EigenOptions opts;
  opts.dense_limit = 0;
  std::vector<EigenPair> pairs = eigen_small(h, 4, opts);
  // smallest eigenvalue = 2 Lambda = 2 (constant trace-free fields, dim 2)
  CHECK(pairs[0].value == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(pairs[1].value == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("kernel detection and the split projector") {
  SUBCASE("lambda = 1: empty kernels, projection is zero") {
    Background bg = flat_bg(2, 16, 0.0, 1.0);
    S2KernelProjector pi = build_projector(bg);
    CHECK(pi.empty());
    SymTensorField h = random_trig_sym(bg.grid(), 3, 1.0);
    CHECK(sup_norm(pi.project(h)) == 0.0);
  }

  SUBCASE("lambda = 0: kernels are constants; projection is the mean") {
    Background bg = flat_bg(2, 16, 0.0, 0.0);
    LinearOperatorHandle full(bg, OperatorTag::FullP);
    KernelBasis kb = kernel_and_projection(full, 1e-8);
    CHECK(kb.dim() == 3);  // n(n+1)/2 constant symmetric tensors
    CHECK(kb.gap_ratio >= 10.0);

    S2KernelProjector pi = build_projector(bg);
    CHECK(pi.scalar_dim() == 1);
    CHECK(pi.tracefree_dim() == 2);

    SymTensorField h = random_trig_sym(bg.grid(), 7, 1.0);
    SymTensorField ph = pi.project(h);
    // componentwise mean oracle
    const long np = bg.grid().num_points();
    for (int c = 0; c < h.components(); ++c) {
      double mean = 0.0;
      for (long p = 0; p < np; ++p) mean += h.comp(c)[p];
      mean /= static_cast<double>(np);
      for (long p = 0; p < np; p += 37)
        CHECK(ph.comp(c)[p] == doctest::Approx(mean).epsilon(1e-9).scale(1.0));
    }

    // idempotent and zero on the orthogonal complement
    SymTensorField php = pi.project(ph);
    CHECK(sup_norm(php - ph) <= 1e-10 * std::max(1.0, sup_norm(ph)));
    SymTensorField perp = h - ph;
    CHECK(sup_norm(pi.project(perp)) <= 1e-10 * std::max(1.0, sup_norm(h)));
  }

  SUBCASE("projection of a kernel element returns it unchanged") {
    Background bg = flat_bg(2, 16, 0.0, 0.0);
    S2KernelProjector pi = build_projector(bg);
    SymTensorField c = constant_sym(bg.grid(), {0.4, -0.2, -0.2, 1.1});
    CHECK(sup_norm(pi.project(c) - c) <= 1e-10);
  }
}

TEST_CASE("shifted solve realizes the isomorphism") {
  SUBCASE("kernel right-hand side: x = y / c exactly") {
    Background bg = flat_bg(2, 16, 0.0, 0.0);
    LinearOperatorHandle h(bg, OperatorTag::ScalarP);
    KernelBasis kb = kernel_and_projection(h, 1e-8);
    CHECK(kb.dim() == 1);
    std::vector<double> y(h.dof(), 3.0);  // constant = kernel element
    std::vector<double> x = shifted_solve(h, -2.0, kb, y, 1e-10);
    for (long i = 0; i < h.dof(); i += 13)
      CHECK(x[i] == doctest::Approx(-1.5).epsilon(1e-10));
  }

  SUBCASE("apply-then-solve round trip off the kernel") {
    Background bg = flat_bg(2, 16, 0.0, 0.0);
    LinearOperatorHandle h(bg, OperatorTag::ScalarP);
    KernelBasis kb = kernel_and_projection(h, 1e-8);
    ScalarField z = random_trig_scalar(bg.grid(), 11, 1.0);
    std::vector<double> zv = vec_of(z), pz(zv.size());
    // remove the kernel component of z
    std::vector<double> kcomp(zv.size());
    project(h, kb, zv, kcomp);
    for (size_t i = 0; i < zv.size(); ++i) zv[i] -= kcomp[i];
    h.apply(zv, pz);
    std::vector<double> x = shifted_solve(h, 1.0, kb, pz, 1e-11);
    double err = 0.0, scale = 0.0;
    for (size_t i = 0; i < zv.size(); ++i) {
      err = std::max(err, std::abs(x[i] - zv[i]));
      scale = std::max(scale, std::abs(zv[i]));
    }
    CHECK(err <= 1e-8 * std::max(scale, 1.0));
  }

  SUBCASE("empty kernel: plain solve meets 1e-9, c ignored") {
    Background bg = flat_bg(2, 32, 0.0, 1.0);
    LinearOperatorHandle h(bg, OperatorTag::FullP);
    KernelBasis kb;  // empty
    SymTensorField y = random_trig_sym(bg.grid(), 13, 1.0);
    ShiftedSolveStats stats;
    std::vector<double> x = shifted_solve(h, 1.0, kb, vec_of(y), 1e-10, &stats);
    CHECK(stats.residual <= 1e-9);
  }

  SUBCASE("uniqueness: a different initial guess lands on the same solution") {
    Background bg = flat_bg(2, 16, 0.0, 0.0);
    LinearOperatorHandle h(bg, OperatorTag::ScalarP);
    KernelBasis kb = kernel_and_projection(h, 1e-8);
    ScalarField y = random_trig_scalar(bg.grid(), 17, 1.0);
    std::vector<double> x1 = shifted_solve(h, 1.0, kb, vec_of(y), 1e-11);
    std::vector<double> x0 = vec_of(random_trig_scalar(bg.grid(), 99, 5.0));
    std::vector<double> x2 = shifted_solve(h, 1.0, kb, vec_of(y), 1e-11, nullptr, x0);
    double err = 0.0;
    for (size_t i = 0; i < x1.size(); ++i) err = std::max(err, std::abs(x1[i] - x2[i]));
    CHECK(err <= 1e-8);
  }

  SUBCASE("c = 0 is rejected") {
    Background bg = flat_bg(2, 16, 0.0, 0.0);
    LinearOperatorHandle h(bg, OperatorTag::ScalarP);
    KernelBasis kb = kernel_and_projection(h, 1e-8);
    std::vector<double> y(h.dof(), 1.0);
    CHECK_THROWS_AS(shifted_solve(h, 0.0, kb, y), Error);
  }
}

TEST_CASE("hypothesis report") {
  SUBCASE("flat torus, kappa=0, lambda=1: licensed") {
    Background bg = flat_bg(2, 16, 0.0, 1.0);
    HypothesisReport rep = hypothesis_report(bg);
    CHECK(rep.licensed);
    CHECK(rep.verdict == "licensed");
    CHECK(rep.failures.empty());
    CHECK_FALSE(rep.spectrum_collision);
  }

  SUBCASE("lambda = 0: Hodge kernel of dimension n fails the hypotheses") {
    Background bg = flat_bg(2, 16, 0.0, 0.0);
    HypothesisReport rep = hypothesis_report(bg);
    CHECK_FALSE(rep.licensed);
    bool found = false;
    for (const std::string& f : rep.failures)
      if (f.find("ker P_H nontrivial (dim 2)") != std::string::npos) found = true;
    CHECK(found);
    CHECK(rep.verdict.find("hypotheses fail") == 0);
    // p kernel reduced to constants is fine by itself
    CHECK(rep.p_kernel_ok);
    // -2 Lambda = 0 is in the discrete spectrum (constants)
    CHECK(rep.spectrum_collision);
  }

  SUBCASE("lambda = -0.5: -2 Lambda = 1 collides with the discrete spectrum") {
    Background bg = flat_bg(2, 12, 0.0, -0.5);
    SpectralOptions opts;
    // the |k|^2 = 1 eigenvalue of the discrete laplacian is not exactly 1;
    // widen the kernel cut so the collision is detected at N = 12
    opts.kernel_tol = 5e-3;
    HypothesisReport rep = hypothesis_report(bg, opts);
    CHECK(rep.spectrum_collision);
    CHECK_FALSE(rep.licensed);
  }

  SUBCASE("csv and text artifacts") {
    Background bg = flat_bg(2, 16, 0.0, 1.0);
    HypothesisReport rep = hypothesis_report(bg);
    CHECK(rep.to_text().find("verdict: licensed") != std::string::npos);
    rep.write_csv("hypothesis_test.csv");
    std::remove("hypothesis_test.csv");
  }
}
