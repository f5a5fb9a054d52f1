#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "einop/curvature.hpp"
#include "einop/derivatives.hpp"
#include "einop/fields.hpp"
#include "einop/operators.hpp"
#include "einop/tensor_algebra.hpp"

using namespace einop;

namespace {
const double kTwoPi = 2.0 * std::numbers::pi;

GridSpec torus(int dim, int n_per_axis) {
  return GridSpec::make_uniform(dim, n_per_axis, kTwoPi);
}

// Closed-form Ricci of e^{2f} delta on a flat base:
//   Ric_ij = -(n-2)(f_,ij - f_,i f_,j) - (Lap_e f + (n-2)|df|^2_e) delta_ij.
struct ConformalOracle {
  int dim;
  double amp;  // f = amp * sin(x1)
  double f1(double x) const { return amp * std::cos(x); }     // d f / dx1
  double f11(double x) const { return -amp * std::sin(x); }   // d2 f / dx1^2
  double ric(int i, int j, double x1) const {
    const int n = dim;
    double v = 0.0;
    if (i == 0 && j == 0) v -= (n - 2) * (f11(x1) - f1(x1) * f1(x1));
    if (i == j) v -= f11(x1) + (n - 2) * f1(x1) * f1(x1);
    return v;
  }
};

MetricField conformal_metric(const GridSpec& grid, double amp) {
  return make_conformal_metric(make_sin_field(grid, 0, amp));
}

double ric_closed_form_error(const MetricField& g, const SymTensorField& ric,
                             double amp) {
  const GridSpec& grid = g.grid();
  ConformalOracle oracle{grid.dim, amp};
  double err = 0.0;
  for (long p = 0; p < grid.num_points(); ++p) {
    const double x1 = grid.coord(0, grid.unflatten(p)[0]);
    for (int i = 0; i < grid.dim; ++i)
      for (int j = i; j < grid.dim; ++j)
        err = std::max(err, std::abs(ric.at(i, j, p) - oracle.ric(i, j, x1)));
  }
  return err;
}

// Restriction from a doubled grid onto the coarse one (points coincide).
SymTensorField restrict_to_coarse(const SymTensorField& fine, const GridSpec& coarse) {
  SymTensorField out(coarse);
  for (long p = 0; p < coarse.num_points(); ++p) {
    auto idx = coarse.unflatten(p);
    std::array<int, 3> fi{0, 0, 0};
    for (int a = 0; a < coarse.dim; ++a) fi[a] = 2 * idx[a];
    const long q = fine.grid().flatten(fi);
    for (int c = 0; c < out.components(); ++c) out.comp(c)[p] = fine.comp(c)[q];
  }
  return out;
}
}  // namespace

TEST_CASE("christoffel symbols") {
  SUBCASE("vanish exactly for constant metrics") {
    GridSpec grid = torus(2, 16);
    CHECK(sup_norm(christoffel(make_euclidean_metric(grid))) == 0.0);
    CHECK(sup_norm(christoffel(make_flat_metric(grid, {4, 0, 0, 1}))) == 0.0);
  }

  SUBCASE("conformal closed form Gamma^k_ij = d_i f d^k_j + d_j f d^k_i - d_ij d^k f") {
    for (int N : {32, 64}) {
      GridSpec grid = torus(2, N);
      const double amp = 0.1;
      ChristoffelField gamma = christoffel(conformal_metric(grid, amp));
      double err = 0.0;
      for (long p = 0; p < grid.num_points(); ++p) {
        const double c = amp * std::cos(grid.coord(0, grid.unflatten(p)[0]));
        err = std::max(err, std::abs(gamma.at(0, 0, 0, p) - c));  // Gamma^1_11 =  f'
        err = std::max(err, std::abs(gamma.at(0, 1, 1, p) + c));  // Gamma^1_22 = -f'
        err = std::max(err, std::abs(gamma.at(1, 0, 1, p) - c));  // Gamma^2_12 =  f'
        err = std::max(err, std::abs(gamma.at(1, 1, 1, p)));      // Gamma^2_22 =  0
      }
      const double h4 = std::pow(grid.spacing(0), 4);
      CHECK(err <= h4);  // truncation constant is well below 1 here
      CHECK(sup_norm(christoffel(conformal_metric(grid, amp))) > 0.05);
    }
  }

  SUBCASE("exact symmetry in the lower pair by storage") {
    GridSpec grid = torus(2, 16);
    ChristoffelField gamma = christoffel(conformal_metric(grid, 0.2));
    for (long p = 0; p < grid.num_points(); p += 17)
      CHECK(gamma.at(0, 0, 1, p) == gamma.at(0, 1, 0, p));
  }
}

TEST_CASE("riemann, ricci, scalar") {
  SUBCASE("flat metrics are exactly flat") {
    GridSpec grid = torus(2, 16);
    CurvatureSet c = riemann_ricci_scalar(make_flat_metric(grid, {4, 0, 0, 1}));
    CHECK(sup_norm(c.riem) == 0.0);
    CHECK(sup_norm(c.ric) == 0.0);
    CHECK(sup_norm(c.scalar) == 0.0);
  }

  SUBCASE("2d conformal Ricci matches the closed form at 4th order") {
    double err[2];
    int k = 0;
    for (int N : {32, 64}) {
      GridSpec grid = torus(2, N);
      MetricField g = conformal_metric(grid, 0.1);
      CurvatureSet c = riemann_ricci_scalar(g);
      err[k++] = ric_closed_form_error(g, c.ric, 0.1);
    }
    CHECK(err[0] <= 1e-4);
    const double order = std::log2(err[0] / err[1]);
    CHECK(order >= 3.5);
    CHECK(order <= 4.5);
  }

  SUBCASE("2d conformal scalar curvature R = 2 * 0.1 sin(x1) e^{-0.2 sin x1}") {
    GridSpec grid = torus(2, 64);
    MetricField g = conformal_metric(grid, 0.1);
    CurvatureSet c = riemann_ricci_scalar(g);
    double err = 0.0;
    for (long p = 0; p < grid.num_points(); ++p) {
      const double s = std::sin(grid.coord(0, grid.unflatten(p)[0]));
      err = std::max(err, std::abs(c.scalar.at(p) -
                                   0.2 * s * std::exp(-0.2 * s)));
    }
    CHECK(err <= 1e-6);
  }

  SUBCASE("sign convention pinned by R_1212 of the conformal metric") {
    GridSpec grid = torus(2, 64);
    MetricField g = conformal_metric(grid, 0.1);
    CurvatureSet c = riemann_ricci_scalar(g);
    double err = 0.0;
    for (long p = 0; p < grid.num_points(); ++p) {
      const double s = std::sin(grid.coord(0, grid.unflatten(p)[0]));
      const double expect = 0.1 * s * std::exp(0.2 * s);
      err = std::max(err, std::abs(c.riem.at(0, 1, 0, 1, p) - expect));
    }
    CHECK(err <= 1e-6);
  }

  SUBCASE("3d conformal Ricci matches the general closed form") {
    GridSpec grid = torus(3, 16);
    MetricField g = conformal_metric(grid, 0.1);
    CurvatureSet c = riemann_ricci_scalar(g);
    const double h4 = std::pow(grid.spacing(0), 4);
    CHECK(ric_closed_form_error(g, c.ric, 0.1) <= 2.0 * h4);
  }

  SUBCASE("all curvature symmetries hold to roundoff, n=2 and n=3") {
    for (int dim : {2, 3}) {
      GridSpec grid = torus(dim, dim == 2 ? 32 : 12);
      CurvatureSet c = riemann_ricci_scalar(conformal_metric(grid, 0.15));
      CurvatureSymmetryReport rep = check_curvature_symmetries(c.riem);
      CHECK(rep.worst() <= 1e-12 * rep.scale);
    }
  }
}

TEST_CASE("backgrounds and the ein tensor") {
  SUBCASE("flat background flags") {
    GridSpec grid = torus(2, 16);
    Background bg = make_background(make_euclidean_metric(grid), 0.0, 1.0);
    CHECK(bg.flags.ricci_parallel);
    CHECK(bg.flags.einstein);
    CHECK(bg.tau == doctest::Approx(0.0));
    CHECK(bg.flags.metric_constant);
    CHECK(bg.flags.ein_nondegenerate);
    CHECK(bg.flags.ein_margin == doctest::Approx(1.0));
    // Ein(g) = g exactly on a flat background with Lambda = 1.
    CHECK(sup_norm(bg.ein_g - bg.g.tensor()) == 0.0);
  }

  SUBCASE("kappa exclusions are hard errors") {
    GridSpec grid = torus(2, 16);
    CHECK_THROWS_AS(make_background(make_euclidean_metric(grid), -0.5, 0.0),
                    SingularCoefficientError);
    CHECK_THROWS_AS(make_background(make_euclidean_metric(grid), -0.5 / (2 - 1), 0.0),
                    SingularCoefficientError);
    GridSpec g3 = torus(3, 8);
    CHECK_THROWS_AS(make_background(make_euclidean_metric(g3), -1.0 / 3.0, 0.0),
                    SingularCoefficientError);
    CHECK_THROWS_AS(make_background(make_euclidean_metric(g3), -0.25, 0.0),
                    SingularCoefficientError);
  }

  SUBCASE("conformal background is flagged as not ricci-parallel") {
    GridSpec grid = torus(2, 32);
    Background bg = make_background(conformal_metric(grid, 0.1), 0.0, 1.0);
    CHECK_FALSE(bg.flags.ricci_parallel);
    CHECK_FALSE(bg.flags.metric_constant);
  }

  SUBCASE("ein with kappa = Lambda = 0 is the Ricci tensor") {
    GridSpec grid = torus(2, 32);
    Background bg = make_background(make_euclidean_metric(grid), 0.0, 0.0);
    MetricField gc = conformal_metric(grid, 0.1);
    SymTensorField e = ein(bg, gc);
    CurvatureSet c = riemann_ricci_scalar(gc);
    CHECK(sup_norm(e - c.ric) == 0.0);
  }

  SUBCASE("degenerate Ein is flagged (lambda = 0 flat has Ein = 0)") {
    GridSpec grid = torus(2, 16);
    Background bg = make_background(make_euclidean_metric(grid), 0.0, 0.0);
    CHECK_FALSE(bg.flags.ein_nondegenerate);
  }
}

TEST_CASE("deturck tensor") {
  GridSpec grid = torus(2, 32);
  MetricField g = make_euclidean_metric(grid);
  ChristoffelField gamma = christoffel(g);

  SUBCASE("h = 0 and constant h give exactly zero") {
    CHECK(sup_norm(deturck_tensor(g, gamma, SymTensorField(grid))) == 0.0);
    SymTensorField h = constant_sym(grid, {0.1, 0.02, 0.02, -0.05});
    CHECK(sup_norm(deturck_tensor(g, gamma, h)) == 0.0);
  }

  SUBCASE("closed form for h = eps sin(x1) delta on the flat background") {
    const double eps = 0.1;
    SymTensorField h = scalar_times_metric(make_sin_field(grid, 0, eps), g);
    ChristoffelField t = deturck_tensor(g, gamma, h);
    double err = 0.0;
    for (long p = 0; p < grid.num_points(); ++p) {
      const double x = grid.coord(0, grid.unflatten(p)[0]);
      const double expect = 0.5 * eps * std::cos(x) / (1.0 + eps * std::sin(x));
      err = std::max(err, std::abs(t.at(0, 0, 0, p) - expect));
      err = std::max(err, std::abs(t.at(0, 1, 1, p) + expect));
    }
    CHECK(err <= 1e-5);
  }

  SUBCASE("non-SPD g+h is rejected naming the worst point") {
    SymTensorField h = constant_sym(grid, {-2.0, 0.0, 0.0, 0.0});
    CHECK_THROWS_WITH_AS(deturck_tensor(g, gamma, h), doctest::Contains("point"),
                         SpdError);
  }
}

TEST_CASE("ricci increment vs two-curvature difference") {
  SUBCASE("exactly zero for h = 0 and for constant h on a flat background") {
    GridSpec grid = torus(2, 16);
    MetricField g = make_euclidean_metric(grid);
    CHECK(sup_norm(ricci_increment(g, SymTensorField(grid))) == 0.0);
    SymTensorField h = constant_sym(grid, {0.2, 0.0, 0.0, -0.1});
    CHECK(sup_norm(ricci_increment(g, h)) == 0.0);
  }

  SUBCASE("cross-path agreement within 10x the discretization error") {
    // Richardson estimate of each path's own error: coarse vs restricted fine.
    const double eps = 0.1;
    GridSpec c32 = torus(2, 32);
    GridSpec c64 = torus(2, 64);
    MetricField g32 = make_euclidean_metric(c32);
    MetricField g64 = make_euclidean_metric(c64);

    for (std::uint64_t seed : {101, 102, 103, 104, 105}) {
      SymTensorField h32 = random_trig_sym(c32, seed, eps);
      SymTensorField h64(c64);
      // same trig polynomial on the fine grid
      h64 = random_trig_sym(c64, seed, eps);

      SymTensorField inc32 = ricci_increment(g32, h32);
      SymTensorField dir32 =
          riemann_ricci_scalar(MetricField::build(g32.tensor() + h32)).ric;
      SymTensorField dir64 =
          riemann_ricci_scalar(MetricField::build(g64.tensor() + h64)).ric;

      const double disc = sup_norm(dir32 - restrict_to_coarse(dir64, c32));
      const double diff = sup_norm(inc32 - dir32);  // Ric(g) = 0 exactly here
      CHECK(diff <= 10.0 * std::max(disc, 1e-12));
    }
  }

  SUBCASE("difference of the two paths decays at 4th order") {
    const double eps = 0.1;
    double diff[2];
    int k = 0;
    for (int N : {32, 64}) {
      GridSpec grid = torus(2, N);
      MetricField g = make_euclidean_metric(grid);
      SymTensorField h = scalar_times_metric(make_sin_field(grid, 0, eps), g);
      SymTensorField inc = ricci_increment(g, h);
      SymTensorField dir = riemann_ricci_scalar(MetricField::build(g.tensor() + h)).ric;
      diff[k++] = sup_norm(inc - dir);
    }
    const double order = std::log2(diff[0] / diff[1]);
    CHECK(order >= 3.0);
    CHECK(order <= 5.0);
  }
}

TEST_CASE("kn_ein four-tensor") {
  SUBCASE("derived constants, n = 2") {
    GridSpec grid = torus(2, 16);
    Background bg = make_background(make_euclidean_metric(grid), 0.3, 0.7);
    KnEin e = kn_ein(bg, 0.5);
    CHECK(e.b == doctest::Approx((0.3 - 0.5) / 2.0));
    CHECK(e.c == doctest::Approx(0.7 / 2.0));
    CHECK(e.trace_factor == doctest::Approx(1.0));
  }

  SUBCASE("derived constants, n = 3, a = 1") {
    GridSpec grid = torus(3, 8);
    Background bg = make_background(make_euclidean_metric(grid), 0.3, 0.7);
    KnEin e = kn_ein(bg, 1.0);
    CHECK(e.b == doctest::Approx((2.0 * 0.3 - 1.0) / 4.0));
    CHECK(e.c == doctest::Approx(0.7 / 2.0));
    CHECK(e.trace_factor == doctest::Approx(2.0));
  }

  SUBCASE("flat, kappa=0, lambda=1, a=0: trace recovers Ein(g) = g") {
    GridSpec grid = torus(2, 16);
    Background bg = make_background(make_euclidean_metric(grid), 0.0, 1.0);
    KnEin e = kn_ein(bg, 0.0);
    SymTensorField tr = trace_four(bg.g, e.tensor);
    CHECK(sup_norm(tr - bg.ein_g) <= 1e-14);
  }

  SUBCASE("trace identity for random draws on flat and conformal, n = 2 and 3") {
    std::mt19937_64 rng(2024);
    auto draw = [&rng]() {
      return 2.0 * ((rng() >> 11) * (1.0 / 9007199254740992.0)) - 1.0;
    };
    for (int dim : {2, 3}) {
      GridSpec grid = torus(dim, dim == 2 ? 32 : 12);
      for (bool conformal : {false, true}) {
        MetricField g = conformal ? conformal_metric(grid, 0.15)
                                  : make_euclidean_metric(grid);
        for (int trial = 0; trial < 3; ++trial) {
          const double kappa = 0.4 * draw();
          const double lambda = draw();
          double a = draw();
          if (dim >= 3 && std::abs(a + 1.0 / (dim - 2)) < 0.05) a += 0.1;
          Background bg = make_background(g, kappa, lambda);
          KnEin e = kn_ein(bg, a);
          SymTensorField tr = trace_four(bg.g, e.tensor);
          SymTensorField expect = bg.ein_g;
          expect.scale(e.trace_factor);
          const double scale = std::max(sup_norm(tr), sup_norm(expect));
          CHECK(sup_norm(tr - expect) <= 1e-12 * std::max(scale, 1.0));
        }
      }
    }
  }

  SUBCASE("forbidden a is rejected for n >= 3") {
    GridSpec grid = torus(3, 8);
    Background bg = make_background(make_euclidean_metric(grid), 0.0, 1.0);
    CHECK_THROWS_AS(kn_ein(bg, -1.0), Error);
  }
}

TEST_CASE("riemann-christoffel form") {
  SUBCASE("identically zero when all the constants vanish on a flat background") {
    GridSpec grid = torus(2, 16);
    Background bg = make_background(make_euclidean_metric(grid), 0.0, 0.0);
    Tensor13Field tau = riemann_christoffel(bg, 0.0);
    CHECK(sup_norm(tau) == 0.0);
  }

  SUBCASE("r13 identities to 1e-12 * scale on flat and conformal") {
    for (int dim : {2, 3}) {
      GridSpec grid = torus(dim, dim == 2 ? 32 : 12);
      for (bool conformal : {false, true}) {
        MetricField g = conformal ? conformal_metric(grid, 0.15)
                                  : make_euclidean_metric(grid);
        Background bg = make_background(g, 0.25, 0.8);
        Tensor13Field tau = riemann_christoffel(bg, dim == 2 ? 0.5 : 0.4);
        R13SymmetryReport rep = check_r13_symmetries(tau);
        CHECK(rep.worst() <= 1e-12 * rep.scale);
      }
    }
  }
}

TEST_CASE("translation naturality of curvature operators") {
  GridSpec grid = torus(2, 32);
  MetricField g = conformal_metric(grid, 0.2);
  const std::array<int, 3> shift{5, 11, 0};
  MetricField gt = translate_metric(g, shift);

  CurvatureSet a = riemann_ricci_scalar(g);
  CurvatureSet b = riemann_ricci_scalar(gt);
  CHECK(sup_norm(translate(a.ric, shift) - b.ric) <= 1e-13 * sup_norm(a.ric));
  CHECK(sup_norm(translate(a.riem, shift) - b.riem) <= 1e-13 * sup_norm(a.riem));

  Background bg = make_background(g, 0.0, 1.0);
  Background bgt = make_background(gt, 0.0, 1.0);
  CHECK(sup_norm(translate(bg.ein_g, shift) - bgt.ein_g) <=
        1e-13 * sup_norm(bg.ein_g));
}
