#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "einop/solver.hpp"

namespace einop {

/// Configuration of one einop run; see README for the JSON schema.
struct RunConfig {
  std::string command;  // identities | spectrum | linearize-check | solve

  int dim = 2;
  std::array<int, 3> npts{32, 32, 1};
  std::array<double, 3> lengths{6.283185307179586, 6.283185307179586,
                                6.283185307179586};

  std::string background_kind = "flat";  // flat | conformal
  std::vector<double> g0;                // optional constant metric (row-major)
  double conformal_amplitude = 0.1;
  double kappa = 0.0;
  double lambda = 1.0;

  std::string family = "trig-conformal";  // constant-conformal | trig-conformal | random-smooth
  double amplitude = 1e-3;
  std::uint64_t seed = 1;

  SolveOptions solve;
  SpectralOptions spectral;
  double equation_tol = 1e-9;
  double gauge_tol_factor = 50.0;  // gauge tolerance = factor * h^4 * sup|e|
  long memory_budget_points = 1L << 22;

  std::string output_dir = "out";
  bool exploratory = false;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_json_file(const std::string& path);
};

/// Executes one command; writes artifacts under cfg.output_dir.
/// Exit status: 0 success / all checks pass, 1 failure, 2 refused solve.
int run(const RunConfig& cfg);

// ---- pieces shared with the test suites ----------------------------------------

Background make_configured_background(const RunConfig& cfg);
SymTensorField make_perturbation(const Background& bg, const std::string& family,
                                 double amplitude, std::uint64_t seed);

struct IdentityCheck {
  std::string name;
  double value = 0.0;      // measured deviation (already scale-relative)
  double tolerance = 0.0;
  bool pass = false;
};

/// The algebraic identity suite over one background.
std::vector<IdentityCheck> identity_suite(const Background& bg, std::uint64_t seed);

struct LinearizeRow {
  std::string input;  // "pure-trace" | "trace-free"
  double step = 0.0;
  double error = 0.0;        // |FD(t) - analytic|
  double error_above_floor = 0.0;  // same after subtracting the t -> 0 defect field
};

/// One-sided FD directional derivatives of F at (0,0) against the analytic
/// linearization, for a pure-trace and a trace-free direction at each step.
/// The smallest step defines the discretization-defect field (the h^4 floor);
/// error_above_floor removes it before the slope test.
std::vector<LinearizeRow> linearize_check(const Background& bg,
                                          const S2KernelProjector& pi,
                                          const std::vector<double>& steps,
                                          std::uint64_t seed);

}  // namespace einop
