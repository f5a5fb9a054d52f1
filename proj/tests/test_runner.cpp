#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "einop/field_io.hpp"
#include "einop/runner.hpp"

using namespace einop;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const char* kSolveConfig = R"({
  "command": "solve",
  "grid": {"n": 2, "points": 16, "lengths": 6.283185307179586},
  "background": {"kind": "flat", "kappa": 0.0, "lambda": 1.0},
  "perturbation": {"family": "constant-conformal", "amplitude": 1e-3, "seed": 3},
  "output": "runner_out_solve"
})";

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("full document with axis arrays") {
    RunConfig cfg = RunConfig::from_json_text(R"({
      "command": "spectrum",
      "grid": {"n": 2, "points": [16, 32], "lengths": [6.28, 3.14]},
      "background": {"kind": "conformal", "kappa": 0.1, "lambda": 0.5,
                     "conformal_amplitude": 0.2},
      "perturbation": {"family": "random-smooth", "amplitude": 2e-3, "seed": 42},
      "tolerances": {"newton_tol": 1e-9, "kernel_tol": 1e-7, "equation_tol": 1e-8},
      "memory_budget_points": 100000,
      "output": "somewhere",
      "exploratory": true
    })");
    CHECK(cfg.command == "spectrum");
    CHECK(cfg.npts[0] == 16);
    CHECK(cfg.npts[1] == 32);
    CHECK(cfg.lengths[1] == doctest::Approx(3.14));
    CHECK(cfg.background_kind == "conformal");
    CHECK(cfg.kappa == doctest::Approx(0.1));
    CHECK(cfg.family == "random-smooth");
    CHECK(cfg.seed == 42);
    CHECK(cfg.solve.newton_tol == doctest::Approx(1e-9));
    CHECK(cfg.spectral.kernel_tol == doctest::Approx(1e-7));
    CHECK(cfg.equation_tol == doctest::Approx(1e-8));
    CHECK(cfg.memory_budget_points == 100000);
    CHECK(cfg.output_dir == "somewhere");
    CHECK(cfg.exploratory);
  }

  SUBCASE("unknown command is rejected") {
    CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"command": "fly"})"),
                         doctest::Contains("unknown command"), Error);
  }

  SUBCASE("parse errors carry position information") {
    try {
      RunConfig::from_json_text("{\"command\": ");
      CHECK(false);
    } catch (const Error& e) {
      // nlohmann reports the byte offset of the failure
      CHECK(std::string(e.what()).find("parse error") != std::string::npos);
    }
  }

  SUBCASE("memory budget is enforced") {
    RunConfig cfg = RunConfig::from_json_text(R"({
      "command": "identities",
      "grid": {"n": 3, "points": 64},
      "memory_budget_points": 1000
    })");
    CHECK_THROWS_WITH_AS(make_configured_background(cfg),
                         doctest::Contains("memory budget"), Error);
  }
}

TEST_CASE("perturbation families") {
  RunConfig cfg = RunConfig::from_json_text(
      R"({"command": "identities", "grid": {"n": 2, "points": 16}})");
  Background bg = make_configured_background(cfg);

  SymTensorField c = make_perturbation(bg, "constant-conformal", 1e-3, 1);
  CHECK(sup_norm(c - scaled(1e-3, bg.g.tensor())) == 0.0);

  SymTensorField t = make_perturbation(bg, "trig-conformal", 1e-3, 1);
  CHECK(sup_norm(t) == doctest::Approx(1e-3).epsilon(1e-2));

  SymTensorField r1 = make_perturbation(bg, "random-smooth", 1e-3, 7);
  SymTensorField r2 = make_perturbation(bg, "random-smooth", 1e-3, 7);
  CHECK(sup_norm(r1 - r2) == 0.0);  // seeded determinism

  CHECK_THROWS_AS(make_perturbation(bg, "sawtooth", 1e-3, 1), Error);
}

TEST_CASE("identity suite passes on flat and conformal backgrounds") {
  for (const char* kind : {"flat", "conformal"}) {
    std::string text = std::string(R"({
      "command": "identities",
      "grid": {"n": 2, "points": 16},
      "background": {"kind": ")") + kind +
                       R"(", "kappa": 0.25, "lambda": 0.8}})";
    RunConfig cfg = RunConfig::from_json_text(text);
    Background bg = make_configured_background(cfg);
    for (const IdentityCheck& c : identity_suite(bg, 5)) {
      INFO(kind, " ", c.name, " value ", c.value, " tol ", c.tolerance);
      CHECK(c.pass);
    }
  }
}

TEST_CASE("run: identities command, artifacts and determinism") {
  RunConfig cfg = RunConfig::from_json_text(R"({
    "command": "identities",
    "grid": {"n": 2, "points": 16},
    "background": {"kind": "flat", "kappa": 0.0, "lambda": 1.0},
    "output": "runner_out_id"
  })");
  CHECK(run(cfg) == 0);
  CHECK(fs::exists("runner_out_id/identities.csv"));
  CHECK(fs::exists("runner_out_id/identities.txt"));
  const std::string first = slurp("runner_out_id/identities.csv");
  CHECK(first.find("kn_trace_identity") != std::string::npos);
  CHECK(run(cfg) == 0);
  CHECK(slurp("runner_out_id/identities.csv") == first);  // bitwise determinism
  fs::remove_all("runner_out_id");
}

TEST_CASE("run: spectrum command always produces a report") {
  RunConfig cfg = RunConfig::from_json_text(R"({
    "command": "spectrum",
    "grid": {"n": 2, "points": 16},
    "background": {"kind": "flat", "kappa": 0.0, "lambda": 0.0},
    "output": "runner_out_spec"
  })");
  CHECK(run(cfg) == 0);  // the report itself is the deliverable
  const std::string verdict = slurp("runner_out_spec/verdict.json");
  CHECK(verdict.find("hypotheses fail") != std::string::npos);
  CHECK(verdict.find("ker P_H nontrivial") != std::string::npos);
  CHECK(verdict.find("\"licensed\": false") != std::string::npos);
  CHECK(slurp("runner_out_spec/eigenvalues.csv").find("operator,index,eigenvalue") == 0);
  fs::remove_all("runner_out_spec");
}

TEST_CASE("run: linearize-check command") {
  RunConfig cfg = RunConfig::from_json_text(R"({
    "command": "linearize-check",
    "grid": {"n": 2, "points": 16},
    "background": {"kind": "flat", "kappa": 0.0, "lambda": 1.0},
    "output": "runner_out_lin"
  })");
  CHECK(run(cfg) == 0);
  CHECK(slurp("runner_out_lin/linearize.csv").find("input,step,error") == 0);
  fs::remove_all("runner_out_lin");
}

TEST_CASE("run: solve command on the licensed background") {
  RunConfig cfg = RunConfig::from_json_text(kSolveConfig);
  CHECK(run(cfg) == 0);
  CHECK(fs::exists("runner_out_solve/residual_history.csv"));
  CHECK(fs::exists("runner_out_solve/solve_report.txt"));
  SymTensorField h = read_sym_field("runner_out_solve/h.bin");
  CHECK(sup_norm(h) == doctest::Approx(1e-3).epsilon(1e-6));
  fs::remove_all("runner_out_solve");
}

TEST_CASE("run: unlicensed solve refuses, naming the hypothesis verbatim") {
  RunConfig cfg = RunConfig::from_json_text(R"({
    "command": "solve",
    "grid": {"n": 2, "points": 16},
    "background": {"kind": "flat", "kappa": 0.0, "lambda": 0.0},
    "perturbation": {"family": "random-smooth", "amplitude": 1e-4, "seed": 9},
    "output": "runner_out_refuse"
  })");
  CHECK(run(cfg) == 2);
  const std::string refusal = slurp("runner_out_refuse/refusal.txt");
  // the refusal quotes the report's verdict verbatim
  Background bg = make_configured_background(cfg);
  HypothesisReport rep = hypothesis_report(bg, cfg.spectral);
  CHECK(refusal.find(rep.verdict) != std::string::npos);
  CHECK(refusal.find("ker P_H nontrivial (dim 2)") != std::string::npos);

  // with the exploratory flag the gate opens; this particular background then
  // fails honestly on the degenerate Ein(g), not on the gate
  cfg.exploratory = true;
  CHECK_THROWS_WITH_AS(run(cfg), doctest::Contains("degenerate"), Error);
  fs::remove_all("runner_out_refuse");
}
