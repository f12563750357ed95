#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "abfkit/abstraction.hpp"
#include "abfkit/error.hpp"
#include "abfkit/scenario.hpp"

using namespace abfkit;

namespace {

// One-dimensional box [0, 1] split into `cells`, oracle x' = a x + b nu.
FiniteAbstraction line_abstraction(std::size_t cells, double a, double b,
                                   std::vector<Vector> inputs = {{0.0}}) {
  FunctionSystem sys("line", 1, 1, [a, b](std::span<const double> x, std::span<const double> nu) {
    return Vector{a * x[0] + b * nu[0]};
  });
  Grid grid(StateBox({0.0}, {1.0}), std::vector<std::size_t>{cells});
  return build_abstraction(sys, grid, InputSet(std::move(inputs)));
}

AbfTemplate constant_template(double lo, double hi) {
  return AbfTemplate::custom(1, {"1"}, {lo}, {hi});
}

}  // namespace

TEST_CASE("scenario: constant template matches a 2-D brute-force search") {
  // phi1 = sigma * 0.09 - eta, phi2 = 0.5 eta - 0.01 with the single cell at 0.5.
  std::vector<SamplePair> data{{{0.2}, 0, {0.3}}};
  ScenarioProblem p(constant_template(0.0, 0.2), data, line_abstraction(1, 1.0, 0.0),
                    {0.5}, RhoTilde::fixed(0.01), 1e-9, 0.4);
  SolverOptions opt;
  opt.maximize_sigma = false;
  SolveReport r = solve_sop(p, opt);

  auto F = [](double sigma, double eta) {
    return std::max(sigma * 0.09 - eta, 0.5 * eta - 0.01);
  };
  auto [best, arg] = oracles::grid_minimize_2d(F, 1e-9, 0.4, 0.0, 0.2, 1e-8);
  CHECK(std::abs(r.mu_star - best) <= 1e-6);
  CHECK(r.mu_star == doctest::Approx(-0.01 / 1.5));
  CHECK(r.constraints_total == 2);
}

TEST_CASE("scenario: constraint ids and values") {
  std::vector<SamplePair> data{{{0.25}, 0, {0.125}}, {{0.25}, 1, {0.375}}, {{0.7}, 0, {0.35}}};
  auto abs = line_abstraction(2, 0.5, 0.25, {{0.0}, {1.0}});
  ScenarioProblem p(AbfTemplate::diagonal_even_power(1, 2, true, {-1.0, -1.0}, {1.0, 1.0}),
                    data, abs, {0.3}, RhoTilde::fixed(0.01));
  CHECK(p.distinct_states().size() == 2);
  CHECK(p.num_samples() == 3);
  CHECK(p.num_constraints() == 2 * 2 + 3 * 2);
  for (std::size_t id = 0; id < p.num_constraints(); ++id) CHECK(p.encode(p.decode(id)) == id);
  CHECK_THROWS_AS(p.decode(p.num_constraints()), Error);
  CHECK_THROWS_AS(p.encode({2, 1, 0, 1}), Error);  // state 0.7 has no input-1 sample

  SUBCASE("family 1 at a representative is -V - mu") {
    // State 0.25 is the representative of cell 0.
    Vector decision{0.3, 0.5, 0.2, 0.1};
    CHECK(constraint_value(p, 0.3, decision, {1, 0, 0, 0}) == doctest::Approx(-0.2 - 0.1));
  }
  SUBCASE("zero decision gives -rho_tilde on family 2") {
    Vector zero(4, 0.0);
    CHECK(constraint_value(p, 0.3, zero, {2, 1, 1, 0}) == doctest::Approx(-0.01));
  }
  SUBCASE("values are affine in the decision") {
    Vector a{0.3, 0.5, 0.2, 0.1}, b{0.1, -0.7, 0.9, -0.4}, mid(4);
    for (int j = 0; j < 4; ++j) mid[j] = 0.5 * (a[j] + b[j]);
    for (std::size_t id = 0; id < p.num_constraints(); ++id) {
      auto cid = p.decode(id);
      CHECK(constraint_value(p, 0.3, mid, cid) ==
            doctest::Approx(0.5 * (constraint_value(p, 0.3, a, cid) +
                                   constraint_value(p, 0.3, b, cid))));
    }
  }
  SUBCASE("family 2 uses the dataset successor and the abstract successor") {
    // Cell 1 (centre 0.75) under input 1 maps to 0.625 -> cell 1.
    Vector decision{0.0, 1.0, 0.0, 0.0};
    const double expected = (0.375 - 0.75) * (0.375 - 0.75) - 0.3 * (0.25 - 0.75) * (0.25 - 0.75) - 0.01;
    CHECK(constraint_value(p, 0.3, decision, {2, 0, 1, 1}) == doctest::Approx(expected));
  }
}

TEST_CASE("scenario: redundant and additional samples") {
  FunctionSystem sys("line", 1, 1, [](std::span<const double> x, std::span<const double> nu) {
    return Vector{0.5 * x[0] + 0.25 * nu[0]};
  });
  auto abs = line_abstraction(4, 0.5, 0.25, {{0.0}, {1.0}});
  auto tmpl = AbfTemplate::diagonal_even_power(1, 2, true, {0.0, 0.0}, {1.0, 0.5});
  auto data = collect_dataset(sys, StateBox({0.0}, {1.0}), abs.inputs(), 40, 11);
  SolverOptions opt;
  opt.batch = 8;
  ScenarioProblem base(tmpl, data, abs, {0.2, 0.5}, RhoTilde::fixed(0.05));
  SolveReport r = solve_sop(base, opt);

  SUBCASE("duplicated samples leave mu_star unchanged") {
    auto doubled = data;
    doubled.insert(doubled.end(), data.begin(), data.end());
    ScenarioProblem dup(tmpl, doubled, abs, {0.2, 0.5}, RhoTilde::fixed(0.05));
    CHECK(solve_sop(dup, opt).mu_star == doctest::Approx(r.mu_star).epsilon(1e-9));
  }
  SUBCASE("more samples never decrease mu_star") {
    std::vector<SamplePair> half(data.begin(), data.begin() + 40);
    ScenarioProblem sub(tmpl, half, abs, {0.2, 0.5}, RhoTilde::fixed(0.05));
    CHECK(solve_sop(sub, opt).mu_star <= r.mu_star + 1e-9);
  }
  SUBCASE("the result does not depend on the batch size or threading") {
    SolverOptions other = opt;
    other.batch = 1;
    other.parallel = false;
    CHECK(solve_sop(base, other).mu_star == doctest::Approx(r.mu_star).epsilon(1e-9));
    CHECK(solve_sop(base, opt) == r);
  }
  SUBCASE("every constraint holds at mu_star") {
    Vector decision{r.sigma};
    decision.insert(decision.end(), r.eta.begin(), r.eta.end());
    decision.push_back(r.mu_star);
    double worst = -HUGE_VAL;
    for (std::size_t id = 0; id < base.num_constraints(); ++id)
      worst = std::max(worst, constraint_value(base, r.gamma_tilde, decision, base.decode(id)));
    CHECK(worst <= 1e-12);
    CHECK(worst >= -1e-12);
  }
  SUBCASE("the best candidate has the smallest mu") {
    REQUIRE(r.candidates.size() == 2);
    for (const auto& c : r.candidates) CHECK(r.candidates[r.best_k].mu <= c.mu);
  }
  SUBCASE("report JSON round-trips") {
    std::stringstream ss;
    write_solve_report_json(ss, r);
    CHECK(read_solve_report_json(ss) == r);
  }
}

TEST_CASE("scenario: ties go to the smallest gamma_tilde") {
  // With eta fixed at 0 every candidate reaches the same mu.
  std::vector<SamplePair> data{{{0.2}, 0, {0.3}}};
  ScenarioProblem p(constant_template(0.0, 0.0), data, line_abstraction(1, 1.0, 0.0),
                    {0.6, 0.2, 0.4}, RhoTilde::fixed(0.01));
  SolveReport r = solve_sop(p);
  CHECK(r.gamma_tilde == 0.2);
  CHECK(r.best_k == 1);
}

TEST_CASE("scenario: maximizing sigma keeps mu_star") {
  std::vector<SamplePair> data{{{0.1}, 0, {0.05}}, {{0.9}, 0, {0.45}}};
  auto abs = line_abstraction(2, 0.5, 0.0);
  auto tmpl = AbfTemplate::diagonal_even_power(1, 2, true, {0.5, 0.0}, {1.0, 0.5});
  ScenarioProblem p(tmpl, data, abs, {0.5}, RhoTilde::fixed(0.02));
  SolverOptions plain;
  plain.maximize_sigma = false;
  SolveReport a = solve_sop(p, plain);
  SolveReport b = solve_sop(p);
  CHECK(b.mu_star <= a.mu_star + 1e-9);
  CHECK(b.mu_star >= a.mu_star - 1e-9);
  CHECK(b.sigma >= a.sigma);
  CHECK(b.sigma > 0.1);
  CHECK(a.sigma == doctest::Approx(1e-9));
}

TEST_CASE("scenario: free rho_tilde") {
  std::vector<SamplePair> data{{{0.2}, 0, {0.3}}};
  CHECK_THROWS_AS(ScenarioProblem(constant_template(0.0, 0.2), data, line_abstraction(1, 1.0, 0.0),
                                  {0.5}, RhoTilde::variable(HUGE_VAL)),
                  Error);
  ScenarioProblem p(constant_template(0.0, 0.2), data, line_abstraction(1, 1.0, 0.0), {0.5},
                    RhoTilde::variable(0.05));
  CHECK(p.num_decision_variables() == 4);
  CHECK(p.num_bound_variables() == 3);
  SolveReport r = solve_sop(p);
  // rho_tilde goes to its upper bound: mu = min max(-eta, 0.5 eta - 0.05).
  CHECK(r.rho_tilde == doctest::Approx(0.05));
  CHECK(r.mu_star == doctest::Approx(-0.05 / 1.5));
}

TEST_CASE("scenario: infeasible coefficient constraints name the bound") {
  std::vector<SamplePair> data{{{0.2, 0.2}, 0, {0.3, 0.3}}};
  FunctionSystem sys("id", 2, 1, [](std::span<const double> x, std::span<const double>) {
    return Vector(x.begin(), x.end());
  });
  Grid grid(StateBox({0.0, 0.0}, {1.0, 1.0}), std::vector<std::size_t>{1, 1});
  auto abs = build_abstraction(sys, grid, InputSet(std::vector<Vector>{{0.0}}));
  // P_00 <= 0 contradicts diagonal dominance.
  auto tmpl = AbfTemplate::quadratic_form(2, {-1.0, -1.0, -1.0}, {0.0, 1.0, 1.0}, 1e-3);
  ScenarioProblem p(tmpl, data, abs, {0.5}, RhoTilde::fixed(0.01));
  try {
    solve_sop(p);
    FAIL("expected an infeasibility error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfeasible);
    const std::string what = e.what();
    CHECK(what.find("upper bound of eta_1") != std::string::npos);
    CHECK(what.find("diagonal dominance of row 0") != std::string::npos);
  }
}

TEST_CASE("scenario: unbounded coefficient boxes are rejected up front") {
  // With eta unbounded, q = x0 + 2 and x' = 0 would let mu decrease forever.
  CHECK_THROWS_AS(AbfTemplate::custom(1, {"x0 + 2"}, {0.0}, {HUGE_VAL}), Error);
  CHECK_THROWS_AS(AbfTemplate::custom(1, {"x0 + 2"}, {1.0}, {0.0}), Error);
}

TEST_CASE("scenario: verdict") {
  std::vector<SamplePair> data{{{0.2}, 0, {0.3}}};
  ScenarioProblem p(constant_template(0.0, 0.2), data, line_abstraction(1, 1.0, 0.0), {0.3},
                    RhoTilde::fixed(0.015));
  SolveReport r;
  r.gamma_tilde = 0.3;
  r.sigma = 0.2;
  r.eta = {0.1};
  r.rho_tilde = 0.015;
  r.decision_variables = 3;
  VerdictInputs in;
  in.epsilon = {0.013};
  in.beta = 0.01;
  in.samples = 100;
  in.lipschitz = {1.55};

  r.mu_star = -0.014;
  Verdict ok = verdict(r, p, in);
  CHECK(ok.certified);
  CHECK(ok.slack == doctest::Approx(-0.001));
  CHECK(ok.confidence == doctest::Approx(0.99));
  REQUIRE(ok.certificate);
  CHECK(ok.certificate->gamma == doctest::Approx(0.99));
  CHECK(ok.certificate->rho == doctest::Approx(0.015 / (0.7 * (1.0 - 0.01 / 0.7))));
  CHECK(ok.certificate->scenario.samples == 100);

  r.mu_star = 0.005;
  Verdict bad = verdict(r, p, in);
  CHECK_FALSE(bad.certified);
  CHECK(bad.slack == doctest::Approx(0.018));
  CHECK_FALSE(bad.certificate);

  r.mu_star = -0.013;
  CHECK(verdict(r, p, in).certified);
}
