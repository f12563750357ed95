#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "abfkit/bounds.hpp"
#include "abfkit/error.hpp"

using namespace abfkit;

namespace {

LipschitzInputs nonlinear(double i_f, double i_x, double alpha1, double lambda, double delta,
                          Vector gammas) {
  LipschitzInputs in;
  in.kind = LipschitzInputs::Kind::kNonlinear;
  in.alpha1 = alpha1;
  in.bound_f = i_f;
  in.bound_jacobian = i_x;
  in.lambda_max = lambda;
  in.delta = delta;
  in.gamma_tilde_set = std::move(gammas);
  return in;
}

}  // namespace

TEST_CASE("bounds: Gershgorin lambda_max") {
  Matrix lo2{{-0.2, -0.2}, {-0.2, -0.2}}, hi2{{0.2, 0.2}, {0.2, 0.2}};
  CHECK(gershgorin_lambda_max(lo2, hi2) == doctest::Approx(0.4));
  for (std::size_t n = 1; n <= 4; ++n) {
    Matrix id(n, Vector(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) id[i][i] = 1.0;
    CHECK(gershgorin_lambda_max(id, id) == doctest::Approx(1.0));
  }
  Matrix lo3(3, Vector(3, -0.5)), hi3(3, Vector(3, 0.5));
  for (int i = 0; i < 3; ++i) {
    lo3[i][i] = 0.0;
    hi3[i][i] = 1.0;
  }
  CHECK(gershgorin_lambda_max(lo3, hi3) == doctest::Approx(2.0));
}

TEST_CASE("bounds: Lipschitz constants for linear systems") {
  LipschitzInputs in;
  in.kind = LipschitzInputs::Kind::kLinear;
  in.norm_A = 1.0;
  in.norm_B = 1.0;
  in.alpha1 = 0.7071;
  in.alpha2 = 0.7071;
  in.delta = 0.05;
  in.lambda_max = 0.4;
  in.gamma_tilde_set = {0.1, 0.2, 0.3};
  auto out = lipschitz_linear(in);
  REQUIRE(out.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const double g = in.gamma_tilde_set[k];
    const double i2 = 2 * 0.4 * (2 * 0.7071 + 2 * 0.7071 + 0.05 + 2 * 0.7071 * g);
    CHECK(out[k] == doctest::Approx(std::max(8 * 0.7071 * 0.4, i2)).epsilon(1e-14));
  }
  CHECK(out[0] == doctest::Approx(2.41587).epsilon(1e-5));
  CHECK(out[0] < out[1]);
  CHECK(out[1] < out[2]);

  in.alpha1 = 0.0;
  in.gamma_tilde_set = {0.5};
  CHECK(lipschitz_linear(in)[0] == doctest::Approx(2 * 0.4 * (2 * 0.7071 + 0.05)));
  in.alpha2 = 0.0;
  CHECK(lipschitz_linear(in)[0] == doctest::Approx(2 * 0.4 * 0.05));

  in.norm_B.reset();
  CHECK_THROWS_AS(lipschitz_linear(in), Error);
}

TEST_CASE("bounds: Lipschitz constants for nonlinear systems") {
  auto out = lipschitz_nonlinear(nonlinear(1.0, 1.0, 0.7071, 0.4, 0.05, {0.1}));
  const double i2 = 0.8 * (2 + 0.05 + 2 * 0.7071 * 0.1);
  CHECK(i2 == doctest::Approx(1.75314).epsilon(1e-5));
  CHECK(out[0] == doctest::Approx(std::max(8 * 0.7071 * 0.4, i2)).epsilon(1e-14));

  auto big = lipschitz_nonlinear(nonlinear(3.0, 2.0, 0.7071, 0.4, 0.05, {0.1, 0.2, 0.3}));
  for (std::size_t k = 0; k + 1 < big.size(); ++k)
    CHECK(big[k + 1] - big[k] == doctest::Approx(4 * 0.4 * 0.7071 * 0.1).epsilon(1e-12));

  auto no_f = lipschitz_nonlinear(nonlinear(0.0, 5.0, 0.7071, 0.4, 0.05, {0.5}));
  CHECK(no_f[0] == doctest::Approx(std::max(8 * 0.7071 * 0.4, 4 * 0.4 * 0.7071 * 0.5)));

  auto missing = nonlinear(1.0, 1.0, 0.7, 0.4, 0.05, {0.1});
  missing.bound_jacobian.reset();
  CHECK_THROWS_AS(lipschitz_nonlinear(missing), Error);
  CHECK_THROWS_AS(lipschitz_nonlinear(nonlinear(1.0, 1.0, 0.7, 0.4, 0.05, {})), Error);
  CHECK_THROWS_AS(lipschitz_nonlinear(nonlinear(1.0, 1.0, 0.7, 0.4, 0.05, {1.0})), Error);
  CHECK_THROWS_AS(lipschitz_nonlinear(nonlinear(-1.0, 1.0, 0.7, 0.4, 0.05, {0.1})), Error);
}

TEST_CASE("bounds: Lipschitz constants are monotone in every bound") {
  const auto base = nonlinear(1.0, 1.2, 0.5, 0.3, 0.05, {0.2});
  const double v = lipschitz_nonlinear(base)[0];
  auto bump = [&](auto&& edit) {
    auto in = base;
    edit(in);
    return lipschitz_nonlinear(in)[0];
  };
  CHECK(bump([](LipschitzInputs& in) { in.bound_f = 1.5; }) >= v);
  CHECK(bump([](LipschitzInputs& in) { in.bound_jacobian = 2.0; }) >= v);
  CHECK(bump([](LipschitzInputs& in) { in.alpha1 = 0.9; }) >= v);
  CHECK(bump([](LipschitzInputs& in) { in.lambda_max = 0.5; }) >= v);
  CHECK(bump([](LipschitzInputs& in) { in.delta = 0.2; }) >= v);
  CHECK(bump([](LipschitzInputs& in) { in.gamma_tilde_set = {0.6}; }) >= v);
}

TEST_CASE("bounds: Lipschitz estimate from data") {
  StateBox box({-0.5, -0.5}, {0.5, 0.5});
  InputSet u(std::vector<Vector>{{0.0, 0.0}, {0.3, 0.3}});
  auto id = make_identity(2, 2);
  CHECK(estimate_lipschitz_from_data(collect_dataset(*id, box, u, 30, 1), 1.1) ==
        doctest::Approx(1.1));

  FunctionSystem twice("twice", 1, 1, [](std::span<const double> x, std::span<const double>) {
    return Vector{2.0 * x[0]};
  });
  CHECK(estimate_lipschitz_from_data(
            collect_dataset(twice, StateBox({-1.0}, {1.0}),
                            InputSet(std::vector<Vector>{{0.0}}), 20, 2),
            1.0) == doctest::Approx(2.0));

  // Linear part of the DC motor update: A = I + 0.01 [[-100, -1], [1, -90]].
  const double a = 0.0, b = -0.01, c = 0.01, d = 0.1;
  const double t = a * a + b * b + c * c + d * d, det = a * d - b * c;
  const double spectral = std::sqrt(0.5 * (t + std::sqrt(t * t - 4 * det * det)));
  auto dc = make_dc_motor();
  auto pairs = collect_dataset(*dc, box, InputSet(std::vector<Vector>{{0.3, 0.3}}), 1000, 3);
  const double est = estimate_lipschitz_from_data(pairs, 1.0);
  CHECK(est >= 0.9 * spectral);
  CHECK(est <= 1.01 * spectral);

  std::vector<SamplePair> lonely{{{0.1}, 0, {0.2}}, {{0.3}, 1, {0.1}}};
  try {
    estimate_lipschitz_from_data(lonely, 1.0);
    FAIL("expected insufficient data");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientData);
  }
}

TEST_CASE("bounds: minimum sample count") {
  CHECK(min_samples_from_bar(Vector{0.1}, 0.01, 1) ==
        static_cast<std::uint64_t>(std::ceil(std::log(0.01) / std::log(0.9))));
  CHECK(min_samples_from_bar(Vector{0.1}, 0.01, 1) == 44);

  const Vector bar{0.08, 0.1};
  const auto n = min_samples_from_bar(bar, 0.02, 3);
  CHECK(oracles::scenario_tail_mp(n, bar, 3) <= 0.02);
  CHECK(oracles::scenario_tail_mp(n - 1, bar, 3) > 0.02);
  CHECK(min_samples_from_bar(bar, 0.04, 3) <= n);
  CHECK(min_samples_from_bar(Vector{0.16, 0.2}, 0.02, 3) <= n);
  CHECK(min_samples_from_bar(bar, 0.02, 4) >= n);

  CHECK(std::exp(log_scenario_tail(10, Vector{0.5}, 1)) == doctest::Approx(std::pow(0.5, 10)));
  CHECK(std::exp(log_scenario_tail(3, Vector{0.2}, 2)) ==
        doctest::Approx(std::pow(0.8, 3) + 3 * 0.2 * 0.64));

  CHECK_THROWS_AS(min_samples_from_bar(Vector{0.0}, 0.01, 1), Error);
  CHECK_THROWS_AS(min_samples_from_bar(Vector{0.1}, 0.0, 1), Error);

  SampleSpec spec{{0.013, 0.013, 0.013}, 0.01, 2, 4, {1.55, 1.55, 1.55}};
  const auto ebar = spec.epsilon_bar();
  CHECK(ebar[0] == doctest::Approx(std::pow(0.013 / 1.55, 2)));
  CHECK(min_samples(spec) == min_samples_from_bar(ebar, 0.01, 4));

  SampleSpec too_big{{2.0}, 0.01, 2, 1, {1.55}};
  CHECK_THROWS_AS(too_big.epsilon_bar(), Error);
}

TEST_CASE("bounds: data requirement surface") {
  SampleSpec base{{0.0, 0.0, 0.0}, 0.0, 2, 4, {1.8, 1.9, 2.02}};
  const Vector eps{0.006, 0.05, 0.1, 0.3, 0.5};
  const Vector betas{0.01, 0.05, 0.2};
  auto s = data_requirement_surface(base, eps, betas);
  REQUIRE(s.size() == eps.size() * betas.size());
  for (std::size_t row = 0; row < betas.size(); ++row) {
    for (std::size_t col = 0; col < eps.size(); ++col) {
      const auto& p = s[row * eps.size() + col];
      CHECK(p.beta == betas[row]);
      CHECK(p.epsilon == eps[col]);
      if (col > 0) CHECK(p.samples <= s[row * eps.size() + col - 1].samples);
      if (row > 0) CHECK(p.samples <= s[(row - 1) * eps.size() + col].samples);
    }
  }
  SampleSpec jet{{0.006, 0.006, 0.006}, 0.01, 2, 4, {1.8, 1.9, 2.02}};
  CHECK(s[0].samples == min_samples(jet));

  std::stringstream csv, side;
  write_surface_csv(csv, s);
  CHECK(csv.str().rfind("epsilon,beta,N\n", 0) == 0);
  write_surface_sidecar(side, eps, betas);
  CHECK(side.str().find("log") != std::string::npos);
}
