#include "abfkit/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "json.hpp"

#include "abfkit/error.hpp"
#include "abfkit/format.hpp"

namespace abfkit {

double gershgorin_lambda_max(const Matrix& lower, const Matrix& upper) {
  const std::size_t n = lower.size();
  require(n >= 1 && upper.size() == n, ErrorCode::kInvalidArgument,
          "entry box must be a non-empty square matrix pair");
  double bound = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    require(lower[i].size() == n && upper[i].size() == n, ErrorCode::kInvalidArgument,
            "entry box must be square");
    double row = upper[i][i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      require(lower[i][j] == lower[j][i] && upper[i][j] == upper[j][i],
              ErrorCode::kInvalidArgument, "entry box must be symmetric");
      row += std::max(std::abs(lower[i][j]), std::abs(upper[i][j]));
    }
    bound = std::max(bound, row);
  }
  return bound;
}

namespace {

void check_common(const LipschitzInputs& in) {
  require(in.alpha1 >= 0.0 && in.alpha2 >= 0.0 && in.delta >= 0.0 && in.lambda_max >= 0.0,
          ErrorCode::kInvalidArgument, "Lipschitz bounds must be nonnegative");
  require(!in.gamma_tilde_set.empty(), ErrorCode::kInvalidArgument,
          "gamma_tilde set is empty");
  for (double g : in.gamma_tilde_set)
    require(g > 0.0 && g < 1.0, ErrorCode::kInvalidArgument,
            "gamma_tilde candidates must lie in (0, 1)");
}

double checked(const std::optional<double>& v, const char* what) {
  require(v.has_value(), ErrorCode::kInvalidArgument, std::string("missing bound ") + what);
  require(*v >= 0.0, ErrorCode::kInvalidArgument, std::string(what) + " must be >= 0");
  return *v;
}

}  // namespace

Vector lipschitz_linear(const LipschitzInputs& in) {
  require(in.kind == LipschitzInputs::Kind::kLinear, ErrorCode::kInvalidArgument,
          "lipschitz_linear needs linear-system bounds");
  check_common(in);
  const double a = checked(in.norm_A, "||A||");
  const double b = checked(in.norm_B, "||B||");
  const double phi1_term = 8.0 * in.alpha1 * in.lambda_max;
  Vector out;
  for (double g : in.gamma_tilde_set) {
    const double phi2_term =
        2.0 * in.lambda_max *
        (2.0 * a * a * in.alpha1 + 2.0 * a * b * in.alpha2 + a * in.delta + 2.0 * in.alpha1 * g);
    out.push_back(std::max(phi1_term, phi2_term));
  }
  return out;
}

Vector lipschitz_nonlinear(const LipschitzInputs& in) {
  require(in.kind == LipschitzInputs::Kind::kNonlinear, ErrorCode::kInvalidArgument,
          "lipschitz_nonlinear needs nonlinear-system bounds");
  check_common(in);
  const double f = checked(in.bound_f, "||f||");
  const double jac = checked(in.bound_jacobian, "||df/dx||");
  const double phi1_term = 8.0 * in.alpha1 * in.lambda_max;
  Vector out;
  for (double g : in.gamma_tilde_set) {
    const double phi2_term =
        2.0 * in.lambda_max * (2.0 * f * jac + f * in.delta + 2.0 * in.alpha1 * g);
    out.push_back(std::max(phi1_term, phi2_term));
  }
  return out;
}

double estimate_lipschitz_from_data(std::span<const SamplePair> pairs,
                                    double safety_factor) {
  require(safety_factor >= 1.0, ErrorCode::kInvalidArgument, "safety factor must be >= 1");
  std::map<std::size_t, std::vector<const SamplePair*>> by_input;
  for (const auto& p : pairs) by_input[p.nu_index].push_back(&p);
  double best = 0.0;
  bool compared = false;
  for (const auto& [input, group] : by_input) {
    for (std::size_t a = 0; a < group.size(); ++a) {
      for (std::size_t b = a + 1; b < group.size(); ++b) {
        const double dx = distance(group[a]->x, group[b]->x);
        if (dx <= 0.0) continue;
        best = std::max(best, distance(group[a]->x_next, group[b]->x_next) / dx);
        compared = true;
      }
    }
  }
  require(compared, ErrorCode::kInsufficientData,
          "no two distinct states share an input index");
  return safety_factor * best;
}

Vector SampleSpec::epsilon_bar() const {
  require(!epsilon.empty() && epsilon.size() == lipschitz.size(), ErrorCode::kInvalidArgument,
          "need one epsilon and one Lipschitz constant per gamma_tilde candidate");
  require(beta >= 0.0 && beta <= 1.0, ErrorCode::kInvalidArgument, "beta must lie in [0, 1]");
  require(n >= 1 && r >= 1, ErrorCode::kInvalidArgument, "n and r must be >= 1");
  Vector bar;
  for (std::size_t k = 0; k < epsilon.size(); ++k) {
    require(lipschitz[k] > 0.0, ErrorCode::kInvalidArgument,
            "Lipschitz constants must be positive");
    require(epsilon[k] >= 0.0 && epsilon[k] <= lipschitz[k], ErrorCode::kInvalidArgument,
            "epsilon_" + std::to_string(k) + " = " + format_double(epsilon[k]) +
                " must lie in [0, I_phi = " + format_double(lipschitz[k]) + "]");
    bar.push_back(std::pow(epsilon[k] / lipschitz[k], static_cast<double>(n)));
  }
  return bar;
}

double log_scenario_tail(std::uint64_t samples, std::span<const double> epsilon_bar,
                         std::size_t r) {
  const double N = static_cast<double>(samples);
  std::vector<double> logs;
  for (double e : epsilon_bar) {
    require(e >= 0.0 && e <= 1.0, ErrorCode::kInvalidArgument, "eps_bar must lie in [0, 1]");
    const std::uint64_t top = std::min<std::uint64_t>(r - 1, samples);
    if (e == 0.0) {
      logs.push_back(0.0);  // only i = 0 survives: C(N,0) (1-0)^N = 1
      continue;
    }
    if (e == 1.0) {
      if (samples <= r - 1) logs.push_back(0.0);  // only i = N survives
      continue;
    }
    const double log_e = std::log(e), log_1me = std::log1p(-e);
    double log_binom = 0.0;  // log C(N, i), built incrementally
    for (std::uint64_t i = 0; i <= top; ++i) {
      if (i > 0) log_binom += std::log((N - static_cast<double>(i - 1)) / static_cast<double>(i));
      logs.push_back(log_binom + static_cast<double>(i) * log_e +
                     (N - static_cast<double>(i)) * log_1me);
    }
  }
  if (logs.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(logs.begin(), logs.end());
  // Neumaier-compensated sum of exp(log - peak).
  double sum = 0.0, comp = 0.0;
  for (double l : logs) {
    const double term = std::exp(l - peak);
    const double t = sum + term;
    comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return peak + std::log(sum + comp);
}

std::uint64_t min_samples_from_bar(std::span<const double> epsilon_bar, double beta,
                                   std::size_t r) {
  require(!epsilon_bar.empty(), ErrorCode::kInvalidArgument, "no eps_bar values");
  require(r >= 1, ErrorCode::kInvalidArgument, "r must be >= 1");
  require(beta >= 0.0 && beta <= 1.0, ErrorCode::kInvalidArgument, "beta must lie in [0, 1]");
  double smallest = 1.0;
  for (double e : epsilon_bar) {
    if (e <= 0.0) fail(ErrorCode::kInfeasible, "eps_bar = 0: no finite sample count exists");
    smallest = std::min(smallest, e);
  }
  bool all_one = std::all_of(epsilon_bar.begin(), epsilon_bar.end(),
                             [](double e) { return e == 1.0; });
  if (beta <= 0.0 && !all_one)
    fail(ErrorCode::kInfeasible, "beta = 0 cannot be met by any finite sample count");

  const double log_beta = std::log(beta);
  auto meets = [&](std::uint64_t N) {
    return log_scenario_tail(N, epsilon_bar, r) <= log_beta;
  };

  // Campi-Garatti style starting bracket, widened until it holds.
  const double l = static_cast<double>(epsilon_bar.size());
  double guess = 2.0 / smallest *
                 (std::log(l / std::max(beta, 1e-300)) + static_cast<double>(r - 1)) + 1.0;
  std::uint64_t hi = static_cast<std::uint64_t>(std::min(std::max(guess, 1.0), 9e15));
  while (!meets(hi)) {
    require(hi < (std::uint64_t{1} << 60), ErrorCode::kInfeasible,
            "sample count exceeds 2^60");
    hi *= 2;
  }
  std::uint64_t lo = 0;  // tail(0) = l >= 1 >= beta, treated as failing
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (meets(mid)) hi = mid;
    else lo = mid;
  }
  return hi;
}

std::uint64_t min_samples(const SampleSpec& spec) {
  const Vector bar = spec.epsilon_bar();
  return min_samples_from_bar(bar, spec.beta, spec.r);
}

std::vector<SurfacePoint> data_requirement_surface(const SampleSpec& base,
                                                   std::span<const double> epsilon_grid,
                                                   std::span<const double> beta_grid) {
  require(!epsilon_grid.empty() && !beta_grid.empty(), ErrorCode::kInvalidArgument,
          "surface grids must be non-empty");
  std::vector<SurfacePoint> out;
  for (double beta : beta_grid) {
    for (double eps : epsilon_grid) {
      SampleSpec spec = base;
      spec.beta = beta;
      spec.epsilon.assign(base.lipschitz.size(), eps);
      out.push_back({eps, beta, min_samples(spec)});
    }
  }
  return out;
}

void write_surface_csv(std::ostream& out, std::span<const SurfacePoint> surface) {
  out << "epsilon,beta,N\n";
  for (const auto& p : surface)
    out << format_double(p.epsilon) << ',' << format_double(p.beta) << ',' << p.samples << '\n';
}

void write_surface_sidecar(std::ostream& out, std::span<const double> epsilon_grid,
                           std::span<const double> beta_grid) {
  nlohmann::json j = {{"x", "epsilon"},
                      {"y", "beta"},
                      {"value", "N"},
                      {"value_scale", "log"},
                      {"epsilon_grid", std::vector<double>(epsilon_grid.begin(), epsilon_grid.end())},
                      {"beta_grid", std::vector<double>(beta_grid.begin(), beta_grid.end())}};
  out << j.dump(2) << '\n';
}

}  // namespace abfkit
