#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "abfkit/systems.hpp"

namespace abfkit {

using Matrix = std::vector<Vector>;

/// Upper bound on lambda_max(P) over every symmetric P whose entries lie in
/// [lower, upper]: max_i (upper_ii + sum_{j != i} max(|lower_ij|, |upper_ij|)).
double gershgorin_lambda_max(const Matrix& lower, const Matrix& upper);

/// Quantities entering the Lipschitz constants of phi_1, phi_2 in x.
struct LipschitzInputs {
  enum class Kind { kLinear, kNonlinear };

  Kind kind = Kind::kNonlinear;
  double alpha1 = 0.0;  // max ||x|| over X
  double alpha2 = 0.0;  // max ||nu|| over U
  std::optional<double> norm_A;        // ||A|| bound, linear systems
  std::optional<double> norm_B;        // ||B|| bound, linear systems
  std::optional<double> bound_f;       // ||f(x, nu)|| bound, nonlinear systems
  std::optional<double> bound_jacobian;  // ||df/dx|| bound, nonlinear systems
  double lambda_max = 0.0;
  double delta = 0.0;
  Vector gamma_tilde_set;
};

/// I_phi_k = max{8 alpha1 lambda_max,
///              2 lambda_max (2 |A|^2 alpha1 + 2 |A| |B| alpha2 + |A| delta
///                            + 2 alpha1 gamma_k)}.
Vector lipschitz_linear(const LipschitzInputs& in);

/// I_phi_k = max{8 alpha1 lambda_max,
///              2 lambda_max (2 I_f I_x + I_f delta + 2 alpha1 gamma_k)}.
Vector lipschitz_nonlinear(const LipschitzInputs& in);

/// safety_factor * max over pairs with equal input index of
/// ||x_next_a - x_next_b|| / ||x_a - x_b||. Throws kInsufficientData when no
/// two distinct states share an input.
double estimate_lipschitz_from_data(std::span<const SamplePair> pairs,
                                    double safety_factor);

/// Parameters of the minimum-sample computation.
struct SampleSpec {
  Vector epsilon;        // eps_k, one per gamma_tilde candidate
  double beta = 0.0;     // confidence parameter
  std::size_t n = 1;     // state dimension
  std::size_t r = 1;     // decision variables
  Vector lipschitz;      // I_phi_k

  /// eps_bar_k = (eps_k / I_phi_k)^n. Throws kInvalidArgument when the
  /// preconditions 0 <= eps_k <= I_phi_k fail.
  Vector epsilon_bar() const;
};

/// log of sum_k sum_{i < r} C(N, i) eps_k^i (1 - eps_k)^(N - i).
double log_scenario_tail(std::uint64_t samples, std::span<const double> epsilon_bar,
                         std::size_t r);

/// Smallest N >= 1 with tail(N) <= beta. Throws kInfeasible when no finite N
/// exists (some eps_bar_k = 0, or beta = 0).
std::uint64_t min_samples(const SampleSpec& spec);
std::uint64_t min_samples_from_bar(std::span<const double> epsilon_bar, double beta,
                                   std::size_t r);

struct SurfacePoint {
  double epsilon = 0.0;
  double beta = 0.0;
  std::uint64_t samples = 0;
};

/// min_samples over the grid, using `base` for everything except the
/// (uniform) eps_k and beta. Rows follow `beta_grid`, columns `epsilon_grid`.
std::vector<SurfacePoint> data_requirement_surface(const SampleSpec& base,
                                                   std::span<const double> epsilon_grid,
                                                   std::span<const double> beta_grid);

void write_surface_csv(std::ostream& out, std::span<const SurfacePoint> surface);
void write_surface_sidecar(std::ostream& out, std::span<const double> epsilon_grid,
                           std::span<const double> beta_grid);

}  // namespace abfkit
