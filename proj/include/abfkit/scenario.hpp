#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abfkit/abf.hpp"
#include "abfkit/abstraction.hpp"
#include "abfkit/systems.hpp"

namespace abfkit {

/// rho_tilde is either fixed a priori or a decision variable in [0, upper].
struct RhoTilde {
  bool free = false;
  double value = 0.0;
  double upper = 0.0;

  static RhoTilde fixed(double v) { return {false, v, v}; }
  static RhoTilde variable(double upper_bound) { return {true, 0.0, upper_bound}; }
};

/// Identifies one scenario constraint. Family 1 (phi_1) ignores the input.
struct ConstraintId {
  int family = 1;
  std::size_t state = 0;           // index into distinct_states()
  std::size_t abstract_state = 0;  // regular grid cell
  std::size_t input = 0;           // family 2 only

  friend bool operator==(const ConstraintId&, const ConstraintId&) = default;
};

/// The sampled program
///   min mu  s.t.  max_j phi_j(x_i, xh, nu; sigma, eta, rho_tilde) <= mu
/// over every sampled x_i, every regular abstract state xh and every input nu,
/// for one gamma_tilde at a time.
///
/// Decision vector layout: [sigma, eta_1..eta_z, (rho_tilde if free), mu].
/// Samples are grouped by their state; a family-2 constraint exists for each
/// (state, input) pair present in the dataset. The abstract successor of a
/// cell that leaves the box is taken at its nearest cell.
class ScenarioProblem {
 public:
  ScenarioProblem(AbfTemplate tmpl, std::span<const SamplePair> dataset,
                  FiniteAbstraction abstraction, Vector gamma_tilde_set, RhoTilde rho,
                  double sigma_floor = 1e-9,
                  double sigma_upper = std::numeric_limits<double>::infinity());

  const AbfTemplate& tmpl() const { return tmpl_; }
  const FiniteAbstraction& abstraction() const { return abstraction_; }
  const Vector& gamma_tilde_set() const { return gamma_tilde_set_; }
  const RhoTilde& rho() const { return rho_; }
  double sigma_floor() const { return sigma_floor_; }
  double sigma_upper() const { return sigma_upper_; }

  const std::vector<Vector>& distinct_states() const { return states_; }
  std::size_t num_samples() const { return pairs_.size(); }
  std::size_t num_decision_variables() const { return tmpl_.size() + (rho_.free ? 3 : 2); }
  /// Decision variables excluding mu: the r of the sample-size bound.
  std::size_t num_bound_variables() const { return num_decision_variables() - 1; }
  std::vector<std::string> decision_names() const;

  std::size_t num_constraints() const;
  std::size_t encode(const ConstraintId& id) const;
  ConstraintId decode(std::size_t flat) const;

  /// Affine constraint `row . decision <= rhs`; value = row . decision - rhs.
  void constraint_row(double gamma_tilde, std::size_t flat, std::span<double> row,
                      double* rhs) const;

 private:
  friend class ScenarioScanner;
  struct Pair {
    std::size_t state;
    std::size_t input;
    Vector x_next;
  };

  AbfTemplate tmpl_;
  FiniteAbstraction abstraction_;
  Vector gamma_tilde_set_;
  RhoTilde rho_;
  double sigma_floor_;
  double sigma_upper_;
  std::vector<Vector> states_;
  std::vector<Pair> pairs_;                  // grouped by state
  std::vector<std::size_t> first_pair_;      // states_.size() + 1 offsets into pairs_
  std::vector<Vector> representatives_;
};

/// phi_j - mu for the constraint at `id`, with x_next from the dataset and
/// xh_next from the abstraction.
double constraint_value(const ScenarioProblem& problem, double gamma_tilde,
                        std::span<const double> decision, const ConstraintId& id);

struct SolverOptions {
  std::size_t batch = 64;     // violators admitted per round
  double tolerance = 1e-9;    // admissible violation
  bool maximize_sigma = true; // second stage: largest sigma at the optimal mu
  bool parallel = true;
  std::size_t max_rounds = 100000;
  std::ostream* trace = nullptr;  // per-round working-set log
};

struct CandidateResult {
  double gamma_tilde = 0.0;
  double mu = 0.0;
  std::size_t rounds = 0;
  std::size_t working_set = 0;

  friend bool operator==(const CandidateResult&, const CandidateResult&) = default;
};

struct SolveReport {
  double mu_star = 0.0;
  std::size_t best_k = 0;
  double gamma_tilde = 0.0;
  double sigma = 0.0;
  Vector eta;
  double rho_tilde = 0.0;
  std::size_t constraints_total = 0;
  std::size_t constraints_working = 0;
  std::size_t constraints_active = 0;
  std::size_t decision_variables = 0;
  std::vector<CandidateResult> candidates;

  friend bool operator==(const SolveReport&, const SolveReport&) = default;
};

/// Solves the LP for every gamma_tilde candidate by constraint generation and
/// keeps the smallest mu (smallest gamma_tilde on ties). mu_star is the exact
/// maximum of phi_1, phi_2 over all constraints at the returned coefficients.
///
/// Throws kInfeasible (naming the binding bounds) when the coefficient
/// constraints admit no point, kTemplate when the program is unbounded.
SolveReport solve_sop(const ScenarioProblem& problem, const SolverOptions& options = {});

struct VerdictInputs {
  Vector epsilon;  // eps_k, one per gamma_tilde candidate
  double beta = 0.0;
  std::optional<double> psi;  // default: psi giving gamma = gamma_target
  double gamma_target = 0.99;
  std::size_t samples = 0;
  Vector lipschitz;
};

struct Verdict {
  bool certified = false;
  double slack = 0.0;  // mu_star + max_k eps_k
  double confidence = 0.0;
  Vector epsilon_used;
  std::optional<AbfCertificate> certificate;
};

/// Certificate iff mu_star + max_k eps_k <= 0.
Verdict verdict(const SolveReport& report, const ScenarioProblem& problem,
                const VerdictInputs& inputs);

void write_solve_report_json(std::ostream& out, const SolveReport& report);
SolveReport read_solve_report_json(std::istream& in);

}  // namespace abfkit
