#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "abfkit/expression.hpp"
#include "abfkit/systems.hpp"

namespace abfkit {

enum class TemplateKind { kQuadraticForm, kDiagonalEvenPower, kCustom };

std::string to_string(TemplateKind kind);

/// a . eta <= rhs over the template coefficients.
struct CoefficientInequality {
  Vector coefficients;
  double rhs = 0.0;
  std::string label;
};

/// Parametric candidate V(eta, x, xh) = sum_j eta_j q_j(x, xh) together with
/// the box every coefficient must stay in.
class AbfTemplate {
 public:
  /// (x - xh)^T P (x - xh) with eta = the upper triangle of symmetric P in
  /// row-major order; off-diagonal basis terms are 2 d_i d_j. P is kept
  /// positive definite through strict diagonal dominance rows with the given
  /// margin.
  static AbfTemplate quadratic_form(std::size_t dimension, Vector lower, Vector upper,
                                    double dominance_margin = 1e-9);
  /// sum_i eta_i (x_i - xh_i)^power, plus a constant term when requested.
  static AbfTemplate diagonal_even_power(std::size_t dimension, int power,
                                         bool with_constant, Vector lower, Vector upper);
  static AbfTemplate custom(std::size_t dimension, std::vector<std::string> basis,
                            Vector lower, Vector upper);

  TemplateKind kind() const { return kind_; }
  std::size_t dimension() const { return dimension_; }
  /// Number z of basis functions / coefficients.
  std::size_t size() const { return lower_.size(); }
  int power() const { return power_; }
  bool has_constant() const { return with_constant_; }
  double dominance_margin() const { return margin_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  /// Human-readable basis, e.g. "d0^4" or "2*d0*d1".
  const std::vector<std::string>& basis_text() const { return basis_text_; }

  /// Writes q_1..q_z at (x, xh) into `out` (size z). Unchecked hot path.
  void basis(std::span<const double> x, std::span<const double> xh,
             std::span<double> out) const;

  /// Linear constraints on eta beyond the box (diagonal dominance for
  /// quadratic forms; empty otherwise).
  std::vector<CoefficientInequality> coefficient_constraints() const;

  /// Per-entry interval bounds of the n x n matrix P the coefficients define,
  /// for Gershgorin bounding. Quadratic forms map eta onto P directly;
  /// diagonal templates put eta_i on the diagonal. Empty for custom templates.
  std::optional<std::pair<std::vector<Vector>, std::vector<Vector>>>
  matrix_entry_box() const;

  friend bool operator==(const AbfTemplate& a, const AbfTemplate& b) {
    return a.kind_ == b.kind_ && a.dimension_ == b.dimension_ && a.power_ == b.power_ &&
           a.with_constant_ == b.with_constant_ && a.margin_ == b.margin_ &&
           a.lower_ == b.lower_ && a.upper_ == b.upper_ &&
           a.basis_text_ == b.basis_text_;
  }

 private:
  AbfTemplate(TemplateKind kind, std::size_t dimension, Vector lower, Vector upper);

  TemplateKind kind_;
  std::size_t dimension_;
  int power_ = 2;
  bool with_constant_ = false;
  double margin_ = 0.0;
  Vector lower_;
  Vector upper_;
  std::vector<std::string> basis_text_;
  std::vector<Expression> custom_;
};

/// V(eta, x, xh). Throws kNumeric if a basis value is not finite.
double eval_V(const AbfTemplate& tmpl, std::span<const double> eta,
              std::span<const double> x, std::span<const double> xh);

/// phi_1 = sigma ||x - xh||^2 - V(eta, x, xh).
double phi1(const AbfTemplate& tmpl, double sigma, std::span<const double> eta,
            std::span<const double> x, std::span<const double> xh);

/// phi_2 = V(eta, x_next, xh_next) - gamma_tilde V(eta, x, xh) - rho_tilde, with
/// x_next = f(x, nu) observed and xh_next = f^(xh, nu) from the abstraction.
double phi2(const AbfTemplate& tmpl, std::span<const double> eta, double gamma_tilde,
            double rho_tilde, std::span<const double> x_next,
            std::span<const double> xh_next, std::span<const double> x,
            std::span<const double> xh);

struct DecayParameters {
  double gamma = 0.0;
  double rho = 0.0;
};

/// Max-form (gamma, rho) from the implication-form (gamma_tilde, rho_tilde):
/// gamma = 1 - (1 - psi)(1 - gamma_tilde), rho = rho_tilde / ((1 - gamma_tilde) psi).
DecayParameters recover_gamma_rho(double gamma_tilde, double rho_tilde, double psi);

/// The psi that makes recover_gamma_rho return `gamma_target`.
double psi_for_gamma(double gamma_target, double gamma_tilde);

/// sqrt(rho / sigma).
double epsilon_tilde(double rho, double sigma);

/// Scenario-program context a certificate was issued under.
struct ScenarioRecord {
  std::size_t samples = 0;
  Vector epsilon;
  double beta = 0.0;
  double mu_star = 0.0;
  Vector gamma_tilde_set;
  std::size_t decision_variables = 0;
  std::size_t constraints_total = 0;
  Vector lipschitz;

  friend bool operator==(const ScenarioRecord&, const ScenarioRecord&) = default;
};

struct AbfCertificate {
  AbfTemplate tmpl;
  Vector eta;
  double sigma = 0.0;
  double gamma_tilde = 0.0;
  double rho_tilde = 0.0;
  double psi = 0.0;
  double gamma = 0.0;
  double rho = 0.0;
  double epsilon_tilde = 0.0;
  double confidence = 0.0;
  ScenarioRecord scenario;

  friend bool operator==(const AbfCertificate&, const AbfCertificate&) = default;
};

/// Fills gamma, rho and epsilon_tilde from the solved coefficients.
AbfCertificate make_certificate(AbfTemplate tmpl, Vector eta, double sigma,
                                double gamma_tilde, double rho_tilde, double psi,
                                double confidence, ScenarioRecord scenario);

/// (x, xh) belongs to the relation {V(x, xh) <= rho}.
bool in_relation(const AbfCertificate& cert, std::span<const double> x,
                 std::span<const double> xh);

void write_certificate_json(std::ostream& out, const AbfCertificate& cert);
AbfCertificate read_certificate_json(std::istream& in);

}  // namespace abfkit
