#include "abfkit/abf.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "json.hpp"

#include "abfkit/error.hpp"

namespace abfkit {

using nlohmann::json;

std::string to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::kQuadraticForm: return "quadratic_form";
    case TemplateKind::kDiagonalEvenPower: return "diagonal_even_power";
    case TemplateKind::kCustom: return "custom";
  }
  return "unknown";
}

namespace {

TemplateKind kind_from_string(const std::string& s) {
  if (s == "quadratic_form") return TemplateKind::kQuadraticForm;
  if (s == "diagonal_even_power") return TemplateKind::kDiagonalEvenPower;
  if (s == "custom") return TemplateKind::kCustom;
  fail(ErrorCode::kInvalidArgument, "unknown template kind '" + s + "'");
}

// Quadratic-form coefficient index of P(i, j), i <= j, upper triangle row-major.
std::size_t upper_index(std::size_t n, std::size_t i, std::size_t j) {
  return i * n - i * (i - 1) / 2 + (j - i);
}

}  // namespace

AbfTemplate::AbfTemplate(TemplateKind kind, std::size_t dimension, Vector lower,
                         Vector upper)
    : kind_(kind), dimension_(dimension), lower_(std::move(lower)), upper_(std::move(upper)) {
  for (std::size_t j = 0; j < lower_.size() && j < upper_.size(); ++j) {
    require(std::isfinite(lower_[j]) && std::isfinite(upper_[j]) && lower_[j] <= upper_[j],
            ErrorCode::kInvalidArgument,
            "coefficient box of eta_" + std::to_string(j + 1) + " must be finite and ordered");
  }
}

AbfTemplate AbfTemplate::quadratic_form(std::size_t dimension, Vector lower,
                                        Vector upper, double dominance_margin) {
  require(dimension >= 1, ErrorCode::kInvalidArgument, "template dimension must be >= 1");
  const std::size_t z = dimension * (dimension + 1) / 2;
  AbfTemplate t(TemplateKind::kQuadraticForm, dimension, std::move(lower), std::move(upper));
  t.margin_ = dominance_margin;
  for (std::size_t i = 0; i < dimension; ++i) {
    for (std::size_t j = i; j < dimension; ++j) {
      t.basis_text_.push_back(i == j ? "d" + std::to_string(i) + "^2"
                                     : "2*d" + std::to_string(i) + "*d" + std::to_string(j));
    }
  }
  require(t.lower_.size() == z && t.upper_.size() == z, ErrorCode::kInvalidArgument,
          "quadratic form needs " + std::to_string(z) + " coefficient bounds");
  return t;
}

AbfTemplate AbfTemplate::diagonal_even_power(std::size_t dimension, int power,
                                             bool with_constant, Vector lower,
                                             Vector upper) {
  require(dimension >= 1, ErrorCode::kInvalidArgument, "template dimension must be >= 1");
  require(power >= 2 && power % 2 == 0, ErrorCode::kInvalidArgument,
          "diagonal template needs a positive even power");
  AbfTemplate t(TemplateKind::kDiagonalEvenPower, dimension, std::move(lower),
                std::move(upper));
  t.power_ = power;
  t.with_constant_ = with_constant;
  for (std::size_t i = 0; i < dimension; ++i)
    t.basis_text_.push_back("d" + std::to_string(i) + "^" + std::to_string(power));
  if (with_constant) t.basis_text_.push_back("1");
  require(t.lower_.size() == t.basis_text_.size() && t.upper_.size() == t.basis_text_.size(),
          ErrorCode::kInvalidArgument,
          "diagonal template needs " + std::to_string(t.basis_text_.size()) +
              " coefficient bounds");
  return t;
}

AbfTemplate AbfTemplate::custom(std::size_t dimension, std::vector<std::string> basis,
                                Vector lower, Vector upper) {
  require(dimension >= 1, ErrorCode::kInvalidArgument, "template dimension must be >= 1");
  require(!basis.empty(), ErrorCode::kInvalidArgument, "custom template has no basis");
  require(lower.size() == basis.size() && upper.size() == basis.size(),
          ErrorCode::kInvalidArgument, "custom template needs one bound pair per basis term");
  AbfTemplate t(TemplateKind::kCustom, dimension, std::move(lower), std::move(upper));
  for (auto& b : basis) t.custom_.push_back(Expression::parse(b, dimension));
  t.basis_text_ = std::move(basis);
  return t;
}

void AbfTemplate::basis(std::span<const double> x, std::span<const double> xh,
                        std::span<double> out) const {
  switch (kind_) {
    case TemplateKind::kQuadraticForm: {
      std::size_t k = 0;
      for (std::size_t i = 0; i < dimension_; ++i) {
        const double di = x[i] - xh[i];
        out[k++] = di * di;
        for (std::size_t j = i + 1; j < dimension_; ++j) out[k++] = 2.0 * di * (x[j] - xh[j]);
      }
      break;
    }
    case TemplateKind::kDiagonalEvenPower: {
      for (std::size_t i = 0; i < dimension_; ++i) {
        const double d2 = (x[i] - xh[i]) * (x[i] - xh[i]);
        double v = d2;
        for (int p = 2; p < power_; p += 2) v *= d2;
        out[i] = v;
      }
      if (with_constant_) out[dimension_] = 1.0;
      break;
    }
    case TemplateKind::kCustom:
      for (std::size_t j = 0; j < custom_.size(); ++j) out[j] = custom_[j].evaluate(x, xh);
      break;
  }
}

std::vector<CoefficientInequality> AbfTemplate::coefficient_constraints() const {
  std::vector<CoefficientInequality> rows;
  if (kind_ != TemplateKind::kQuadraticForm) return rows;
  const std::size_t n = dimension_;
  // P_ii - sum_j s_j P_ij >= margin for every sign pattern s, i.e.
  // P_ii - sum_j |P_ij| >= margin, written as <= rows.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t others = n - 1;
    for (std::size_t mask = 0; mask < (std::size_t{1} << others); ++mask) {
      CoefficientInequality row{Vector(size(), 0.0), -margin_,
                                "diagonal dominance of row " + std::to_string(i)};
      row.coefficients[upper_index(n, i, i)] = -1.0;
      std::size_t bit = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double sign = (mask >> bit++) & 1 ? -1.0 : 1.0;
        row.coefficients[upper_index(n, std::min(i, j), std::max(i, j))] = sign;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::optional<std::pair<std::vector<Vector>, std::vector<Vector>>>
AbfTemplate::matrix_entry_box() const {
  const std::size_t n = dimension_;
  std::vector<Vector> lo(n, Vector(n, 0.0)), hi(n, Vector(n, 0.0));
  switch (kind_) {
    case TemplateKind::kQuadraticForm:
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          const std::size_t k = upper_index(n, i, j);
          lo[i][j] = lo[j][i] = lower_[k];
          hi[i][j] = hi[j][i] = upper_[k];
        }
      }
      return std::pair{lo, hi};
    case TemplateKind::kDiagonalEvenPower:
      for (std::size_t i = 0; i < n; ++i) {
        lo[i][i] = lower_[i];
        hi[i][i] = upper_[i];
      }
      return std::pair{lo, hi};
    case TemplateKind::kCustom:
      return std::nullopt;
  }
  return std::nullopt;
}

double eval_V(const AbfTemplate& tmpl, std::span<const double> eta,
              std::span<const double> x, std::span<const double> xh) {
  require(eta.size() == tmpl.size(), ErrorCode::kInvalidArgument,
          "coefficient vector has the wrong length");
  require(x.size() == tmpl.dimension() && xh.size() == tmpl.dimension(),
          ErrorCode::kInvalidArgument, "state dimension does not match the template");
  Vector q(tmpl.size());
  tmpl.basis(x, xh, q);
  double v = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (!std::isfinite(q[j])) {
      fail(ErrorCode::kNumeric, "basis term '" + tmpl.basis_text()[j] + "' is not finite");
    }
    v += eta[j] * q[j];
  }
  return v;
}

double phi1(const AbfTemplate& tmpl, double sigma, std::span<const double> eta,
            std::span<const double> x, std::span<const double> xh) {
  const double d = distance(x, xh);
  return sigma * d * d - eval_V(tmpl, eta, x, xh);
}

double phi2(const AbfTemplate& tmpl, std::span<const double> eta, double gamma_tilde,
            double rho_tilde, std::span<const double> x_next,
            std::span<const double> xh_next, std::span<const double> x,
            std::span<const double> xh) {
  return eval_V(tmpl, eta, x_next, xh_next) - gamma_tilde * eval_V(tmpl, eta, x, xh) -
         rho_tilde;
}

DecayParameters recover_gamma_rho(double gamma_tilde, double rho_tilde, double psi) {
  require(psi > 0.0 && psi < 1.0, ErrorCode::kInvalidArgument, "psi must lie in (0, 1)");
  require(gamma_tilde > 0.0 && gamma_tilde < 1.0, ErrorCode::kInvalidArgument,
          "gamma_tilde must lie in (0, 1)");
  require(rho_tilde >= 0.0, ErrorCode::kInvalidArgument, "rho_tilde must be >= 0");
  return {1.0 - (1.0 - psi) * (1.0 - gamma_tilde),
          rho_tilde / ((1.0 - gamma_tilde) * psi)};
}

double psi_for_gamma(double gamma_target, double gamma_tilde) {
  require(gamma_tilde > 0.0 && gamma_tilde < 1.0, ErrorCode::kInvalidArgument,
          "gamma_tilde must lie in (0, 1)");
  require(gamma_target > gamma_tilde && gamma_target < 1.0, ErrorCode::kInvalidArgument,
          "target gamma must lie in (gamma_tilde, 1)");
  return 1.0 - (1.0 - gamma_target) / (1.0 - gamma_tilde);
}

double epsilon_tilde(double rho, double sigma) {
  require(sigma > 0.0, ErrorCode::kInvalidArgument, "sigma must be positive");
  require(rho >= 0.0, ErrorCode::kInvalidArgument, "rho must be >= 0");
  return std::sqrt(rho / sigma);
}

AbfCertificate make_certificate(AbfTemplate tmpl, Vector eta, double sigma,
                                double gamma_tilde, double rho_tilde, double psi,
                                double confidence, ScenarioRecord scenario) {
  auto decay = recover_gamma_rho(gamma_tilde, rho_tilde, psi);
  AbfCertificate cert{std::move(tmpl), std::move(eta), sigma, gamma_tilde, rho_tilde,
                      psi, decay.gamma, decay.rho, 0.0, confidence, std::move(scenario)};
  cert.epsilon_tilde = epsilon_tilde(cert.rho, sigma);
  return cert;
}

bool in_relation(const AbfCertificate& cert, std::span<const double> x,
                 std::span<const double> xh) {
  return eval_V(cert.tmpl, cert.eta, x, xh) <= cert.rho;
}

void write_certificate_json(std::ostream& out, const AbfCertificate& c) {
  json tmpl = {{"kind", to_string(c.tmpl.kind())},
               {"dimension", c.tmpl.dimension()},
               {"basis", c.tmpl.basis_text()},
               {"eta_lower", c.tmpl.lower()},
               {"eta_upper", c.tmpl.upper()}};
  if (c.tmpl.kind() == TemplateKind::kDiagonalEvenPower) {
    tmpl["power"] = c.tmpl.power();
    tmpl["constant"] = c.tmpl.has_constant();
  }
  if (c.tmpl.kind() == TemplateKind::kQuadraticForm)
    tmpl["dominance_margin"] = c.tmpl.dominance_margin();
  json j = {{"template", tmpl},
            {"eta", c.eta},
            {"sigma", c.sigma},
            {"gamma_tilde", c.gamma_tilde},
            {"rho_tilde", c.rho_tilde},
            {"psi", c.psi},
            {"gamma", c.gamma},
            {"rho", c.rho},
            {"epsilon_tilde", c.epsilon_tilde},
            {"confidence", c.confidence},
            {"scenario",
             {{"samples", c.scenario.samples},
              {"epsilon", c.scenario.epsilon},
              {"beta", c.scenario.beta},
              {"mu_star", c.scenario.mu_star},
              {"gamma_tilde_set", c.scenario.gamma_tilde_set},
              {"decision_variables", c.scenario.decision_variables},
              {"constraints_total", c.scenario.constraints_total},
              {"lipschitz", c.scenario.lipschitz}}}};
  out << j.dump(2) << '\n';
}

AbfCertificate read_certificate_json(std::istream& in) {
  try {
    json j;
    in >> j;
    const json& t = j.at("template");
    const auto n = t.at("dimension").get<std::size_t>();
    auto lo = t.at("eta_lower").get<Vector>();
    auto hi = t.at("eta_upper").get<Vector>();
    AbfTemplate tmpl = [&] {
      switch (kind_from_string(t.at("kind").get<std::string>())) {
        case TemplateKind::kQuadraticForm:
          return AbfTemplate::quadratic_form(n, lo, hi, t.at("dominance_margin").get<double>());
        case TemplateKind::kDiagonalEvenPower:
          return AbfTemplate::diagonal_even_power(n, t.at("power").get<int>(),
                                                  t.at("constant").get<bool>(), lo, hi);
        case TemplateKind::kCustom:
          break;
      }
      return AbfTemplate::custom(n, t.at("basis").get<std::vector<std::string>>(), lo, hi);
    }();
    const json& s = j.at("scenario");
    ScenarioRecord rec{s.at("samples").get<std::size_t>(),
                       s.at("epsilon").get<Vector>(),
                       s.at("beta").get<double>(),
                       s.at("mu_star").get<double>(),
                       s.at("gamma_tilde_set").get<Vector>(),
                       s.at("decision_variables").get<std::size_t>(),
                       s.at("constraints_total").get<std::size_t>(),
                       s.at("lipschitz").get<Vector>()};
    AbfCertificate c{std::move(tmpl),
                     j.at("eta").get<Vector>(),
                     j.at("sigma").get<double>(),
                     j.at("gamma_tilde").get<double>(),
                     j.at("rho_tilde").get<double>(),
                     j.at("psi").get<double>(),
                     j.at("gamma").get<double>(),
                     j.at("rho").get<double>(),
                     j.at("epsilon_tilde").get<double>(),
                     j.at("confidence").get<double>(),
                     std::move(rec)};
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIo, std::string("malformed certificate: ") + e.what());
  }
}

}  // namespace abfkit
