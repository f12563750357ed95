#include "abfkit/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "abfkit/error.hpp"
#include "abfkit/format.hpp"

namespace abfkit {

ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = origin + ":" + std::to_string(number);
    if (eq == std::string_view::npos)
      fail(ErrorCode::kConfig, where + ": expected 'key = value'");
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));
    if (key.empty()) fail(ErrorCode::kConfig, where + ": empty key");
    if (!out.emplace(key, value).second)
      fail(ErrorCode::kConfig, where + ": key '" + key + "' given twice");
  }
  return out;
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys{
      "profile",
      "seed",
      "system",
      "system.command",
      "system.dimension",
      "system.input_dimension",
      "state.lower",
      "state.upper",
      "inputs",
      "inputs.axes",
      "abstraction.delta",
      "template.kind",
      "template.power",
      "template.constant",
      "template.eta_lower",
      "template.eta_upper",
      "template.basis",
      "template.dominance_margin",
      "scenario.gamma_tilde",
      "scenario.rho_tilde",
      "scenario.rho_tilde_upper",
      "scenario.sigma_floor",
      "scenario.sigma_upper",
      "scenario.epsilon",
      "scenario.beta",
      "scenario.samples",
      "scenario.batch",
      "scenario.tolerance",
      "scenario.maximize_sigma",
      "scenario.trace",
      "abf.psi",
      "abf.gamma_target",
      "lipschitz.mode",
      "lipschitz.values",
      "lipschitz.alpha1",
      "lipschitz.alpha2",
      "lipschitz.norm_A",
      "lipschitz.norm_B",
      "lipschitz.bound_f",
      "lipschitz.bound_jacobian",
      "lipschitz.lambda_max",
      "lipschitz.estimate_samples",
      "lipschitz.safety_factor",
      "complexity.reference_n",
      "complexity.epsilon_grid",
      "complexity.beta_grid",
      "synthesis.safe_lower",
      "synthesis.safe_upper",
      "synthesis.deflate",
      "simulation.x0",
      "simulation.horizon",
      "simulation.random_starts",
  };
  return keys;
}

ConfigMap profile_defaults(const std::string& system, const std::string& profile) {
  ConfigMap d{
      {"seed", "1"},
      {"template.dominance_margin", "1e-9"},
      {"scenario.sigma_floor", "1e-9"},
      {"scenario.sigma_upper", "inf"},
      {"scenario.samples", "auto"},
      {"scenario.batch", "64"},
      {"scenario.tolerance", "1e-9"},
      {"scenario.maximize_sigma", "true"},
      {"scenario.trace", "false"},
      {"abf.psi", "auto"},
      {"abf.gamma_target", "0.99"},
      {"lipschitz.alpha1", "auto"},
      {"lipschitz.alpha2", "auto"},
      {"lipschitz.lambda_max", "gershgorin"},
      {"lipschitz.estimate_samples", "200"},
      {"lipschitz.safety_factor", "1.1"},
      {"complexity.reference_n", "none"},
      {"complexity.epsilon_grid", "0.05 0.1 0.15 0.2 0.25 0.3 0.35 0.4 0.45 0.5"},
      {"complexity.beta_grid", "0.01 0.025 0.05 0.1 0.15 0.2"},
      {"synthesis.deflate", "false"},
      {"simulation.horizon", "100"},
      {"simulation.random_starts", "20"},
  };
  const bool paper = profile == "paper";
  auto set = [&](std::initializer_list<std::pair<const char*, const char*>> entries) {
    for (const auto& [k, v] : entries) d[k] = v;
  };
  if (system == "dc_motor" || system == "jet_engine") {
    set({{"state.lower", "-0.5 -0.5"},
         {"state.upper", "0.5 0.5"},
         {"template.kind", "diagonal_even_power"},
         {"template.constant", "true"},
         {"scenario.rho_tilde_upper", "none"}});
  }
  if (system == "dc_motor" && !paper) {
    set({{"inputs.axes", "-0.3:0.6:0.3 | -0.3:0.6:0.3"},
         {"abstraction.delta", "0.15"},
         {"template.power", "2"},
         {"template.eta_lower", "-0.4"},
         {"template.eta_upper", "0.4"},
         {"scenario.gamma_tilde", "0.1 0.3"},
         {"scenario.rho_tilde", "0.6"},
         {"scenario.epsilon", "0.3"},
         {"scenario.beta", "0.05"},
         {"lipschitz.mode", "estimate"},
         {"simulation.x0", "0.3 -0.3"}});
  } else if (system == "dc_motor") {
    set({{"inputs.axes", "-0.3:0.05:0.3 | -0.3:0.05:0.3"},
         {"abstraction.delta", "0.05"},
         {"template.power", "4"},
         {"template.eta_lower", "-0.2"},
         {"template.eta_upper", "0.2"},
         {"scenario.gamma_tilde", "0.1 0.2 0.3"},
         {"scenario.rho_tilde", "0.015"},
         {"scenario.epsilon", "0.013"},
         {"scenario.beta", "0.01"},
         {"lipschitz.mode", "explicit"},
         {"lipschitz.values", "1.55 1.55 1.55"},
         {"complexity.reference_n", "156052"},
         {"simulation.x0", "0.3 -0.3"}});
  } else if (system == "jet_engine" && !paper) {
    set({{"inputs.axes", "-0.5:0.25:0.5"},
         {"abstraction.delta", "0.15"},
         {"template.power", "2"},
         {"template.eta_lower", "-0.4"},
         {"template.eta_upper", "0.4"},
         {"scenario.gamma_tilde", "0.1 0.3"},
         {"scenario.rho_tilde", "0.6"},
         {"scenario.epsilon", "0.3"},
         {"scenario.beta", "0.05"},
         {"lipschitz.mode", "estimate"},
         {"simulation.x0", "0.1 -0.1"}});
  } else if (system == "jet_engine") {
    set({{"inputs.axes", "-0.5:0.05:0.5"},
         {"abstraction.delta", "0.05"},
         {"template.power", "2"},
         {"template.eta_lower", "-0.2"},
         {"template.eta_upper", "0.2"},
         {"scenario.gamma_tilde", "0.1 0.2 0.3"},
         {"scenario.rho_tilde", "0.01"},
         {"scenario.epsilon", "0.006"},
         {"scenario.beta", "0.01"},
         {"lipschitz.mode", "explicit"},
         {"lipschitz.values", "1.8 1.9 2.02"},
         {"complexity.reference_n", "1100794"},
         {"simulation.x0", "0.1 -0.1"}});
  } else {
    set({{"template.power", "2"},
         {"template.constant", "false"},
         {"scenario.rho_tilde_upper", "none"},
         {"lipschitz.mode", "estimate"},
         {"simulation.x0", ""}});
  }
  return d;
}

namespace {

class Reader {
 public:
  explicit Reader(const ConfigMap& map) : map_(map) {}

  std::optional<std::string> raw(const std::string& key) const {
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }
  std::string text(const std::string& key) const {
    auto v = raw(key);
    if (!v) fail(ErrorCode::kConfig, "missing required key '" + key + "'");
    return *v;
  }
  bool has(const std::string& key) const {
    auto v = raw(key);
    return v && !trim(*v).empty() && *v != "none";
  }

  template <class Fn>
  auto parse(const std::string& key, Fn&& fn) const {
    const std::string value = text(key);
    try {
      return fn(value);
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, "key '" + key + "': " + e.what());
    }
  }

  double number(const std::string& key) const {
    return parse(key, [](const std::string& v) { return parse_double(trim(v)); });
  }
  std::optional<double> number_or_auto(const std::string& key) const {
    if (!has(key) || trim(text(key)) == "auto") return std::nullopt;
    return number(key);
  }
  long long integer(const std::string& key) const {
    return parse(key, [](const std::string& v) { return parse_integer(trim(v)); });
  }
  std::size_t count(const std::string& key) const {
    const long long v = integer(key);
    if (v < 0) fail(ErrorCode::kConfig, "key '" + key + "' must be >= 0");
    return static_cast<std::size_t>(v);
  }
  bool flag(const std::string& key) const {
    const std::string v(trim(text(key)));
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    fail(ErrorCode::kConfig, "key '" + key + "' must be true or false, got '" + v + "'");
  }
  Vector list(const std::string& key) const {
    return parse(key, [](const std::string& v) { return parse_numbers(v); });
  }
  std::vector<Vector> rows(const std::string& key) const {
    return parse(key, [](const std::string& v) {
      std::vector<Vector> out;
      for (const auto& part : split(v, ';'))
        if (!trim(part).empty()) out.push_back(parse_numbers(part));
      return out;
    });
  }

  static Vector parse_numbers(const std::string& v) {
    Vector out;
    std::string token;
    auto flush = [&] {
      if (!token.empty()) out.push_back(parse_double(token));
      token.clear();
    };
    for (char c : v) {
      if (c == ',' || std::isspace(static_cast<unsigned char>(c))) flush();
      else token += c;
    }
    flush();
    return out;
  }

 private:
  const ConfigMap& map_;
};

// "lo:step:hi | lo:step:hi | ..." or explicit value lists per axis; the
// product varies the first axis fastest.
std::vector<Vector> parse_axes(const std::string& text) {
  std::vector<Vector> axes;
  for (const auto& part : split(text, '|')) {
    const std::string axis(trim(part));
    Vector values;
    if (axis.find(':') != std::string::npos) {
      auto f = split(axis, ':');
      require(f.size() == 3, ErrorCode::kConfig, "axis '" + axis + "' must be lo:step:hi");
      const double lo = parse_double(trim(f[0])), step = parse_double(trim(f[1])),
                   hi = parse_double(trim(f[2]));
      require(step > 0.0 && hi >= lo, ErrorCode::kConfig,
              "axis '" + axis + "' needs step > 0 and hi >= lo");
      const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
      for (std::size_t i = 0; i <= n; ++i) {
        double v = lo + static_cast<double>(i) * step;
        if (std::abs(v) < 1e-12 * step) v = 0.0;
        values.push_back(v);
      }
    } else {
      values = Reader::parse_numbers(axis);
    }
    require(!values.empty(), ErrorCode::kConfig, "empty input axis");
    axes.push_back(std::move(values));
  }
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.size();
  std::vector<Vector> ordered;
  ordered.reserve(total);
  std::vector<std::size_t> idx(axes.size(), 0);
  for (std::size_t c = 0; c < total; ++c) {
    Vector p;
    for (std::size_t a = 0; a < axes.size(); ++a) p.push_back(axes[a][idx[a]]);
    ordered.push_back(std::move(p));
    for (std::size_t a = 0; a < axes.size(); ++a) {
      if (++idx[a] < axes[a].size()) break;
      idx[a] = 0;
    }
  }
  return ordered;
}

Vector broadcast(Vector v, std::size_t n, const std::string& key) {
  if (v.size() == 1 && n > 1) v.assign(n, v[0]);
  if (v.size() != n)
    fail(ErrorCode::kConfig, "key '" + key + "' needs 1 or " + std::to_string(n) + " values, got " +
                                 std::to_string(v.size()));
  return v;
}

}  // namespace

RunConfig load_config(const ConfigMap& file, const ConfigOverrides& overrides) {
  std::string profile = overrides.profile.value_or(
      file.count("profile") ? std::string(trim(file.at("profile"))) : "desk");
  if (profile != "desk" && profile != "paper")
    fail(ErrorCode::kConfig, "profile must be 'desk' or 'paper', got '" + profile + "'");
  if (!file.count("system")) fail(ErrorCode::kConfig, "missing required key 'system'");
  const std::string system(trim(file.at("system")));
  const std::set<std::string> systems{"dc_motor", "jet_engine", "identity", "command"};
  if (!systems.count(system))
    fail(ErrorCode::kConfig,
         "unknown system '" + system + "' (expected dc_motor, jet_engine, identity or command)");

  ConfigMap merged = profile_defaults(system, profile);
  const auto& known = known_config_keys();
  for (const auto& [k, v] : file) {
    if (std::find(known.begin(), known.end(), k) == known.end())
      fail(ErrorCode::kConfig, "unknown key '" + k + "'");
    merged[k] = v;
  }
  // An input set given one way replaces a default given the other way.
  if (file.count("inputs") && !file.count("inputs.axes")) merged.erase("inputs.axes");
  if (file.count("inputs.axes") && !file.count("inputs")) merged.erase("inputs");
  merged["profile"] = profile;
  if (overrides.seed) merged["seed"] = std::to_string(*overrides.seed);

  Reader r(merged);
  RunConfig c;
  c.profile = profile;
  c.system = system;
  c.seed = r.parse("seed", [](const std::string& v) {
    const long long s = parse_integer(trim(v));
    require(s >= 0, ErrorCode::kConfig, "seed must be >= 0");
    return static_cast<std::uint64_t>(s);
  });

  if (system == "dc_motor") {
    c.dimension = 2;
    c.input_dimension = 2;
  } else if (system == "jet_engine") {
    c.dimension = 2;
    c.input_dimension = 1;
  } else {
    c.dimension = r.count("system.dimension");
    c.input_dimension = r.count("system.input_dimension");
    if (c.dimension == 0 || c.input_dimension == 0)
      fail(ErrorCode::kConfig, "system.dimension and system.input_dimension must be >= 1");
    if (system == "command") c.oracle_command = r.text("system.command");
  }
  const std::size_t n = c.dimension;

  c.state_lower = broadcast(r.list("state.lower"), n, "state.lower");
  c.state_upper = broadcast(r.list("state.upper"), n, "state.upper");
  for (std::size_t i = 0; i < n; ++i)
    if (!(c.state_lower[i] < c.state_upper[i]))
      fail(ErrorCode::kConfig, "state.lower must be below state.upper in every coordinate");

  if (r.has("inputs") && r.has("inputs.axes"))
    fail(ErrorCode::kConfig, "give either 'inputs' or 'inputs.axes', not both");
  if (r.has("inputs")) {
    c.inputs = r.rows("inputs");
  } else {
    c.inputs = r.parse("inputs.axes", [](const std::string& v) { return parse_axes(v); });
  }
  if (c.inputs.empty()) fail(ErrorCode::kConfig, "the input set is empty");
  for (const auto& u : c.inputs)
    if (u.size() != c.input_dimension)
      fail(ErrorCode::kConfig, "every input needs " + std::to_string(c.input_dimension) +
                                   " components");

  c.delta = r.number("abstraction.delta");
  if (!(c.delta > 0.0)) fail(ErrorCode::kConfig, "abstraction.delta must be positive");

  c.template_kind = std::string(trim(r.text("template.kind")));
  c.template_power = static_cast<int>(r.integer("template.power"));
  c.template_constant = r.flag("template.constant");
  c.dominance_margin = r.number("template.dominance_margin");
  if (r.has("template.basis")) {
    for (const auto& b : split(r.text("template.basis"), ';'))
      if (!trim(b).empty()) c.template_basis.emplace_back(trim(b));
  }
  std::size_t z = 0;
  if (c.template_kind == "quadratic_form") z = n * (n + 1) / 2;
  else if (c.template_kind == "diagonal_even_power") z = n + (c.template_constant ? 1 : 0);
  else if (c.template_kind == "custom") z = c.template_basis.size();
  else
    fail(ErrorCode::kConfig, "template.kind must be quadratic_form, diagonal_even_power or custom");
  if (z == 0) fail(ErrorCode::kConfig, "template.basis is empty");
  c.eta_lower = broadcast(r.list("template.eta_lower"), z, "template.eta_lower");
  c.eta_upper = broadcast(r.list("template.eta_upper"), z, "template.eta_upper");

  c.gamma_tilde = r.list("scenario.gamma_tilde");
  if (c.gamma_tilde.empty()) fail(ErrorCode::kConfig, "scenario.gamma_tilde is empty");
  for (double g : c.gamma_tilde)
    if (!(g > 0.0 && g < 1.0))
      fail(ErrorCode::kConfig, "scenario.gamma_tilde values must lie in (0, 1)");
  const std::size_t l = c.gamma_tilde.size();
  if (trim(r.text("scenario.rho_tilde")) == "free") {
    if (!r.has("scenario.rho_tilde_upper"))
      fail(ErrorCode::kConfig, "a free scenario.rho_tilde needs scenario.rho_tilde_upper");
    c.rho_tilde = RhoTilde::variable(r.number("scenario.rho_tilde_upper"));
  } else {
    c.rho_tilde = RhoTilde::fixed(r.number("scenario.rho_tilde"));
    if (!(c.rho_tilde.value >= 0.0)) fail(ErrorCode::kConfig, "scenario.rho_tilde must be >= 0");
  }
  c.sigma_floor = r.number("scenario.sigma_floor");
  c.sigma_upper = r.number("scenario.sigma_upper");
  if (!(c.sigma_floor > 0.0 && c.sigma_upper >= c.sigma_floor))
    fail(ErrorCode::kConfig, "need 0 < scenario.sigma_floor <= scenario.sigma_upper");
  c.epsilon = broadcast(r.list("scenario.epsilon"), l, "scenario.epsilon");
  for (double e : c.epsilon)
    if (!(e >= 0.0)) fail(ErrorCode::kConfig, "scenario.epsilon must be >= 0");
  c.beta = r.number("scenario.beta");
  if (!(c.beta >= 0.0 && c.beta <= 1.0)) fail(ErrorCode::kConfig, "scenario.beta must lie in [0, 1]");
  if (trim(r.text("scenario.samples")) != "auto") {
    const long long s = r.integer("scenario.samples");
    if (s < 1) fail(ErrorCode::kConfig, "scenario.samples must be >= 1 or 'auto'");
    c.samples = static_cast<std::uint64_t>(s);
  }
  c.solver.batch = r.count("scenario.batch");
  if (c.solver.batch == 0) fail(ErrorCode::kConfig, "scenario.batch must be >= 1");
  c.solver.tolerance = r.number("scenario.tolerance");
  c.solver.maximize_sigma = r.flag("scenario.maximize_sigma");
  c.trace = r.flag("scenario.trace");

  c.psi = r.number_or_auto("abf.psi");
  if (c.psi && !(*c.psi > 0.0 && *c.psi < 1.0))
    fail(ErrorCode::kConfig, "abf.psi must lie in (0, 1)");
  c.gamma_target = r.number("abf.gamma_target");
  if (!c.psi) {
    for (double g : c.gamma_tilde)
      if (!(c.gamma_target > g && c.gamma_target < 1.0))
        fail(ErrorCode::kConfig, "abf.gamma_target must lie in (max gamma_tilde, 1)");
  }

  const std::string mode(trim(r.text("lipschitz.mode")));
  if (mode == "explicit") c.lipschitz_mode = LipschitzMode::kExplicit;
  else if (mode == "linear") c.lipschitz_mode = LipschitzMode::kLinear;
  else if (mode == "nonlinear") c.lipschitz_mode = LipschitzMode::kNonlinear;
  else if (mode == "estimate") c.lipschitz_mode = LipschitzMode::kEstimate;
  else fail(ErrorCode::kConfig, "lipschitz.mode must be explicit, linear, nonlinear or estimate");
  auto optional_number = [&](const char* key) -> std::optional<double> {
    if (!r.has(key)) return std::nullopt;
    return r.number_or_auto(key);
  };
  c.alpha1 = optional_number("lipschitz.alpha1");
  c.alpha2 = optional_number("lipschitz.alpha2");
  c.norm_A = optional_number("lipschitz.norm_A");
  c.norm_B = optional_number("lipschitz.norm_B");
  c.bound_f = optional_number("lipschitz.bound_f");
  c.bound_jacobian = optional_number("lipschitz.bound_jacobian");
  if (trim(r.text("lipschitz.lambda_max")) != "gershgorin")
    c.lambda_max = r.number("lipschitz.lambda_max");
  c.estimate_samples = r.count("lipschitz.estimate_samples");
  c.safety_factor = r.number("lipschitz.safety_factor");
  switch (c.lipschitz_mode) {
    case LipschitzMode::kExplicit:
      c.lipschitz_values = broadcast(r.list("lipschitz.values"), l, "lipschitz.values");
      break;
    case LipschitzMode::kLinear:
      if (!c.norm_A || !c.norm_B)
        fail(ErrorCode::kConfig, "lipschitz.mode = linear needs lipschitz.norm_A and lipschitz.norm_B");
      break;
    case LipschitzMode::kNonlinear:
      if (!c.bound_f || !c.bound_jacobian)
        fail(ErrorCode::kConfig,
             "lipschitz.mode = nonlinear needs lipschitz.bound_f and lipschitz.bound_jacobian");
      break;
    case LipschitzMode::kEstimate:
      if (c.estimate_samples < 2)
        fail(ErrorCode::kConfig, "lipschitz.estimate_samples must be >= 2");
      if (!(c.safety_factor >= 1.0))
        fail(ErrorCode::kConfig, "lipschitz.safety_factor must be >= 1");
      break;
  }
  if (c.lipschitz_mode != LipschitzMode::kExplicit && !c.lambda_max &&
      c.template_kind == "custom")
    fail(ErrorCode::kConfig, "custom templates need a numeric lipschitz.lambda_max");

  if (r.has("complexity.reference_n")) c.reference_n = r.number("complexity.reference_n");
  c.epsilon_grid = r.list("complexity.epsilon_grid");
  c.beta_grid = r.list("complexity.beta_grid");

  c.safe_lower = r.has("synthesis.safe_lower")
                     ? broadcast(r.list("synthesis.safe_lower"), n, "synthesis.safe_lower")
                     : c.state_lower;
  c.safe_upper = r.has("synthesis.safe_upper")
                     ? broadcast(r.list("synthesis.safe_upper"), n, "synthesis.safe_upper")
                     : c.state_upper;
  c.deflate = r.flag("synthesis.deflate");

  if (r.has("simulation.x0")) c.x0 = r.rows("simulation.x0");
  for (const auto& x : c.x0)
    if (x.size() != n)
      fail(ErrorCode::kConfig, "simulation.x0 entries need " + std::to_string(n) + " components");
  c.horizon = r.count("simulation.horizon");
  if (c.horizon == 0) fail(ErrorCode::kConfig, "simulation.horizon must be >= 1");
  c.random_starts = r.count("simulation.random_starts");

  make_template(c);
  c.resolved = std::move(merged);
  return c;
}

RunConfig load_config_file(const std::string& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_config(parse_config_text(buffer.str(), path), overrides);
}

SystemPtr make_system(const RunConfig& c) {
  if (c.system == "dc_motor") return make_dc_motor();
  if (c.system == "jet_engine") return make_jet_engine();
  if (c.system == "identity") return make_identity(c.dimension, c.input_dimension);
  if (c.system == "command")
    return std::make_shared<ExternalCommandSystem>(c.oracle_command, c.dimension,
                                                   c.input_dimension);
  fail(ErrorCode::kConfig, "unknown system '" + c.system + "'");
}

AbfTemplate make_template(const RunConfig& c) {
  try {
    if (c.template_kind == "quadratic_form")
      return AbfTemplate::quadratic_form(c.dimension, c.eta_lower, c.eta_upper,
                                         c.dominance_margin);
    if (c.template_kind == "diagonal_even_power")
      return AbfTemplate::diagonal_even_power(c.dimension, c.template_power, c.template_constant,
                                              c.eta_lower, c.eta_upper);
    return AbfTemplate::custom(c.dimension, c.template_basis, c.eta_lower, c.eta_upper);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    fail(ErrorCode::kConfig, std::string("template: ") + e.what());
  }
}

std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage) {
  // splitmix64 finalizer over (seed, stage)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stage + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace abfkit
