#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "abfkit/abf.hpp"
#include "abfkit/bounds.hpp"
#include "abfkit/scenario.hpp"
#include "abfkit/systems.hpp"

namespace abfkit {

/// Raw `key = value` entries of a config file.
using ConfigMap = std::map<std::string, std::string>;

/// Parses flat `key = value` text; `#` starts a comment. Throws kConfig on
/// malformed lines and repeated keys.
ConfigMap parse_config_text(const std::string& text, const std::string& origin = "config");

/// Every key the loader understands.
const std::vector<std::string>& known_config_keys();

/// Built-in defaults for a system under a profile ("desk" or "paper"). Empty
/// for systems without built-in parameters.
ConfigMap profile_defaults(const std::string& system, const std::string& profile);

enum class LipschitzMode { kExplicit, kLinear, kNonlinear, kEstimate };

struct RunConfig {
  std::string profile = "desk";
  std::uint64_t seed = 1;

  std::string system;
  std::string oracle_command;  // system = command
  std::size_t dimension = 0;
  std::size_t input_dimension = 0;

  Vector state_lower, state_upper;
  std::vector<Vector> inputs;
  double delta = 0.0;

  std::string template_kind;
  int template_power = 2;
  bool template_constant = false;
  Vector eta_lower, eta_upper;
  std::vector<std::string> template_basis;
  double dominance_margin = 1e-9;

  Vector gamma_tilde;
  RhoTilde rho_tilde;
  double sigma_floor = 1e-9;
  double sigma_upper = 0.0;
  Vector epsilon;  // one per gamma_tilde candidate
  double beta = 0.0;
  std::optional<std::uint64_t> samples;  // nullopt: use N_min
  SolverOptions solver;
  bool trace = false;

  std::optional<double> psi;
  double gamma_target = 0.99;

  LipschitzMode lipschitz_mode = LipschitzMode::kEstimate;
  Vector lipschitz_values;
  std::optional<double> alpha1, alpha2, norm_A, norm_B, bound_f, bound_jacobian;
  std::optional<double> lambda_max;  // nullopt: Gershgorin over the template box
  std::size_t estimate_samples = 200;
  double safety_factor = 1.1;

  std::optional<double> reference_n;
  Vector epsilon_grid, beta_grid;

  Vector safe_lower, safe_upper;
  bool deflate = false;

  std::vector<Vector> x0;
  std::size_t horizon = 100;
  std::size_t random_starts = 20;

  /// Entries after merging defaults, file and overrides, for the report.
  ConfigMap resolved;
};

struct ConfigOverrides {
  std::optional<std::string> profile;
  std::optional<std::uint64_t> seed;
};

/// Merges profile defaults, the file's entries and CLI overrides, then
/// validates. Throws kConfig naming the offending key.
RunConfig load_config(const ConfigMap& file, const ConfigOverrides& overrides = {});
RunConfig load_config_file(const std::string& path, const ConfigOverrides& overrides = {});

SystemPtr make_system(const RunConfig& config);
AbfTemplate make_template(const RunConfig& config);

/// Independent per-stage seed derived from the run seed.
std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage);

}  // namespace abfkit
