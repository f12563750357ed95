#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "abfkit/abstraction.hpp"
#include "abfkit/config.hpp"
#include "abfkit/error.hpp"
#include "abfkit/scenario.hpp"
#include "abfkit/synthesis.hpp"

namespace abfkit {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitCrash = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitRejected = 4,
  kExitSynthesisFailed = 5,
};

int exit_code_for(ErrorCode code);

struct ComplexityResult {
  Vector lipschitz;       // I_phi_k
  Vector epsilon_bar;
  std::size_t n = 0;
  std::size_t r = 0;
  std::uint64_t min_samples = 0;
  std::vector<SurfacePoint> surface;
  nlohmann::json lipschitz_inputs;  // what produced `lipschitz`
};

struct CertifyResult {
  std::uint64_t samples = 0;
  SolveReport report;
  Verdict verdict;
};

struct SynthesisResult {
  std::size_t safe_cells = 0;
  SafetyController controller{0, {}, 0};
  std::vector<Trajectory> trajectories;
  std::size_t contained = 0;  // trajectories that ran the full horizon inside the safe box
};

/// Runs the stages of data-driven ABF construction and synthesis for one
/// configuration, writing artifacts under `out_dir`. Each stage is computed
/// at most once; later stages pull in the earlier ones they need.
class Pipeline {
 public:
  Pipeline(RunConfig config, std::filesystem::path out_dir, std::ostream& log);

  const RunConfig& config() const { return config_; }

  const FiniteAbstraction& abstraction();
  const ComplexityResult& complexity();
  const CertifyResult& certify();
  /// Uses the certificate from this run, or `certificate.json` in the output
  /// directory, when the safe box is deflated by epsilon_tilde.
  const SynthesisResult& synthesize();

  /// Deterministic report (no wall-clock); stages in execution order.
  nlohmann::json report() const;
  nlohmann::json timings() const;
  /// Writes report.json and timings.json.
  void write_reports(const std::string& command) const;

 private:
  struct Stage {
    std::string name;
    nlohmann::json summary;
    double seconds = 0.0;
  };

  std::filesystem::path path(const std::string& file) const;
  void record(std::string name, nlohmann::json summary, double seconds);

  RunConfig config_;
  std::filesystem::path out_;
  std::ostream& log_;
  SystemPtr system_;
  std::optional<FiniteAbstraction> abstraction_;
  std::optional<ComplexityResult> complexity_;
  std::optional<CertifyResult> certify_;
  std::optional<SynthesisResult> synthesis_;
  std::vector<Stage> stages_;
  mutable std::string command_;
};

/// Lipschitz constants I_phi_k for the configuration. `estimate` mode queries
/// the system on a pilot sample.
ComplexityResult compute_complexity(const RunConfig& config, const BlackBoxSystem& system);

/// Entry point shared by the executable and tests: parses arguments, runs
/// the command, prints a summary to `out` and diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace abfkit
