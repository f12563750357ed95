#include "abfkit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <cstdio>
#include <random>

#include "abfkit/bounds.hpp"
#include "abfkit/error.hpp"

namespace abfkit {

using nlohmann::json;

namespace {

enum Stream : std::uint64_t { kDatasetStream = 1, kPilotStream = 2, kStartStream = 3 };

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) fail(ErrorCode::kIo, "cannot write '" + p.string() + "'");
  return f;
}

// Six significant digits, for log lines only; files keep round-trip precision.
std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string brief(std::span<const double> v, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + brief(v[i]);
  return out;
}

std::string vec_text(std::span<const double> v) { return "(" + brief(v) + ")"; }

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kTemplate:
    case ErrorCode::kInfeasible:
      return kExitConfig;
    case ErrorCode::kDataAcquisition:
    case ErrorCode::kInsufficientData:
    case ErrorCode::kIo:
      return kExitData;
    default:
      return kExitCrash;
  }
}

ComplexityResult compute_complexity(const RunConfig& c, const BlackBoxSystem& system) {
  ComplexityResult res;
  const AbfTemplate tmpl = make_template(c);
  res.n = c.dimension;
  res.r = tmpl.size() + 1 + (c.rho_tilde.free ? 1 : 0);

  if (c.lipschitz_mode == LipschitzMode::kExplicit) {
    res.lipschitz = c.lipschitz_values;
    res.lipschitz_inputs = {{"mode", "explicit"}};
  } else {
    const StateBox box(c.state_lower, c.state_upper);
    const InputSet inputs(c.inputs);
    LipschitzInputs in;
    in.alpha1 = c.alpha1.value_or(box.max_norm());
    in.alpha2 = c.alpha2.value_or(inputs.max_norm());
    in.delta = c.delta;
    in.gamma_tilde_set = c.gamma_tilde;
    if (c.lambda_max) {
      in.lambda_max = *c.lambda_max;
    } else {
      auto entry_box = tmpl.matrix_entry_box();
      require(entry_box.has_value(), ErrorCode::kConfig,
              "Gershgorin bound needs a quadratic or diagonal template");
      in.lambda_max = gershgorin_lambda_max(entry_box->first, entry_box->second);
    }
    json desc = {{"alpha1", in.alpha1},
                 {"alpha2", in.alpha2},
                 {"delta", in.delta},
                 {"lambda_max", in.lambda_max}};
    switch (c.lipschitz_mode) {
      case LipschitzMode::kLinear:
        in.kind = LipschitzInputs::Kind::kLinear;
        in.norm_A = c.norm_A;
        in.norm_B = c.norm_B;
        res.lipschitz = lipschitz_linear(in);
        desc["mode"] = "linear";
        desc["norm_A"] = *c.norm_A;
        desc["norm_B"] = *c.norm_B;
        break;
      case LipschitzMode::kNonlinear:
        in.kind = LipschitzInputs::Kind::kNonlinear;
        in.bound_f = c.bound_f;
        in.bound_jacobian = c.bound_jacobian;
        res.lipschitz = lipschitz_nonlinear(in);
        desc["mode"] = "nonlinear";
        desc["bound_f"] = *c.bound_f;
        desc["bound_jacobian"] = *c.bound_jacobian;
        break;
      default: {
        // Pilot sample: ||df/dx|| from difference quotients, ||f|| from the
        // largest observed successor, both inflated by the safety factor.
        auto pilot = collect_dataset(system, box, inputs, c.estimate_samples,
                                     stage_seed(c.seed, kPilotStream));
        double f_max = 0.0;
        for (const auto& p : pilot) f_max = std::max(f_max, norm(p.x_next));
        in.kind = LipschitzInputs::Kind::kNonlinear;
        in.bound_f = c.safety_factor * f_max;
        in.bound_jacobian = estimate_lipschitz_from_data(pilot, c.safety_factor);
        res.lipschitz = lipschitz_nonlinear(in);
        desc["mode"] = "estimate";
        desc["pilot_states"] = c.estimate_samples;
        desc["safety_factor"] = c.safety_factor;
        desc["bound_f"] = *in.bound_f;
        desc["bound_jacobian"] = *in.bound_jacobian;
        break;
      }
    }
    res.lipschitz_inputs = std::move(desc);
  }

  SampleSpec spec{c.epsilon, c.beta, res.n, res.r, res.lipschitz};
  res.epsilon_bar = spec.epsilon_bar();
  res.min_samples = min_samples(spec);
  if (!c.epsilon_grid.empty() && !c.beta_grid.empty())
    res.surface = data_requirement_surface(spec, c.epsilon_grid, c.beta_grid);
  return res;
}

Pipeline::Pipeline(RunConfig config, std::filesystem::path out_dir, std::ostream& log)
    : config_(std::move(config)), out_(std::move(out_dir)), log_(log) {
  std::error_code ec;
  std::filesystem::create_directories(out_, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create output directory '" + out_.string() + "'");
  system_ = make_system(config_);
}

std::filesystem::path Pipeline::path(const std::string& file) const { return out_ / file; }

void Pipeline::record(std::string name, json summary, double seconds) {
  stages_.push_back({std::move(name), std::move(summary), seconds});
}

const FiniteAbstraction& Pipeline::abstraction() {
  if (abstraction_) return *abstraction_;
  const auto start = Clock::now();
  Grid grid(StateBox(config_.state_lower, config_.state_upper), config_.delta);
  abstraction_ = build_abstraction(*system_, grid, InputSet(config_.inputs));
  const auto& abs = *abstraction_;
  {
    auto f = open_out(path("transitions.csv"));
    write_transitions_csv(f, abs);
    auto j = open_out(path("abstraction.json"));
    write_abstraction_json(j, abs);
  }
  std::size_t to_sink = 0;
  for (auto s : abs.transitions()) to_sink += s == abs.out_state() ? 1 : 0;
  log_ << "abstract: " << abs.num_states() << " cells x " << abs.num_inputs() << " inputs, "
       << abs.transitions().size() << " transitions (" << to_sink << " leave the box)\n";
  record("abstract",
         {{"artifacts", {{"transitions", "transitions.csv"}, {"abstraction", "abstraction.json"}}},
          {"cells_per_dim", grid.cells_per_dim()},
          {"delta", grid.delta()},
          {"num_states", abs.num_states()},
          {"num_inputs", abs.num_inputs()},
          {"transitions_to_sink", to_sink}},
         seconds_since(start));
  return abs;
}

const ComplexityResult& Pipeline::complexity() {
  if (complexity_) return *complexity_;
  const auto start = Clock::now();
  complexity_ = compute_complexity(config_, *system_);
  const auto& cx = *complexity_;
  json summary = {{"artifacts", json::object()},
                  {"n", cx.n},
                  {"r", cx.r},
                  {"l", cx.lipschitz.size()},
                  {"epsilon", config_.epsilon},
                  {"beta", config_.beta},
                  {"lipschitz", cx.lipschitz},
                  {"lipschitz_inputs", cx.lipschitz_inputs},
                  {"epsilon_bar", cx.epsilon_bar},
                  {"min_samples", cx.min_samples}};
  log_ << "complexity: N = " << cx.min_samples << " (n = " << cx.n << ", r = " << cx.r
       << ", l = " << cx.lipschitz.size() << ", I_phi = " << brief(cx.lipschitz, " ")
       << ")\n";
  if (config_.reference_n) {
    const double ref = *config_.reference_n;
    const double delta = static_cast<double>(cx.min_samples) - ref;
    const double rel = delta / ref;
    summary["reference_n"] = ref;
    summary["reference_delta"] = delta;
    summary["reference_relative_delta"] = rel;
    summary["reference_agreement"] = std::abs(rel) <= 0.10 ? "within 10%" : "discrepancy";
    log_ << "complexity: reference " << static_cast<long long>(ref) << ", delta "
         << static_cast<long long>(delta)
         << " (" << brief(100.0 * rel) << "%)\n";
  }
  {
    auto f = open_out(path("complexity.json"));
    json j = summary;
    j.erase("artifacts");
    f << j.dump(2) << '\n';
    summary["artifacts"]["complexity"] = "complexity.json";
  }
  if (!cx.surface.empty()) {
    auto f = open_out(path("surface.csv"));
    write_surface_csv(f, cx.surface);
    auto s = open_out(path("surface.json"));
    write_surface_sidecar(s, config_.epsilon_grid, config_.beta_grid);
    summary["artifacts"]["surface"] = "surface.csv";
    summary["artifacts"]["surface_sidecar"] = "surface.json";
  }
  record("complexity", std::move(summary), seconds_since(start));
  return cx;
}

const CertifyResult& Pipeline::certify() {
  if (certify_) return *certify_;
  const FiniteAbstraction& abs = abstraction();
  const ComplexityResult& cx = complexity();
  const auto start = Clock::now();
  CertifyResult res;
  res.samples = config_.samples.value_or(cx.min_samples);
  if (res.samples < cx.min_samples)
    fail(ErrorCode::kConfig, "scenario.samples = " + std::to_string(res.samples) +
                                 " is below the required N = " + std::to_string(cx.min_samples));
  if (config_.profile == "paper")
    log_ << "certify: paper profile, collecting " << res.samples
         << " states; this run is long\n";

  const StateBox box(config_.state_lower, config_.state_upper);
  auto data = collect_dataset(*system_, box, abs.inputs(), res.samples,
                              stage_seed(config_.seed, kDatasetStream));
  {
    auto f = open_out(path("dataset.csv"));
    write_dataset_csv(f, data);
  }
  ScenarioProblem problem(make_template(config_), data, abs, config_.gamma_tilde,
                          config_.rho_tilde, config_.sigma_floor, config_.sigma_upper);
  data.clear();
  data.shrink_to_fit();

  SolverOptions opt = config_.solver;
  std::ofstream trace;
  if (config_.trace) {
    trace = open_out(path("working_set.log"));
    opt.trace = &trace;
  }
  res.report = solve_sop(problem, opt);
  VerdictInputs in{config_.epsilon, config_.beta, config_.psi, config_.gamma_target,
                   res.samples, cx.lipschitz};
  res.verdict = verdict(res.report, problem, in);

  json artifacts = {{"dataset", "dataset.csv"}, {"solve_report", "solve_report.json"}};
  {
    auto f = open_out(path("solve_report.json"));
    write_solve_report_json(f, res.report);
  }
  if (res.verdict.certificate) {
    auto f = open_out(path("certificate.json"));
    write_certificate_json(f, *res.verdict.certificate);
    artifacts["certificate"] = "certificate.json";
  } else {
    auto f = open_out(path("rejection.json"));
    f << json{{"mu_star", res.report.mu_star},
              {"max_epsilon", *std::max_element(config_.epsilon.begin(), config_.epsilon.end())},
              {"slack", res.verdict.slack}}
             .dump(2)
      << '\n';
    artifacts["rejection"] = "rejection.json";
  }
  if (config_.trace) artifacts["working_set_log"] = "working_set.log";

  json summary = {{"artifacts", artifacts},
                  {"samples", res.samples},
                  {"distinct_states", problem.distinct_states().size()},
                  {"constraints_total", res.report.constraints_total},
                  {"constraints_working", res.report.constraints_working},
                  {"constraints_active", res.report.constraints_active},
                  {"mu_star", res.report.mu_star},
                  {"gamma_tilde", res.report.gamma_tilde},
                  {"sigma", res.report.sigma},
                  {"eta", res.report.eta},
                  {"rho_tilde", res.report.rho_tilde},
                  {"slack", res.verdict.slack},
                  {"certified", res.verdict.certified},
                  {"confidence", res.verdict.confidence}};
  log_ << "certify: " << res.samples << " states, " << res.report.constraints_total
       << " constraints (" << res.report.constraints_working << " in the working set)\n";
  log_ << "certify: mu* = " << brief(res.report.mu_star)
       << ", slack = " << brief(res.verdict.slack) << " -> "
       << (res.verdict.certified ? "certified" : "rejected");
  if (res.verdict.certificate) {
    const auto& cert = *res.verdict.certificate;
    summary["gamma"] = cert.gamma;
    summary["rho"] = cert.rho;
    summary["psi"] = cert.psi;
    summary["epsilon_tilde"] = cert.epsilon_tilde;
    log_ << " (confidence " << brief(cert.confidence) << ", gamma "
         << brief(cert.gamma) << ", rho " << brief(cert.rho)
         << ", epsilon_tilde " << brief(cert.epsilon_tilde) << ")";
  }
  log_ << '\n';
  record("certify", std::move(summary), seconds_since(start));
  certify_ = std::move(res);
  return *certify_;
}

const SynthesisResult& Pipeline::synthesize() {
  if (synthesis_) return *synthesis_;
  const FiniteAbstraction& abs = abstraction();
  const auto start = Clock::now();
  SynthesisResult res;

  double margin = 0.0;
  if (config_.deflate) {
    std::optional<AbfCertificate> cert;
    if (certify_ && certify_->verdict.certificate) {
      cert = certify_->verdict.certificate;
    } else {
      std::ifstream f(path("certificate.json"));
      if (!f)
        fail(ErrorCode::kConfig,
             "synthesis.deflate needs a certificate; run certify first or disable deflation");
      cert = read_certificate_json(f);
    }
    margin = cert->epsilon_tilde;
  }
  const auto safe = safe_cells(abs.grid(), config_.safe_lower, config_.safe_upper, margin);
  res.safe_cells = safe.size();
  res.controller = max_invariant_set(abs, safe);

  json artifacts = {{"controller", "controller.csv"}};
  {
    auto f = open_out(path("controller.csv"));
    write_controller_csv(f, res.controller);
  }
  log_ << "synthesize: " << res.controller.winning_count() << " of " << safe.size()
       << " safe cells are winning (" << res.controller.iterations() << " rounds)\n";

  if (!res.controller.empty()) {
    std::vector<Vector> starts = config_.x0;
    std::mt19937_64 rng(stage_seed(config_.seed, kStartStream));
    const auto winning = res.controller.winning_set();
    std::uniform_int_distribution<std::size_t> pick(0, winning.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t s = 0; s < config_.random_starts; ++s) {
      Vector x = abs.grid().representative(winning[pick(rng)]);
      for (std::size_t i = 0; i < x.size(); ++i)
        x[i] += (unit(rng) - 0.5) * abs.grid().spacing(i);
      starts.push_back(std::move(x));
    }
    const StateBox safe_box(config_.safe_lower, config_.safe_upper);
    json series = json::array();
    for (std::size_t s = 0; s < starts.size(); ++s) {
      Trajectory t = simulate_closed_loop(*system_, res.controller, abs, starts[s],
                                          config_.horizon);
      const bool inside = t.length() == config_.horizon &&
                          std::all_of(t.states.begin(), t.states.end(),
                                      [&](const Vector& x) { return safe_box.contains(x); });
      res.contained += inside ? 1 : 0;
      std::string name = std::to_string(s);
      name = "trajectory_" + std::string(name.size() < 3 ? 3 - name.size() : 0, '0') + name + ".csv";
      {
        auto f = open_out(path(name));
        write_trajectory_csv(f, t);
      }
      json events = json::array();
      for (const auto& e : t.events) events.push_back({{"step", e.step}, {"kind", e.kind}});
      std::vector<std::string> columns;
      for (std::size_t i = 0; i < config_.dimension; ++i) columns.push_back("x_" + std::to_string(i));
      series.push_back({{"file", name},
                        {"label", "x0 = " + vec_text(starts[s])},
                        {"source", s < config_.x0.size() ? "config" : "random winning cell"},
                        {"time", "t"},
                        {"states", columns},
                        {"input", "input_index"},
                        {"length", t.length()},
                        {"contained", inside},
                        {"events", events}});
      if (s < config_.x0.size()) {
        log_ << "synthesize: x0 = " << vec_text(starts[s]) << ": " << t.length() << " steps, "
             << (inside ? "stays in the safe box" : "not contained");
        for (const auto& e : t.events) log_ << ", " << e.kind << " at step " << e.step;
        log_ << '\n';
      }
      res.trajectories.push_back(std::move(t));
    }
    json manifest = {{"series", series},
                     {"safe_box", {{"lower", config_.safe_lower}, {"upper", config_.safe_upper}}},
                     {"inputs", config_.inputs},
                     {"horizon", config_.horizon}};
    auto f = open_out(path("plot_manifest.json"));
    f << manifest.dump(2) << '\n';
    artifacts["plot_manifest"] = "plot_manifest.json";
    log_ << "synthesize: " << res.contained << " of " << starts.size()
         << " closed-loop runs stay in the safe box for " << config_.horizon << " steps\n";
  }

  record("synthesize",
         {{"artifacts", artifacts},
          {"safe_cells", res.safe_cells},
          {"safe_margin", margin},
          {"winning_cells", res.controller.winning_count()},
          {"fixed_point_rounds", res.controller.iterations()},
          {"trajectories", res.trajectories.size()},
          {"contained", res.contained}},
         seconds_since(start));
  synthesis_ = std::move(res);
  return *synthesis_;
}

json Pipeline::report() const {
  json stages = json::array();
  for (const auto& s : stages_) {
    json entry = s.summary;
    entry["stage"] = s.name;
    stages.push_back(std::move(entry));
  }
  json j = {{"command", command_},
            {"profile", config_.profile},
            {"system", config_.system},
            {"seed", config_.seed},
            {"config", config_.resolved},
            {"stages", stages}};
  if (certify_) j["certified"] = certify_->verdict.certified;
  if (synthesis_) j["synthesized"] = !synthesis_->controller.empty();
  return j;
}

json Pipeline::timings() const {
  json j = json::array();
  for (const auto& s : stages_) j.push_back({{"stage", s.name}, {"seconds", s.seconds}});
  return j;
}

void Pipeline::write_reports(const std::string& command) const {
  command_ = command;
  {
    auto f = open_out(path("report.json"));
    f << report().dump(2) << '\n';
  }
  auto f = open_out(path("timings.json"));
  f << timings().dump(2) << '\n';
}

}  // namespace abfkit
