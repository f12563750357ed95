#include "abfkit/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_set>

#include "json.hpp"

#include "abfkit/error.hpp"
#include "abfkit/format.hpp"
#include "abfkit/lp.hpp"
#include "abfkit/parallel.hpp"

namespace abfkit {

using nlohmann::json;

ScenarioProblem::ScenarioProblem(AbfTemplate tmpl, std::span<const SamplePair> dataset,
                                 FiniteAbstraction abstraction, Vector gamma_tilde_set,
                                 RhoTilde rho, double sigma_floor, double sigma_upper)
    : tmpl_(std::move(tmpl)),
      abstraction_(std::move(abstraction)),
      gamma_tilde_set_(std::move(gamma_tilde_set)),
      rho_(rho),
      sigma_floor_(sigma_floor),
      sigma_upper_(sigma_upper) {
  const std::size_t n = abstraction_.grid().dimension();
  require(!dataset.empty(), ErrorCode::kInvalidArgument, "scenario dataset is empty");
  require(tmpl_.dimension() == n, ErrorCode::kInvalidArgument,
          "template dimension does not match the abstraction");
  require(!gamma_tilde_set_.empty(), ErrorCode::kInvalidArgument, "gamma_tilde set is empty");
  for (double g : gamma_tilde_set_)
    require(g > 0.0 && g < 1.0, ErrorCode::kInvalidArgument,
            "gamma_tilde candidates must lie in (0, 1)");
  require(sigma_floor_ > 0.0 && sigma_upper_ >= sigma_floor_, ErrorCode::kInvalidArgument,
          "sigma bounds must satisfy 0 < floor <= upper");
  if (rho_.free) {
    require(std::isfinite(rho_.upper) && rho_.upper >= 0.0, ErrorCode::kTemplate,
            "a free rho_tilde needs a finite upper bound");
  } else {
    require(std::isfinite(rho_.value) && rho_.value >= 0.0, ErrorCode::kInvalidArgument,
            "rho_tilde must be a nonnegative number");
  }

  // Group samples by state (first-appearance order), one successor per input.
  std::map<Vector, std::size_t> index;
  std::vector<std::map<std::size_t, const Vector*>> successors;
  for (const auto& p : dataset) {
    require(p.x.size() == n && p.x_next.size() == n, ErrorCode::kInvalidArgument,
            "sample dimension does not match the abstraction");
    require(p.nu_index < abstraction_.num_inputs(), ErrorCode::kRange,
            "sample input index " + std::to_string(p.nu_index) + " out of range");
    auto [it, inserted] = index.emplace(p.x, states_.size());
    if (inserted) {
      states_.push_back(p.x);
      successors.emplace_back();
    }
    successors[it->second].emplace(p.nu_index, &p.x_next);
  }
  first_pair_.push_back(0);
  for (std::size_t i = 0; i < states_.size(); ++i) {
    for (const auto& [u, next] : successors[i]) pairs_.push_back({i, u, *next});
    first_pair_.push_back(pairs_.size());
  }
  for (StateIndex k = 0; k < abstraction_.num_states(); ++k)
    representatives_.push_back(abstraction_.grid().representative(k));
}

std::vector<std::string> ScenarioProblem::decision_names() const {
  std::vector<std::string> names{"sigma"};
  for (std::size_t j = 0; j < tmpl_.size(); ++j) names.push_back("eta_" + std::to_string(j + 1));
  if (rho_.free) names.push_back("rho_tilde");
  names.push_back("mu");
  return names;
}

std::size_t ScenarioProblem::num_constraints() const {
  const std::size_t K = abstraction_.num_states();
  return states_.size() * K + pairs_.size() * K;
}

std::size_t ScenarioProblem::encode(const ConstraintId& id) const {
  const std::size_t K = abstraction_.num_states();
  require(id.state < states_.size() && id.abstract_state < K, ErrorCode::kRange,
          "constraint id out of range");
  if (id.family == 1) return id.state * K + id.abstract_state;
  require(id.family == 2, ErrorCode::kRange, "constraint family must be 1 or 2");
  for (std::size_t p = first_pair_[id.state]; p < first_pair_[id.state + 1]; ++p)
    if (pairs_[p].input == id.input) return states_.size() * K + p * K + id.abstract_state;
  fail(ErrorCode::kRange, "no sample for state " + std::to_string(id.state) + " and input " +
                              std::to_string(id.input));
}

ConstraintId ScenarioProblem::decode(std::size_t flat) const {
  const std::size_t K = abstraction_.num_states();
  require(flat < num_constraints(), ErrorCode::kRange,
          "constraint id " + std::to_string(flat) + " out of range");
  if (flat < states_.size() * K) return {1, flat / K, flat % K, 0};
  flat -= states_.size() * K;
  const Pair& p = pairs_[flat / K];
  return {2, p.state, flat % K, p.input};
}

void ScenarioProblem::constraint_row(double gamma_tilde, std::size_t flat,
                                     std::span<double> row, double* rhs) const {
  const ConstraintId id = decode(flat);
  require(row.size() == num_decision_variables(), ErrorCode::kInvalidArgument,
          "constraint row has the wrong width");
  const std::size_t z = tmpl_.size();
  std::fill(row.begin(), row.end(), 0.0);
  row.back() = -1.0;
  const Vector& x = states_[id.state];
  const Vector& xh = representatives_[id.abstract_state];
  Vector q(z);
  tmpl_.basis(x, xh, q);
  if (id.family == 1) {
    const double d = distance(x, xh);
    row[0] = d * d;
    for (std::size_t j = 0; j < z; ++j) row[1 + j] = -q[j];
    *rhs = 0.0;
    return;
  }
  const std::size_t K = abstraction_.num_states();
  const Pair& p = pairs_[(flat - states_.size() * K) / K];
  const Vector& xh_next =
      representatives_[abstraction_.nearest_successor(id.abstract_state, p.input)];
  Vector q_next(z);
  tmpl_.basis(p.x_next, xh_next, q_next);
  for (std::size_t j = 0; j < z; ++j) row[1 + j] = q_next[j] - gamma_tilde * q[j];
  if (rho_.free) {
    row[1 + z] = -1.0;
    *rhs = 0.0;
  } else {
    *rhs = rho_.value;
  }
}

double constraint_value(const ScenarioProblem& problem, double gamma_tilde,
                        std::span<const double> decision, const ConstraintId& id) {
  require(decision.size() == problem.num_decision_variables(), ErrorCode::kInvalidArgument,
          "decision vector has the wrong length");
  Vector row(decision.size());
  double rhs = 0.0;
  problem.constraint_row(gamma_tilde, problem.encode(id), row, &rhs);
  double v = -rhs;
  for (std::size_t j = 0; j < row.size(); ++j) v += row[j] * decision[j];
  return v;
}

namespace {

using Scored = std::pair<double, std::size_t>;  // (constraint value, flat id)

bool worse_first(const Scored& a, const Scored& b) {
  return a.first > b.first || (a.first == b.first && a.second < b.second);
}

void keep_top(std::vector<Scored>& v, std::size_t k) {
  if (v.size() <= k) return;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), worse_first);
  v.resize(k);
}

struct ScanResult {
  std::vector<Scored> top;  // sorted, worst first
  double max_value = -HUGE_VAL;
  std::size_t near_zero = 0;  // constraints with value >= -tolerance
};

}  // namespace

/// Streams every constraint value at a fixed decision.
class ScenarioScanner {
 public:
  static ScanResult scan(const ScenarioProblem& p, double gamma_tilde,
                         std::span<const double> decision, double threshold,
                         std::size_t keep, double tolerance, bool parallel) {
    const std::size_t z = p.tmpl_.size();
    const std::size_t K = p.abstraction_.num_states();
    const std::size_t S = p.states_.size();
    const double sigma = decision[0];
    const double mu = decision.back();
    const double rho = p.rho_.free ? decision[1 + z] : p.rho_.value;
    const double* eta = decision.data() + 1;
    auto dot = [&](const Vector& q) {
      double v = 0.0;
      for (std::size_t j = 0; j < z; ++j) v += eta[j] * q[j];
      return v;
    };

    const std::size_t blocks = std::min<std::size_t>(S, 256);
    std::vector<ScanResult> partial(blocks);
    for_each_block(S, blocks, parallel, [&](std::size_t b, std::size_t begin, std::size_t end) {
      ScanResult& out = partial[b];
      Vector q(z), q_next(z);
      auto record = [&](double value, std::size_t id) {
        out.max_value = std::max(out.max_value, value);
        if (value >= -tolerance) ++out.near_zero;
        if (value > threshold) {
          out.top.emplace_back(value, id);
          if (out.top.size() >= 2 * keep + 16) keep_top(out.top, keep);
        }
      };
      for (std::size_t i = begin; i < end; ++i) {
        const Vector& x = p.states_[i];
        for (std::size_t k = 0; k < K; ++k) {
          const Vector& xh = p.representatives_[k];
          p.tmpl_.basis(x, xh, q);
          const double V = dot(q);
          double d2 = 0.0;
          for (std::size_t c = 0; c < x.size(); ++c) d2 += (x[c] - xh[c]) * (x[c] - xh[c]);
          record(sigma * d2 - V - mu, i * K + k);
          for (std::size_t pi = p.first_pair_[i]; pi < p.first_pair_[i + 1]; ++pi) {
            const auto& pair = p.pairs_[pi];
            const Vector& xh_next =
                p.representatives_[p.abstraction_.nearest_successor(k, pair.input)];
            p.tmpl_.basis(pair.x_next, xh_next, q_next);
            record(dot(q_next) - gamma_tilde * V - rho - mu, S * K + pi * K + k);
          }
        }
      }
      keep_top(out.top, keep);
    });

    ScanResult merged;
    for (auto& part : partial) {
      merged.max_value = std::max(merged.max_value, part.max_value);
      merged.near_zero += part.near_zero;
      merged.top.insert(merged.top.end(), part.top.begin(), part.top.end());
    }
    keep_top(merged.top, keep);
    std::sort(merged.top.begin(), merged.top.end(), worse_first);
    if (!std::isfinite(merged.max_value))
      fail(ErrorCode::kNumeric, "a scenario constraint evaluated to a non-finite value");
    return merged;
  }
};

namespace {

struct WorkingSet {
  std::vector<std::size_t> ids;
  std::vector<Vector> rows;
  Vector rhs;
  std::unordered_set<std::size_t> members;

  bool add(const ScenarioProblem& p, double gamma_tilde, std::size_t id) {
    if (!members.insert(id).second) return false;
    Vector row(p.num_decision_variables());
    double h = 0.0;
    p.constraint_row(gamma_tilde, id, row, &h);
    ids.push_back(id);
    rows.push_back(std::move(row));
    rhs.push_back(h);
    return true;
  }
};

lp::Problem base_program(const ScenarioProblem& p) {
  const std::size_t D = p.num_decision_variables();
  const std::size_t z = p.tmpl().size();
  lp::Problem prog(D);
  prog.names = p.decision_names();
  prog.lower[0] = p.sigma_floor();
  prog.upper[0] = p.sigma_upper();
  for (std::size_t j = 0; j < z; ++j) {
    prog.lower[1 + j] = p.tmpl().lower()[j];
    prog.upper[1 + j] = p.tmpl().upper()[j];
  }
  if (p.rho().free) {
    prog.lower[1 + z] = 0.0;
    prog.upper[1 + z] = p.rho().upper;
  }
  for (const auto& c : p.tmpl().coefficient_constraints()) {
    Vector row(D, 0.0);
    std::copy(c.coefficients.begin(), c.coefficients.end(), row.begin() + 1);
    prog.add_row(std::move(row), c.rhs, c.label);
  }
  return prog;
}

Vector seed_decision(const ScenarioProblem& p) {
  const std::size_t z = p.tmpl().size();
  Vector d(p.num_decision_variables(), 0.0);
  d[0] = std::isfinite(p.sigma_upper()) ? 0.5 * (p.sigma_floor() + p.sigma_upper())
                                        : p.sigma_floor();
  for (std::size_t j = 0; j < z; ++j) {
    const double lo = p.tmpl().lower()[j], hi = p.tmpl().upper()[j];
    d[1 + j] = std::isfinite(lo) && std::isfinite(hi) ? 0.5 * (lo + hi) : std::clamp(0.0, lo, hi);
  }
  if (p.rho().free) d[1 + z] = 0.5 * p.rho().upper;
  return d;
}

struct StageResult {
  lp::Status status = lp::Status::kOptimal;
  Vector decision;
  std::size_t rounds = 0;
};

// Constraint generation: solve over the working set, admit the worst
// violators of the full set, repeat until none exceeds the tolerance.
StageResult run_stage(const ScenarioProblem& p, double gamma_tilde, const lp::Problem& base,
                      WorkingSet& ws, const SolverOptions& opt, const char* stage) {
  StageResult res;
  for (std::size_t round = 0; round < opt.max_rounds; ++round) {
    lp::Problem prog = base;
    for (std::size_t r = 0; r < ws.ids.size(); ++r)
      prog.add_row(ws.rows[r], ws.rhs[r], "constraint " + std::to_string(ws.ids[r]));
    lp::Result sol = lp::solve(prog);
    res.rounds = round + 1;
    if (sol.status != lp::Status::kOptimal) {
      res.status = sol.status;
      return res;
    }
    res.decision = sol.x;
    ScanResult scan = ScenarioScanner::scan(p, gamma_tilde, sol.x, opt.tolerance, opt.batch,
                                            opt.tolerance, opt.parallel);
    if (opt.trace) {
      *opt.trace << stage << " gamma_tilde=" << format_double(gamma_tilde)
                 << " round=" << round << " working=" << ws.ids.size()
                 << " mu=" << format_double(sol.x.back())
                 << " max_violation=" << format_double(scan.max_value) << '\n';
    }
    std::size_t added = 0;
    for (const auto& [value, id] : scan.top) added += ws.add(p, gamma_tilde, id) ? 1 : 0;
    if (added == 0) return res;
  }
  res.status = lp::Status::kIterationLimit;
  return res;
}

}  // namespace

SolveReport solve_sop(const ScenarioProblem& problem, const SolverOptions& options) {
  require(options.batch >= 1, ErrorCode::kInvalidArgument, "batch size must be >= 1");
  const lp::Problem base = base_program(problem);
  const std::size_t D = problem.num_decision_variables();

  {
    lp::Problem feasibility = base;
    feasibility.objective.assign(D, 0.0);
    lp::Result check = lp::solve(feasibility);
    if (check.status == lp::Status::kInfeasible) {
      std::string names;
      for (const auto& c : check.conflict) names += (names.empty() ? "" : ", ") + c;
      fail(ErrorCode::kInfeasible, "coefficient constraints admit no point; binding: " + names);
    }
  }

  lp::Problem minimize_mu = base;
  minimize_mu.objective[D - 1] = 1.0;
  const Vector seed = seed_decision(problem);

  const Vector& gammas = problem.gamma_tilde_set();
  std::vector<std::size_t> order(gammas.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gammas[a] < gammas[b]; });

  SolveReport report;
  report.constraints_total = problem.num_constraints();
  report.decision_variables = D;
  report.candidates.resize(gammas.size());
  std::optional<std::size_t> best;
  std::vector<WorkingSet> sets(gammas.size());
  std::vector<Vector> decisions(gammas.size());

  for (std::size_t k : order) {
    const double g = gammas[k];
    ScanResult initial = ScenarioScanner::scan(problem, g, seed, -HUGE_VAL, options.batch,
                                               options.tolerance, options.parallel);
    for (const auto& [value, id] : initial.top) sets[k].add(problem, g, id);
    StageResult stage = run_stage(problem, g, minimize_mu, sets[k], options, "min-mu");
    if (stage.status == lp::Status::kUnbounded)
      fail(ErrorCode::kTemplate,
           "scenario program is unbounded: give sigma > 0 and a finite box for every "
           "coefficient");
    if (stage.status == lp::Status::kInfeasible)
      fail(ErrorCode::kInfeasible, "scenario program became infeasible at gamma_tilde = " +
                                       format_double(g));
    if (stage.status == lp::Status::kIterationLimit)
      fail(ErrorCode::kNumeric, "LP iteration limit reached at gamma_tilde = " +
                                    format_double(g));
    decisions[k] = stage.decision;
    report.candidates[k] = {g, stage.decision.back(), stage.rounds, sets[k].ids.size()};
    if (!best || stage.decision.back() < report.candidates[*best].mu) best = k;
  }

  const std::size_t k = *best;
  const double g = gammas[k];
  Vector decision = decisions[k];
  if (options.maximize_sigma) {
    lp::Problem widen = base;
    widen.objective[0] = -1.0;
    widen.upper[D - 1] = decision.back();
    WorkingSet ws = sets[k];
    StageResult stage = run_stage(problem, g, widen, ws, options, "max-sigma");
    // An unbounded or numerically infeasible second stage keeps the first.
    if (stage.status == lp::Status::kOptimal) {
      decision = stage.decision;
      sets[k] = std::move(ws);
    }
  }

  const ScanResult final_scan = ScenarioScanner::scan(problem, g, decision, HUGE_VAL, 1,
                                                      options.tolerance, options.parallel);
  const std::size_t z = problem.tmpl().size();
  report.best_k = k;
  report.gamma_tilde = g;
  report.sigma = decision[0];
  report.eta.assign(decision.begin() + 1, decision.begin() + 1 + static_cast<std::ptrdiff_t>(z));
  report.rho_tilde = problem.rho().free ? decision[1 + z] : problem.rho().value;
  report.mu_star = decision.back() + final_scan.max_value;
  report.constraints_working = sets[k].ids.size();
  report.constraints_active = final_scan.near_zero;
  return report;
}

Verdict verdict(const SolveReport& report, const ScenarioProblem& problem,
                const VerdictInputs& inputs) {
  require(inputs.epsilon.size() == problem.gamma_tilde_set().size(),
          ErrorCode::kInvalidArgument, "need one epsilon per gamma_tilde candidate");
  Verdict v;
  v.epsilon_used = inputs.epsilon;
  const double max_eps = *std::max_element(inputs.epsilon.begin(), inputs.epsilon.end());
  v.slack = report.mu_star + max_eps;
  v.certified = v.slack <= 0.0;
  if (!v.certified) return v;
  v.confidence = 1.0 - inputs.beta;
  const double psi =
      inputs.psi ? *inputs.psi : psi_for_gamma(inputs.gamma_target, report.gamma_tilde);
  ScenarioRecord record{inputs.samples,
                        inputs.epsilon,
                        inputs.beta,
                        report.mu_star,
                        problem.gamma_tilde_set(),
                        report.decision_variables,
                        report.constraints_total,
                        inputs.lipschitz};
  v.certificate = make_certificate(problem.tmpl(), report.eta, report.sigma, report.gamma_tilde,
                                   report.rho_tilde, psi, v.confidence, std::move(record));
  return v;
}

void write_solve_report_json(std::ostream& out, const SolveReport& r) {
  json candidates = json::array();
  for (const auto& c : r.candidates)
    candidates.push_back({{"gamma_tilde", c.gamma_tilde},
                          {"mu", c.mu},
                          {"rounds", c.rounds},
                          {"working_set", c.working_set}});
  json j = {{"mu_star", r.mu_star},
            {"best_k", r.best_k},
            {"gamma_tilde", r.gamma_tilde},
            {"sigma", r.sigma},
            {"eta", r.eta},
            {"rho_tilde", r.rho_tilde},
            {"constraints_total", r.constraints_total},
            {"constraints_working", r.constraints_working},
            {"constraints_active", r.constraints_active},
            {"decision_variables", r.decision_variables},
            {"candidates", candidates}};
  out << j.dump(2) << '\n';
}

SolveReport read_solve_report_json(std::istream& in) {
  try {
    json j;
    in >> j;
    SolveReport r;
    r.mu_star = j.at("mu_star").get<double>();
    r.best_k = j.at("best_k").get<std::size_t>();
    r.gamma_tilde = j.at("gamma_tilde").get<double>();
    r.sigma = j.at("sigma").get<double>();
    r.eta = j.at("eta").get<Vector>();
    r.rho_tilde = j.at("rho_tilde").get<double>();
    r.constraints_total = j.at("constraints_total").get<std::size_t>();
    r.constraints_working = j.at("constraints_working").get<std::size_t>();
    r.constraints_active = j.at("constraints_active").get<std::size_t>();
    r.decision_variables = j.at("decision_variables").get<std::size_t>();
    for (const auto& c : j.at("candidates"))
      r.candidates.push_back({c.at("gamma_tilde").get<double>(), c.at("mu").get<double>(),
                              c.at("rounds").get<std::size_t>(),
                              c.at("working_set").get<std::size_t>()});
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, std::string("malformed solve report: ") + e.what());
  }
}

}  // namespace abfkit
