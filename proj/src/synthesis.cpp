#include "abfkit/synthesis.hpp"

#include <ostream>

#include "abfkit/error.hpp"
#include "abfkit/format.hpp"
#include "abfkit/parallel.hpp"

namespace abfkit {

SafetyController::SafetyController(std::size_t num_states, std::vector<InputIndex> policy,
                                   std::size_t iterations)
    : policy_(std::move(policy)), iterations_(iterations) {
  require(policy_.size() == num_states, ErrorCode::kInvalidArgument,
          "policy size does not match the number of states");
  for (InputIndex u : policy_) winning_count_ += u != kNone ? 1 : 0;
}

std::vector<StateIndex> SafetyController::winning_set() const {
  std::vector<StateIndex> out;
  for (StateIndex k = 0; k < policy_.size(); ++k)
    if (policy_[k] != kNone) out.push_back(k);
  return out;
}

SafetyController max_invariant_set(const FiniteAbstraction& abs,
                                   std::span<const StateIndex> safe) {
  const std::size_t K = abs.num_states();
  const std::size_t m = abs.num_inputs();
  std::vector<char> in_w(K, 0);
  for (StateIndex k : safe) {
    require(k < K, ErrorCode::kInvalidArgument,
            "safe set names state " + std::to_string(k) + ", which is the sink or out of range");
    in_w[k] = 1;
  }

  std::vector<char> next(K, 0);
  std::size_t rounds = 0;
  while (true) {
    ++rounds;
    for_each_block(K, 64, true, [&](std::size_t, std::size_t begin, std::size_t end) {
      for (StateIndex k = begin; k < end; ++k) {
        char keep = 0;
        if (in_w[k]) {
          for (InputIndex u = 0; u < m && !keep; ++u) {
            const StateIndex s = abs.successor(k, u);
            keep = s < K && in_w[s];
          }
        }
        next[k] = keep;
      }
    });
    if (next == in_w) break;
    in_w.swap(next);
  }

  std::vector<InputIndex> policy(K, SafetyController::kNone);
  for (StateIndex k = 0; k < K; ++k) {
    if (!in_w[k]) continue;
    for (InputIndex u = 0; u < m; ++u) {
      const StateIndex s = abs.successor(k, u);
      if (s < K && in_w[s]) {
        policy[k] = u;
        break;
      }
    }
  }
  return SafetyController(K, std::move(policy), rounds);
}

std::vector<StateIndex> safe_cells(const Grid& grid, std::span<const double> lower,
                                   std::span<const double> upper, double margin) {
  const std::size_t n = grid.dimension();
  require(lower.size() == n && upper.size() == n, ErrorCode::kInvalidArgument,
          "safe box has the wrong dimension");
  require(margin >= 0.0, ErrorCode::kInvalidArgument, "safe-box margin must be >= 0");
  std::vector<StateIndex> out;
  for (StateIndex k = 0; k < grid.size(); ++k) {
    const Vector c = grid.representative(k);
    bool inside = true;
    for (std::size_t i = 0; i < n && inside; ++i) {
      const double h = 0.5 * grid.spacing(i);
      const double slack = 1e-12 * grid.box().width(i);  // absorbs rounding of the centre
      inside = c[i] - h >= lower[i] + margin - slack && c[i] + h <= upper[i] - margin + slack;
    }
    if (inside) out.push_back(k);
  }
  return out;
}

std::optional<InputIndex> refine(const SafetyController& controller, const Grid& grid,
                                 std::span<const double> x) {
  const StateIndex k = grid.quantize(x);
  if (!controller.is_winning(k)) return std::nullopt;
  return controller.input(k);
}

Trajectory simulate_closed_loop(const BlackBoxSystem& system,
                                const SafetyController& controller,
                                const FiniteAbstraction& abs, std::span<const double> x0,
                                std::size_t horizon) {
  require(horizon >= 1, ErrorCode::kInvalidArgument, "horizon must be >= 1");
  require(controller.num_states() == abs.num_states(), ErrorCode::kInvalidArgument,
          "controller does not belong to this abstraction");
  Trajectory traj;
  traj.horizon = horizon;
  traj.states.emplace_back(x0.begin(), x0.end());
  for (std::size_t t = 0; t < horizon; ++t) {
    const Vector& x = traj.states.back();
    if (!abs.grid().box().contains(x)) {
      traj.events.push_back({t, "left_domain"});
      break;
    }
    auto u = refine(controller, abs.grid(), x);
    if (!u) {
      traj.events.push_back({t, "no_controller"});
      break;
    }
    traj.inputs.push_back(*u);
    traj.states.push_back(system.step(x, abs.inputs()[*u]));
  }
  return traj;
}

void write_controller_csv(std::ostream& out, const SafetyController& controller) {
  out << "state_index,input_index\n";
  for (StateIndex k : controller.winning_set()) out << k << ',' << controller.input(k) << '\n';
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  const std::size_t n = trajectory.states.front().size();
  out << 't';
  for (std::size_t i = 0; i < n; ++i) out << ",x_" << i;
  out << ",input_index\n";
  for (std::size_t t = 0; t < trajectory.states.size(); ++t) {
    out << t;
    for (double v : trajectory.states[t]) out << ',' << format_double(v);
    out << ',';
    if (t < trajectory.inputs.size()) out << trajectory.inputs[t];
    out << '\n';
  }
}

}  // namespace abfkit
