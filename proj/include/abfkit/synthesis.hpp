#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abfkit/abstraction.hpp"
#include "abfkit/systems.hpp"

namespace abfkit {

/// Memoryless safety controller on a finite abstraction.
class SafetyController {
 public:
  static constexpr InputIndex kNone = static_cast<InputIndex>(-1);

  SafetyController(std::size_t num_states, std::vector<InputIndex> policy,
                   std::size_t iterations);

  std::size_t num_states() const { return policy_.size(); }
  bool is_winning(StateIndex k) const { return k < policy_.size() && policy_[k] != kNone; }
  /// kNone outside the winning set.
  InputIndex input(StateIndex k) const { return k < policy_.size() ? policy_[k] : kNone; }
  std::vector<StateIndex> winning_set() const;
  bool empty() const { return winning_count_ == 0; }
  std::size_t winning_count() const { return winning_count_; }
  /// Fixed-point rounds until stabilization.
  std::size_t iterations() const { return iterations_; }

  friend bool operator==(const SafetyController&, const SafetyController&) = default;

 private:
  std::vector<InputIndex> policy_;
  std::size_t winning_count_ = 0;
  std::size_t iterations_ = 0;
};

/// Greatest fixed point of W -> {k in W : some input keeps k inside W},
/// started from `safe`; each winning state gets its smallest admissible input.
/// An empty result is returned, not thrown. Throws kInvalidArgument when
/// `safe` names the sink or an out-of-range state.
SafetyController max_invariant_set(const FiniteAbstraction& abs,
                                   std::span<const StateIndex> safe);

/// Regular cells lying entirely inside [lower + margin, upper - margin].
std::vector<StateIndex> safe_cells(const Grid& grid, std::span<const double> lower,
                                   std::span<const double> upper, double margin = 0.0);

/// policy(quantize(x)) when that cell is winning. Throws kOutOfDomain when x
/// is outside the grid box.
std::optional<InputIndex> refine(const SafetyController& controller, const Grid& grid,
                                 std::span<const double> x);

struct TrajectoryEvent {
  std::size_t step = 0;
  std::string kind;  // "no_controller" or "left_domain"

  friend bool operator==(const TrajectoryEvent&, const TrajectoryEvent&) = default;
};

struct Trajectory {
  std::vector<Vector> states;        // states.size() == inputs.size() + 1
  std::vector<InputIndex> inputs;
  std::size_t horizon = 0;           // requested number of steps
  std::vector<TrajectoryEvent> events;

  std::size_t length() const { return inputs.size(); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Runs x(t+1) = f(x(t), nu_policy) for up to `horizon` steps, stopping early
/// with an event when no input is defined or the state leaves the box.
Trajectory simulate_closed_loop(const BlackBoxSystem& system,
                                const SafetyController& controller,
                                const FiniteAbstraction& abs, std::span<const double> x0,
                                std::size_t horizon);

void write_controller_csv(std::ostream& out, const SafetyController& controller);
/// `t,x_0..x_{n-1},input_index`; the final state has an empty input.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace abfkit
