#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "abfkit/systems.hpp"

namespace abfkit {

using StateIndex = std::size_t;
using InputIndex = std::size_t;

/// Uniform partition of a state box into cells with centre representatives.
///
/// `delta` bounds the cell diameter. Cells are numbered with dimension 0
/// varying fastest.
class Grid {
 public:
  /// Picks the coarsest uniform spacing h with h * sqrt(n) <= delta.
  Grid(StateBox box, double delta);
  Grid(StateBox box, std::vector<std::size_t> cells_per_dim);

  const StateBox& box() const { return box_; }
  const std::vector<std::size_t>& cells_per_dim() const { return cells_; }
  double delta() const { return delta_; }
  std::size_t dimension() const { return box_.dimension(); }
  std::size_t size() const { return size_; }
  double spacing(std::size_t i) const { return spacing_[i]; }

  /// Index of the cell containing x. Points on a shared face go to the cell
  /// with the lower multi-index. Throws kOutOfDomain outside the box.
  StateIndex quantize(std::span<const double> x) const;

  /// Index of the cell whose centre is nearest to x; defined for any x.
  StateIndex nearest(std::span<const double> x) const;

  /// Centre of cell `index`; throws kRange for an invalid index.
  Vector representative(StateIndex index) const;

  std::vector<std::size_t> multi_index(StateIndex index) const;
  StateIndex flat_index(std::span<const std::size_t> multi) const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  void init();

  StateBox box_;
  std::vector<std::size_t> cells_;
  double delta_ = 0.0;
  Vector spacing_;
  std::size_t size_ = 0;
};

/// Finite abstraction (X^, U, f^) with a deterministic transition table.
///
/// Successors that leave the box go to an absorbing sink with index
/// `out_state()` (== number of grid cells). `nearest_successor` keeps, for the
/// same entry, the grid cell nearest to the observed successor; it never
/// names the sink.
class FiniteAbstraction {
 public:
  FiniteAbstraction(Grid grid, InputSet inputs,
                    std::vector<StateIndex> transitions,
                    std::vector<StateIndex> nearest);

  const Grid& grid() const { return grid_; }
  const InputSet& inputs() const { return inputs_; }
  std::size_t num_states() const { return grid_.size(); }
  std::size_t num_inputs() const { return inputs_.size(); }
  StateIndex out_state() const { return grid_.size(); }

  StateIndex successor(StateIndex state, InputIndex input) const {
    return transitions_[state * num_inputs() + input];
  }
  StateIndex nearest_successor(StateIndex state, InputIndex input) const {
    return nearest_[state * num_inputs() + input];
  }
  const std::vector<StateIndex>& transitions() const { return transitions_; }
  const std::vector<StateIndex>& nearest_transitions() const { return nearest_; }

 private:
  Grid grid_;
  InputSet inputs_;
  std::vector<StateIndex> transitions_;
  std::vector<StateIndex> nearest_;
};

/// Queries the oracle once at every (representative, input) pair.
FiniteAbstraction build_abstraction(const BlackBoxSystem& system, const Grid& grid,
                                    const InputSet& inputs);

/// `state_index,input_index,next_index` rows; the sink appears as out_state().
void write_transitions_csv(std::ostream& out, const FiniteAbstraction& abs);
/// Grid geometry and inputs, as consumed by `read_abstraction`.
void write_abstraction_json(std::ostream& out, const FiniteAbstraction& abs);
FiniteAbstraction read_abstraction(std::istream& json_sidecar,
                                   std::istream& transitions_csv);

}  // namespace abfkit
