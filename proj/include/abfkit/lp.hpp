#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "abfkit/systems.hpp"

namespace abfkit::lp {

/// min c.x  s.t.  a_r . x <= b_r,  lower <= x <= upper.
///
/// Infinite bounds are allowed. Intended for problems with few variables and
/// many rows: the solver runs a two-phase tableau simplex with Bland's rule
/// on the dual, whose tableau has one row per variable.
struct Problem {
  struct Row {
    Vector coefficients;
    double rhs = 0.0;
    std::string label;
  };

  Vector objective;
  Vector lower;
  Vector upper;
  std::vector<Row> rows;
  /// Optional variable names used in bound labels ("upper bound of <name>").
  std::vector<std::string> names;

  explicit Problem(std::size_t num_vars = 0);
  std::size_t num_vars() const { return objective.size(); }
  void add_row(Vector coefficients, double rhs, std::string label = {});
};

enum class Status { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

std::string to_string(Status status);

struct Result {
  Status status = Status::kIterationLimit;
  Vector x;
  double objective = 0.0;
  std::size_t pivots = 0;
  /// For kInfeasible: labels of the rows and bounds in an infeasible
  /// subsystem (a Farkas certificate's support).
  std::vector<std::string> conflict;
};

Result solve(const Problem& problem);

}  // namespace abfkit::lp
