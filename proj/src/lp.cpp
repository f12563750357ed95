#include "abfkit/lp.hpp"

#include <algorithm>
#include <cmath>

#include "abfkit/error.hpp"

namespace abfkit::lp {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-11;
constexpr double kTieTol = 1e-13;
constexpr double kFeasTol = 1e-9;

struct ScaledRow {
  Vector a;
  double h;
  const std::string* label;
};

// Dense tableau of the dual  min h.y  s.t.  G^T y = -c, y >= 0,
// one row per primal variable. Columns: y (one per primal row), then one
// artificial per tableau row, then the right-hand side.
class DualTableau {
 public:
  DualTableau(const std::vector<ScaledRow>& rows, const Vector& c)
      : n_(c.size()), m_(rows.size()), width_(m_ + n_ + 1),
        t_(n_ * width_, 0.0), d_(width_, 0.0), basis_(n_), flipped_(n_, false) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t r = 0; r < m_; ++r) at(i, r) = rows[r].a[i];
      at(i, m_ + i) = 1.0;
      at(i, width_ - 1) = -c[i];
      if (-c[i] < 0.0) {
        flipped_[i] = true;
        for (std::size_t j = 0; j < width_; ++j)
          if (j != m_ + i) at(i, j) = -at(i, j);
      }
      basis_[i] = m_ + i;
    }
  }

  double& at(std::size_t i, std::size_t j) { return t_[i * width_ + j]; }
  double at(std::size_t i, std::size_t j) const { return t_[i * width_ + j]; }
  double rhs(std::size_t i) const { return at(i, width_ - 1); }
  bool is_artificial(std::size_t col) const { return col >= m_ && col < m_ + n_; }

  // Reduced costs for column costs `cost` (size m + n) under the current basis.
  void price(const Vector& cost) {
    for (std::size_t j = 0; j < width_; ++j) {
      double v = j + 1 < width_ ? cost[j] : 0.0;
      for (std::size_t i = 0; i < n_; ++i) v -= cost[basis_[i]] * at(i, j);
      d_[j] = v;
    }
  }

  void pivot(std::size_t r, std::size_t s) {
    const double p = at(r, s);
    for (std::size_t j = 0; j < width_; ++j) at(r, j) /= p;
    at(r, s) = 1.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (i == r) continue;
      const double f = at(i, s);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < width_; ++j) at(i, j) -= f * at(r, j);
      at(i, s) = 0.0;
    }
    const double f = d_[s];
    if (f != 0.0) {
      for (std::size_t j = 0; j < width_; ++j) d_[j] -= f * at(r, j);
      d_[s] = 0.0;
    }
    basis_[r] = s;
    ++pivots_;
  }

  enum class Step { kOptimal, kUnbounded, kPivoted };

  // One Bland's-rule iteration over the y columns.
  Step iterate(std::size_t* entering) {
    std::size_t s = m_;
    for (std::size_t j = 0; j < m_; ++j) {
      if (d_[j] < -kCostTol) {
        s = j;
        break;
      }
    }
    if (s == m_) return Step::kOptimal;
    std::size_t r = n_;
    double best = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double a = at(i, s);
      if (a <= kPivotTol) continue;
      const double ratio = std::max(rhs(i), 0.0) / a;
      if (r == n_ || ratio < best - kTieTol ||
          (ratio <= best + kTieTol && basis_[i] < basis_[r])) {
        if (r == n_ || ratio < best - kTieTol) best = ratio;
        r = i;
      }
    }
    *entering = s;
    if (r == n_) return Step::kUnbounded;
    pivot(r, s);
    return Step::kPivoted;
  }

  std::size_t n_, m_, width_;
  Vector t_;
  Vector d_;
  std::vector<std::size_t> basis_;
  std::vector<bool> flipped_;
  std::size_t pivots_ = 0;
};

}  // namespace

Problem::Problem(std::size_t num_vars)
    : objective(num_vars, 0.0),
      lower(num_vars, -HUGE_VAL),
      upper(num_vars, HUGE_VAL) {}

void Problem::add_row(Vector coefficients, double rhs, std::string label) {
  rows.push_back({std::move(coefficients), rhs, std::move(label)});
}

std::string to_string(Status status) {
  switch (status) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kUnbounded: return "unbounded";
    case Status::kIterationLimit: return "iteration-limit";
  }
  return "unknown";
}

Result solve(const Problem& problem) {
  const std::size_t n = problem.num_vars();
  require(n >= 1, ErrorCode::kInvalidArgument, "LP has no variables");
  require(problem.lower.size() == n && problem.upper.size() == n, ErrorCode::kInvalidArgument,
          "LP bound vectors have the wrong size");
  Result result;

  std::vector<std::string> bound_labels;
  bound_labels.reserve(2 * n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::string name =
        j < problem.names.size() ? problem.names[j] : "variable " + std::to_string(j);
    bound_labels.push_back("upper bound of " + name);
    bound_labels.push_back("lower bound of " + name);
  }

  std::vector<ScaledRow> rows;
  rows.reserve(problem.rows.size() + 2 * n);
  auto push = [&](Vector a, double h, const std::string* label) -> bool {
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) {
      if (h < -kFeasTol) {
        result.status = Status::kInfeasible;
        result.conflict = {*label};
        return false;
      }
      return true;
    }
    for (double& v : a) v /= scale;
    rows.push_back({std::move(a), h / scale, label});
    return true;
  };
  for (const auto& row : problem.rows) {
    require(row.coefficients.size() == n, ErrorCode::kInvalidArgument,
            "LP row '" + row.label + "' has the wrong width");
    if (!push(row.coefficients, row.rhs, &row.label)) return result;
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (problem.lower[j] > problem.upper[j]) {
      result.status = Status::kInfeasible;
      result.conflict = {bound_labels[2 * j + 1], bound_labels[2 * j]};
      return result;
    }
    if (std::isfinite(problem.upper[j])) {
      Vector e(n, 0.0);
      e[j] = 1.0;
      push(std::move(e), problem.upper[j], &bound_labels[2 * j]);
    }
    if (std::isfinite(problem.lower[j])) {
      Vector e(n, 0.0);
      e[j] = -1.0;
      push(std::move(e), -problem.lower[j], &bound_labels[2 * j + 1]);
    }
  }

  const std::size_t m = rows.size();
  DualTableau tab(rows, problem.objective);
  const std::size_t limit = 200000 + 100 * (m + n);

  // Phase 1: drive the artificials to zero.
  Vector cost(m + n, 0.0);
  for (std::size_t i = 0; i < n; ++i) cost[m + i] = 1.0;
  tab.price(cost);
  std::size_t entering = 0;
  while (true) {
    if (tab.pivots_ > limit) {
      result.status = Status::kIterationLimit;
      return result;
    }
    if (tab.iterate(&entering) != DualTableau::Step::kPivoted) break;
  }
  double infeasibility = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (tab.is_artificial(tab.basis_[i])) infeasibility += std::abs(tab.rhs(i));
  if (infeasibility > kFeasTol) {
    // The dual is infeasible, so the primal is unbounded or infeasible; a
    // zero-objective solve tells the two apart.
    Problem feasibility = problem;
    std::fill(feasibility.objective.begin(), feasibility.objective.end(), 0.0);
    Result check = solve(feasibility);
    check.pivots += tab.pivots_;
    if (check.status == Status::kOptimal) {
      check.status = Status::kUnbounded;
      check.x.clear();
    }
    return check;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!tab.is_artificial(tab.basis_[i])) continue;
    for (std::size_t j = 0; j < m; ++j) {
      if (std::abs(tab.at(i, j)) > kPivotTol) {
        tab.pivot(i, j);
        break;
      }
    }
  }

  // Phase 2: the row rhs are the column costs of the dual.
  std::fill(cost.begin(), cost.end(), 0.0);
  for (std::size_t r = 0; r < m; ++r) cost[r] = rows[r].h;
  tab.price(cost);
  while (true) {
    if (tab.pivots_ > limit) {
      result.status = Status::kIterationLimit;
      return result;
    }
    auto step = tab.iterate(&entering);
    if (step == DualTableau::Step::kPivoted) continue;
    result.pivots = tab.pivots_;
    if (step == DualTableau::Step::kUnbounded) {
      // Dual ray y = e_s - sum_i T[i][s] e_{B_i}: its support is a Farkas
      // certificate for the primal rows.
      result.status = Status::kInfeasible;
      result.conflict.push_back(*rows[entering].label);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t b = tab.basis_[i];
        if (b < m && -tab.at(i, entering) > kPivotTol) result.conflict.push_back(*rows[b].label);
      }
      std::sort(result.conflict.begin(), result.conflict.end());
      result.conflict.erase(std::unique(result.conflict.begin(), result.conflict.end()),
                            result.conflict.end());
      return result;
    }
    break;
  }

  // Primal values are the dual simplex multipliers, read off the artificial
  // columns' reduced costs.
  result.status = Status::kOptimal;
  result.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = tab.d_[m + i];
    result.x[i] = tab.flipped_[i] ? d : -d;
  }
  result.objective = 0.0;
  for (std::size_t i = 0; i < n; ++i) result.objective += problem.objective[i] * result.x[i];
  return result;
}

}  // namespace abfkit::lp
