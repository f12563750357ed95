#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "abfkit/error.hpp"
#include "abfkit/synthesis.hpp"

using namespace abfkit;

namespace {

// Abstraction over `n` unit cells of [0, n] with an explicit table.
FiniteAbstraction table_abstraction(std::size_t n, std::size_t m,
                                    const std::vector<StateIndex>& table) {
  Grid grid(StateBox({0.0}, {static_cast<double>(n)}), std::vector<std::size_t>{n});
  std::vector<Vector> inputs;
  for (std::size_t u = 0; u < m; ++u) inputs.push_back({static_cast<double>(u)});
  std::vector<StateIndex> nearest = table;
  for (auto& s : nearest)
    if (s == n) s = 0;
  return FiniteAbstraction(grid, InputSet(inputs), table, nearest);
}

std::vector<StateIndex> all_states(std::size_t n) {
  std::vector<StateIndex> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = k;
  return v;
}

}  // namespace

TEST_CASE("synthesis: identity oracle keeps every safe state with the first input") {
  auto sys = make_identity(2, 1);
  Grid grid(StateBox({-0.5, -0.5}, {0.5, 0.5}), std::vector<std::size_t>{4, 4});
  auto abs = build_abstraction(*sys, grid, InputSet(std::vector<Vector>{{0.0}, {1.0}}));
  std::vector<StateIndex> safe{0, 5, 6, 15};
  auto c = max_invariant_set(abs, safe);
  CHECK(c.winning_set() == safe);
  for (auto k : safe) CHECK(c.input(k) == 0);
  CHECK_FALSE(c.is_winning(1));

  SUBCASE("closed loop is constant") {
    Vector x0 = grid.representative(5);
    auto traj = simulate_closed_loop(*sys, c, abs, x0, 100);
    CHECK(traj.length() == 100);
    CHECK(traj.events.empty());
    for (const auto& x : traj.states) CHECK(x == x0);
  }
  SUBCASE("losing start gives an empty trajectory") {
    auto traj = simulate_closed_loop(*sys, c, abs, grid.representative(1), 100);
    CHECK(traj.length() == 0);
    CHECK(traj.states.size() == 1);
    REQUIRE(traj.events.size() == 1);
    CHECK(traj.events[0] == TrajectoryEvent{0, "no_controller"});
  }
}

TEST_CASE("synthesis: chain with a state that only leaves") {
  // 0 -> {1, 0}, 1 -> {2, 0}, 2 -> {out, out}
  auto abs = table_abstraction(3, 2, {1, 0, 2, 0, 3, 3});
  auto c = max_invariant_set(abs, all_states(3));
  CHECK(c.winning_set() == std::vector<StateIndex>{0, 1});
  CHECK(c.input(0) == 0);
  CHECK(c.input(1) == 1);
  auto oracle = oracles::winning_by_policy_enumeration({{1, 0}, {2, 0}, {3, 3}},
                                                       {true, true, true});
  CHECK(oracle == std::vector<bool>{true, true, false});
}

TEST_CASE("synthesis: everything leaving gives an empty controller") {
  auto abs = table_abstraction(2, 2, {2, 2, 2, 2});
  auto c = max_invariant_set(abs, all_states(2));
  CHECK(c.empty());
  CHECK(c.winning_count() == 0);
}

TEST_CASE("synthesis: the sink cannot be declared safe") {
  auto abs = table_abstraction(2, 1, {0, 1});
  std::vector<StateIndex> bad{2};
  CHECK_THROWS_AS(max_invariant_set(abs, bad), Error);
}

TEST_CASE("synthesis: random abstractions are sound and maximal") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50 + trial * 40, m = 1 + trial % 4;
    std::uniform_int_distribution<std::size_t> pick(0, n);
    std::vector<StateIndex> table(n * m);
    for (auto& s : table) s = pick(rng);
    auto abs = table_abstraction(n, m, table);
    std::vector<StateIndex> safe;
    for (std::size_t k = 0; k < n; ++k)
      if (rng() % 5 != 0) safe.push_back(k);
    auto c = max_invariant_set(abs, safe);
    std::vector<bool> is_safe(n, false);
    for (auto k : safe) is_safe[k] = true;
    for (std::size_t k = 0; k < n; ++k) {
      if (c.is_winning(k)) {
        CHECK(is_safe[k]);
        CHECK(c.is_winning(abs.successor(k, c.input(k))));
        for (InputIndex u = 0; u < c.input(k); ++u)
          CHECK_FALSE(c.is_winning(abs.successor(k, u)));
      } else if (is_safe[k]) {
        for (InputIndex u = 0; u < m; ++u) CHECK_FALSE(c.is_winning(abs.successor(k, u)));
      }
    }
    // Abstract closed loop from any winning state stays winning.
    for (auto k : c.winning_set()) {
      StateIndex s = k;
      for (std::size_t t = 0; t < n + 1; ++t) s = abs.successor(s, c.input(s));
      CHECK(c.is_winning(s));
    }
  }
}

TEST_CASE("synthesis: refine composes with the quantizer") {
  auto abs = table_abstraction(3, 2, {1, 0, 2, 0, 3, 3});
  auto c = max_invariant_set(abs, all_states(3));
  CHECK(refine(c, abs.grid(), std::vector<double>{0.5}) == InputIndex{0});
  CHECK_FALSE(refine(c, abs.grid(), std::vector<double>{2.5}).has_value());
  // x = 2 lies on the face between cells 1 and 2 and belongs to cell 1.
  CHECK(refine(c, abs.grid(), std::vector<double>{2.0}) == InputIndex{1});
  try {
    refine(c, abs.grid(), std::vector<double>{3.5});
    FAIL("expected out-of-domain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOutOfDomain);
  }
}

TEST_CASE("synthesis: leaving the domain stops the simulation") {
  FunctionSystem drift("drift", 1, 1, [](std::span<const double> x, std::span<const double>) {
    return Vector{x[0] + 1.0};
  });
  // The abstraction claims self-loops, the concrete system drifts right.
  auto abs = table_abstraction(3, 1, {0, 1, 2});
  auto c = max_invariant_set(abs, all_states(3));
  auto traj = simulate_closed_loop(drift, c, abs, std::vector<double>{0.5}, 10);
  CHECK(traj.length() == 3);
  REQUIRE(traj.events.size() == 1);
  CHECK(traj.events[0] == TrajectoryEvent{3, "left_domain"});
}

TEST_CASE("synthesis: safe cells and deflation") {
  Grid grid(StateBox({-0.5, -0.5}, {0.5, 0.5}), std::vector<std::size_t>{10, 10});
  Vector lo{-0.5, -0.5}, hi{0.5, 0.5};
  CHECK(safe_cells(grid, lo, hi).size() == 100);
  CHECK(safe_cells(grid, lo, hi, 0.05).size() == 64);
  CHECK(safe_cells(grid, lo, hi, 0.6).empty());
}

TEST_CASE("synthesis: CSV output") {
  auto abs = table_abstraction(3, 2, {1, 0, 2, 0, 3, 3});
  auto c = max_invariant_set(abs, all_states(3));
  std::ostringstream ctl;
  write_controller_csv(ctl, c);
  CHECK(ctl.str() == "state_index,input_index\n0,0\n1,1\n");
  Trajectory t;
  t.states = {{0.5}, {1.5}};
  t.inputs = {1};
  t.horizon = 1;
  std::ostringstream tr;
  write_trajectory_csv(tr, t);
  CHECK(tr.str() == "t,x_0,input_index\n0,0.5,1\n1,1.5,\n");
}
