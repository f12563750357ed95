#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"

#include "abfkit/abstraction.hpp"
#include "abfkit/error.hpp"

using namespace abfkit;

namespace {

InputSet dc_inputs() {
  return InputSet(std::vector<Vector>{{-0.3, -0.3}, {0.3, -0.3}, {-0.3, 0.3}, {0.3, 0.3}});
}

}  // namespace

TEST_CASE("abstraction: grid sizing from delta") {
  Grid g(StateBox({-0.5, -0.5}, {0.5, 0.5}), 0.15);
  CHECK(g.cells_per_dim() == std::vector<std::size_t>{10, 10});
  CHECK(g.size() == 100);
  CHECK(std::hypot(g.spacing(0), g.spacing(1)) <= 0.15);

  Grid exact(StateBox({0.0}, {1.0}), 0.25);
  CHECK(exact.cells_per_dim() == std::vector<std::size_t>{4});

  Grid three(StateBox({0.0, 0.0, 0.0}, {1.0, 2.0, 3.0}), 0.5);
  double diam = 0.0;
  for (std::size_t i = 0; i < 3; ++i) diam += three.spacing(i) * three.spacing(i);
  CHECK(std::sqrt(diam) <= 0.5);
  CHECK_THROWS_AS(Grid(StateBox({0.0}, {1.0}), 0.0), Error);
}

TEST_CASE("abstraction: quantizer and representatives") {
  Grid line(StateBox({0.0}, {1.0}), std::vector<std::size_t>{4});
  CHECK(line.quantize(Vector{0.3}) == 1);
  CHECK(line.representative(1)[0] == doctest::Approx(0.375));
  CHECK(line.quantize(Vector{0.5}) == 1);   // face between cells 1 and 2
  CHECK(line.quantize(Vector{0.25}) == 0);  // face between cells 0 and 1
  CHECK(line.quantize(Vector{0.0}) == 0);
  CHECK(line.quantize(Vector{1.0}) == 3);
  CHECK_THROWS_AS(line.quantize(Vector{1.0001}), Error);
  CHECK_THROWS_AS(line.quantize(Vector{-0.1}), Error);
  CHECK_THROWS_AS(line.representative(4), Error);

  Grid two_cells(StateBox({0.0}, {1.0}), std::vector<std::size_t>{2});
  CHECK(two_cells.representative(0)[0] == doctest::Approx(0.25));

  Grid g(StateBox({-0.5, -0.5}, {0.5, 0.5}), std::vector<std::size_t>{10, 10});
  CHECK(g.representative(0)[0] == doctest::Approx(-0.45));
  CHECK(g.representative(0)[1] == doctest::Approx(-0.45));
  CHECK(g.representative(1)[0] == doctest::Approx(-0.35));  // dimension 0 fastest
  CHECK(g.representative(10)[1] == doctest::Approx(-0.35));
  for (StateIndex k = 0; k < g.size(); ++k) {
    CHECK(g.quantize(g.representative(k)) == k);
    CHECK(g.flat_index(g.multi_index(k)) == k);
  }
  CHECK(g.quantize(Vector{0.0, 0.0}) == g.flat_index(std::vector<std::size_t>{4, 4}));
}

TEST_CASE("abstraction: quantizer bound on random points") {
  Grid g(StateBox({-0.5, -0.5}, {0.5, 0.5}), 0.05);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double worst = 0.0;
  for (int i = 0; i < 20000; ++i) {
    Vector x{u(rng), u(rng)};
    worst = std::max(worst, distance(g.representative(g.quantize(x)), x));
  }
  CHECK(worst <= 0.5 * 0.05);
}

TEST_CASE("abstraction: nearest cell is defined everywhere") {
  Grid line(StateBox({0.0}, {1.0}), std::vector<std::size_t>{4});
  CHECK(line.nearest(Vector{-3.0}) == 0);
  CHECK(line.nearest(Vector{7.0}) == 3);
  CHECK(line.nearest(Vector{0.6}) == 2);
}

TEST_CASE("abstraction: identity oracle gives self-loops") {
  auto id = make_identity(2, 2);
  Grid g(StateBox({-0.5, -0.5}, {0.5, 0.5}), std::vector<std::size_t>{10, 10});
  auto abs = build_abstraction(*id, g, dc_inputs());
  CHECK(abs.transitions().size() == 400);
  for (StateIndex k = 0; k < abs.num_states(); ++k)
    for (InputIndex u = 0; u < abs.num_inputs(); ++u) CHECK(abs.successor(k, u) == k);
}

TEST_CASE("abstraction: DC motor table matches quantized oracle queries") {
  auto dc = make_dc_motor();
  Grid g(StateBox({-0.5, -0.5}, {0.5, 0.5}), std::vector<std::size_t>{5, 5});
  const InputSet u = dc_inputs();
  auto abs = build_abstraction(*dc, g, u);
  const StateIndex centre = g.quantize(Vector{0.0, 0.0});
  CHECK(g.representative(centre) == Vector{0.0, 0.0});
  CHECK(abs.successor(centre, 3) == g.quantize(Vector{0.0021, 0.0021}));
  CHECK(abs.successor(centre, 3) == centre);
  for (StateIndex k = 0; k < abs.num_states(); ++k) {
    for (InputIndex i = 0; i < u.size(); ++i) {
      const Vector next = dc->step(g.representative(k), u[i]);
      CHECK(abs.successor(k, i) == g.quantize(next));
      CHECK(abs.nearest_successor(k, i) == abs.successor(k, i));
    }
  }
}

TEST_CASE("abstraction: successors outside the box go to the sink") {
  FunctionSystem shift("shift", 1, 1, [](std::span<const double> x, std::span<const double> nu) {
    return Vector{x[0] + nu[0]};
  });
  Grid g(StateBox({0.0}, {1.0}), std::vector<std::size_t>{4});
  auto abs = build_abstraction(shift, g, InputSet(std::vector<Vector>{{0.0}, {0.5}}));
  CHECK(abs.out_state() == 4);
  CHECK(abs.successor(1, 1) == 3);
  CHECK(abs.successor(2, 1) == abs.out_state());
  CHECK(abs.nearest_successor(2, 1) == 3);
  CHECK(abs.successor(3, 1) == abs.out_state());
  CHECK(abs.nearest_successor(3, 1) == 3);
}

TEST_CASE("abstraction: file round trip") {
  auto jet = make_jet_engine();
  Grid g(StateBox({-0.5, -0.5}, {0.5, 0.5}), 0.15);
  auto abs = build_abstraction(*jet, g, InputSet(std::vector<Vector>{{-0.5}, {0.0}, {0.5}}));
  std::stringstream csv, side;
  write_transitions_csv(csv, abs);
  write_abstraction_json(side, abs);
  CHECK(csv.str().rfind("state_index,input_index,next_index\n0,0,", 0) == 0);
  auto back = read_abstraction(side, csv);
  CHECK(back.grid().box() == abs.grid().box());
  CHECK(back.grid().cells_per_dim() == abs.grid().cells_per_dim());
  CHECK(back.inputs() == abs.inputs());
  CHECK(back.transitions() == abs.transitions());

  std::stringstream again;
  write_transitions_csv(again, build_abstraction(*jet, g, abs.inputs()));
  std::stringstream first;
  write_transitions_csv(first, abs);
  CHECK(again.str() == first.str());
}
