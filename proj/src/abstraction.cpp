#include "abfkit/abstraction.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "json.hpp"

#include "abfkit/error.hpp"
#include "abfkit/format.hpp"
#include "abfkit/parallel.hpp"

namespace abfkit {

using nlohmann::json;

Grid::Grid(StateBox box, double delta) : box_(std::move(box)), delta_(delta) {
  require(std::isfinite(delta) && delta > 0.0, ErrorCode::kInvalidArgument,
          "discretization parameter must be positive");
  const double root_n = std::sqrt(static_cast<double>(box_.dimension()));
  for (std::size_t i = 0; i < box_.dimension(); ++i) {
    double exact = box_.width(i) * root_n / delta;
    // Absorb rounding noise so e.g. width 1, delta 0.1*sqrt(2) gives 10 cells.
    cells_.push_back(static_cast<std::size_t>(
        std::max(1.0, std::ceil(exact * (1.0 - 1e-12)))));
  }
  init();
}

Grid::Grid(StateBox box, std::vector<std::size_t> cells_per_dim)
    : box_(std::move(box)), cells_(std::move(cells_per_dim)) {
  require(cells_.size() == box_.dimension(), ErrorCode::kInvalidArgument,
          "cells_per_dim must match the box dimension");
  for (auto c : cells_)
    require(c >= 1, ErrorCode::kInvalidArgument, "cells_per_dim must be >= 1");
  init();
  double d2 = 0.0;
  for (double h : spacing_) d2 += h * h;
  delta_ = std::sqrt(d2);
}

void Grid::init() {
  size_ = 1;
  spacing_.clear();
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    spacing_.push_back(box_.width(i) / static_cast<double>(cells_[i]));
    require(size_ <= (std::size_t{1} << 40) / cells_[i], ErrorCode::kInvalidArgument,
            "grid has too many cells");
    size_ *= cells_[i];
  }
}

namespace {

// Cell coordinate along one axis; faces resolve to the lower cell.
std::size_t axis_cell(double x, double lower, double width, std::size_t cells) {
  double t = (x - lower) * static_cast<double>(cells) / width;
  double c = std::ceil(t) - 1.0;
  if (c < 0.0) return 0;
  if (c > static_cast<double>(cells - 1)) return cells - 1;
  return static_cast<std::size_t>(c);
}

}  // namespace

StateIndex Grid::quantize(std::span<const double> x) const {
  if (!box_.contains(x)) {
    fail(ErrorCode::kOutOfDomain,
         "state (" + join_doubles(x, ", ") + ") lies outside the grid box");
  }
  return nearest(x);
}

StateIndex Grid::nearest(std::span<const double> x) const {
  require(x.size() == dimension(), ErrorCode::kInvalidArgument,
          "state dimension does not match the grid");
  StateIndex index = 0, stride = 1;
  for (std::size_t i = 0; i < dimension(); ++i) {
    index += stride * axis_cell(x[i], box_.lower()[i], box_.width(i), cells_[i]);
    stride *= cells_[i];
  }
  return index;
}

std::vector<std::size_t> Grid::multi_index(StateIndex index) const {
  require(index < size_, ErrorCode::kRange,
          "abstract state " + std::to_string(index) + " out of range");
  std::vector<std::size_t> multi(dimension());
  for (std::size_t i = 0; i < dimension(); ++i) {
    multi[i] = index % cells_[i];
    index /= cells_[i];
  }
  return multi;
}

StateIndex Grid::flat_index(std::span<const std::size_t> multi) const {
  require(multi.size() == dimension(), ErrorCode::kInvalidArgument,
          "multi-index has the wrong dimension");
  StateIndex index = 0, stride = 1;
  for (std::size_t i = 0; i < dimension(); ++i) {
    require(multi[i] < cells_[i], ErrorCode::kRange, "multi-index out of range");
    index += stride * multi[i];
    stride *= cells_[i];
  }
  return index;
}

Vector Grid::representative(StateIndex index) const {
  auto multi = multi_index(index);
  Vector centre(dimension());
  for (std::size_t i = 0; i < dimension(); ++i)
    centre[i] = box_.lower()[i] + (static_cast<double>(multi[i]) + 0.5) * spacing_[i];
  return centre;
}

FiniteAbstraction::FiniteAbstraction(Grid grid, InputSet inputs,
                                     std::vector<StateIndex> transitions,
                                     std::vector<StateIndex> nearest)
    : grid_(std::move(grid)),
      inputs_(std::move(inputs)),
      transitions_(std::move(transitions)),
      nearest_(std::move(nearest)) {
  const std::size_t entries = grid_.size() * inputs_.size();
  require(transitions_.size() == entries && nearest_.size() == entries,
          ErrorCode::kInvalidArgument, "transition table has the wrong size");
  for (std::size_t e = 0; e < entries; ++e) {
    require(transitions_[e] <= out_state(), ErrorCode::kRange,
            "transition table entry out of range");
    require(nearest_[e] < grid_.size(), ErrorCode::kRange,
            "nearest-successor entry out of range");
    require(transitions_[e] == out_state() || transitions_[e] == nearest_[e],
            ErrorCode::kInvalidArgument,
            "in-box transition disagrees with its nearest representative");
  }
}

FiniteAbstraction build_abstraction(const BlackBoxSystem& system, const Grid& grid,
                                    const InputSet& inputs) {
  require(system.dimension() == grid.dimension(), ErrorCode::kInvalidArgument,
          "grid dimension does not match the system");
  require(system.input_dimension() == inputs.dimension(),
          ErrorCode::kInvalidArgument, "input dimension does not match the system");
  const std::size_t m = inputs.size();
  const std::size_t out = grid.size();
  std::vector<StateIndex> transitions(grid.size() * m);
  std::vector<StateIndex> nearest(grid.size() * m);
  for_each_block(grid.size(), 64, system.reentrant(),
                 [&](std::size_t, std::size_t begin, std::size_t end) {
                   for (StateIndex k = begin; k < end; ++k) {
                     const Vector centre = grid.representative(k);
                     for (InputIndex u = 0; u < m; ++u) {
                       Vector next = system.step(centre, inputs[u]);
                       for (double c : next) {
                         if (!std::isfinite(c)) {
                           fail(ErrorCode::kDataAcquisition,
                                system.name() + " returned a non-finite state from cell " +
                                    std::to_string(k) + ", input " + std::to_string(u));
                         }
                       }
                       const std::size_t e = k * m + u;
                       nearest[e] = grid.nearest(next);
                       transitions[e] = grid.box().contains(next) ? nearest[e] : out;
                     }
                   }
                 });
  return FiniteAbstraction(grid, inputs, std::move(transitions), std::move(nearest));
}

void write_transitions_csv(std::ostream& out, const FiniteAbstraction& abs) {
  out << "state_index,input_index,next_index\n";
  for (StateIndex k = 0; k < abs.num_states(); ++k)
    for (InputIndex u = 0; u < abs.num_inputs(); ++u)
      out << k << ',' << u << ',' << abs.successor(k, u) << '\n';
}

void write_abstraction_json(std::ostream& out, const FiniteAbstraction& abs) {
  const Grid& g = abs.grid();
  json j;
  j["box"] = {{"lower", g.box().lower()}, {"upper", g.box().upper()}};
  j["cells_per_dim"] = g.cells_per_dim();
  j["delta"] = g.delta();
  j["inputs"] = abs.inputs().inputs();
  j["num_states"] = abs.num_states();
  j["out_state"] = abs.out_state();
  json overrides = json::array();
  for (StateIndex k = 0; k < abs.num_states(); ++k)
    for (InputIndex u = 0; u < abs.num_inputs(); ++u)
      if (abs.successor(k, u) == abs.out_state())
        overrides.push_back({k, u, abs.nearest_successor(k, u)});
  j["out_nearest"] = std::move(overrides);
  out << j.dump(2) << '\n';
}

FiniteAbstraction read_abstraction(std::istream& json_sidecar,
                                   std::istream& transitions_csv) {
  json j;
  try {
    json_sidecar >> j;
    StateBox box(j.at("box").at("lower").get<Vector>(),
                 j.at("box").at("upper").get<Vector>());
    Grid grid(box, j.at("cells_per_dim").get<std::vector<std::size_t>>());
    InputSet inputs(j.at("inputs").get<std::vector<Vector>>());
    const std::size_t m = inputs.size();
    std::vector<StateIndex> transitions(grid.size() * m, grid.size() + 1);

    std::string line;
    std::getline(transitions_csv, line);
    while (std::getline(transitions_csv, line)) {
      if (trim(line).empty()) continue;
      auto cells = split(line, ',');
      require(cells.size() == 3, ErrorCode::kIo, "malformed transition row");
      auto k = static_cast<std::size_t>(parse_integer(cells[0]));
      auto u = static_cast<std::size_t>(parse_integer(cells[1]));
      require(k < grid.size() && u < m, ErrorCode::kIo, "transition row out of range");
      transitions[k * m + u] = static_cast<std::size_t>(parse_integer(cells[2]));
    }
    std::vector<StateIndex> nearest = transitions;
    for (const auto& o : j.at("out_nearest")) {
      auto k = o.at(0).get<std::size_t>(), u = o.at(1).get<std::size_t>();
      require(k < grid.size() && u < m, ErrorCode::kIo, "sink entry out of range");
      nearest[k * m + u] = o.at(2).get<std::size_t>();
    }
    return FiniteAbstraction(std::move(grid), std::move(inputs),
                             std::move(transitions), std::move(nearest));
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, std::string("malformed abstraction sidecar: ") + e.what());
  }
}

}  // namespace abfkit
