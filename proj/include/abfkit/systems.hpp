#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace abfkit {

using Vector = std::vector<double>;

double norm(std::span<const double> v);
double distance(std::span<const double> a, std::span<const double> b);

/// Axis-aligned box X = [lower, upper] in R^n.
class StateBox {
 public:
  StateBox(Vector lower, Vector upper);

  std::size_t dimension() const { return lower_.size(); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  double width(std::size_t i) const { return upper_[i] - lower_[i]; }

  /// Closed-box membership.
  bool contains(std::span<const double> x) const;
  /// Largest Euclidean norm over the box (the farthest corner).
  double max_norm() const;

  friend bool operator==(const StateBox&, const StateBox&) = default;

 private:
  Vector lower_;
  Vector upper_;
};

/// Ordered finite input set U = {nu_1, ..., nu_m}.
class InputSet {
 public:
  explicit InputSet(std::vector<Vector> inputs);

  std::size_t size() const { return inputs_.size(); }
  std::size_t dimension() const { return inputs_.front().size(); }
  const Vector& operator[](std::size_t i) const { return inputs_.at(i); }
  const std::vector<Vector>& inputs() const { return inputs_; }
  double max_norm() const;

  friend bool operator==(const InputSet&, const InputSet&) = default;

 private:
  std::vector<Vector> inputs_;
};

/// One-step oracle x' = f(x, nu) for an unknown deterministic map.
///
/// Implementations must be deterministic. Those reporting `reentrant()` may be
/// queried from several threads at once; the others serialize internally.
class BlackBoxSystem {
 public:
  virtual ~BlackBoxSystem() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::size_t input_dimension() const = 0;
  virtual std::string name() const = 0;
  virtual bool reentrant() const { return true; }

  /// Throws kInvalidArgument on a shape mismatch.
  Vector step(std::span<const double> x, std::span<const double> nu) const;

 protected:
  virtual Vector do_step(std::span<const double> x,
                         std::span<const double> nu) const = 0;
};

using SystemPtr = std::shared_ptr<const BlackBoxSystem>;
using StepFunction =
    std::function<Vector(std::span<const double>, std::span<const double>)>;

/// Adapts a plain callable to the oracle interface.
class FunctionSystem final : public BlackBoxSystem {
 public:
  FunctionSystem(std::string name, std::size_t dimension,
                 std::size_t input_dimension, StepFunction step);

  std::size_t dimension() const override { return dimension_; }
  std::size_t input_dimension() const override { return input_dimension_; }
  std::string name() const override { return name_; }

 protected:
  Vector do_step(std::span<const double> x,
                 std::span<const double> nu) const override;

 private:
  std::string name_;
  std::size_t dimension_;
  std::size_t input_dimension_;
  StepFunction step_;
};

/// Oracle backed by a child process speaking a line protocol: the state
/// components followed by the input components on one line in, the successor
/// state on one line out, whitespace-separated decimal floats.
class ExternalCommandSystem final : public BlackBoxSystem {
 public:
  ExternalCommandSystem(std::string command, std::size_t dimension,
                        std::size_t input_dimension);
  ~ExternalCommandSystem() override;

  ExternalCommandSystem(const ExternalCommandSystem&) = delete;
  ExternalCommandSystem& operator=(const ExternalCommandSystem&) = delete;

  std::size_t dimension() const override { return dimension_; }
  std::size_t input_dimension() const override { return input_dimension_; }
  std::string name() const override { return "command:" + command_; }
  bool reentrant() const override { return false; }

 protected:
  Vector do_step(std::span<const double> x,
                 std::span<const double> nu) const override;

 private:
  std::string command_;
  std::size_t dimension_;
  std::size_t input_dimension_;
  int pid_ = -1;
  std::FILE* to_child_ = nullptr;
  std::FILE* from_child_ = nullptr;
  mutable std::mutex mutex_;
};

namespace plants {

/// Discretized DC motor (tau = 0.01, R = 1, L = J = 0.01, b = 0.9,
/// K_dc = 0.01, input gain 0.7).
Vector dc_motor_step(std::span<const double> x, std::span<const double> nu);

/// Moore-Greitzer jet engine compressor, tau = 0.01, scalar input.
Vector jet_engine_step(std::span<const double> x, std::span<const double> nu);

}  // namespace plants

SystemPtr make_dc_motor();
SystemPtr make_jet_engine();
/// f(x, nu) = x, for any state and input dimension.
SystemPtr make_identity(std::size_t dimension, std::size_t input_dimension);

struct SamplePair {
  Vector x;
  std::size_t nu_index = 0;
  Vector x_next;

  friend bool operator==(const SamplePair&, const SamplePair&) = default;
};

/// `count` i.i.d. points drawn uniformly over `box`; reproducible from `seed`.
std::vector<Vector> sample_states(const StateBox& box, std::size_t count,
                                  std::uint64_t seed);

/// Samples `count` states and queries the oracle once for every input at each
/// of them. The result holds count * |U| pairs grouped by sampled state.
std::vector<SamplePair> collect_dataset(const BlackBoxSystem& system,
                                        const StateBox& box,
                                        const InputSet& inputs,
                                        std::size_t count, std::uint64_t seed);

void write_dataset_csv(std::ostream& out, std::span<const SamplePair> pairs);
std::vector<SamplePair> read_dataset_csv(std::istream& in);

}  // namespace abfkit
