#include "abfkit/systems.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "abfkit/error.hpp"
#include "abfkit/format.hpp"
#include "abfkit/parallel.hpp"

namespace abfkit {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

StateBox::StateBox(Vector lower, Vector upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  require(!lower_.empty(), ErrorCode::kInvalidArgument,
          "state box needs dimension >= 1");
  require(lower_.size() == upper_.size(), ErrorCode::kInvalidArgument,
          "state box bounds differ in dimension");
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    require(std::isfinite(lower_[i]) && std::isfinite(upper_[i]) &&
                lower_[i] < upper_[i],
            ErrorCode::kInvalidArgument,
            "degenerate state box in dimension " + std::to_string(i));
  }
}

bool StateBox::contains(std::span<const double> x) const {
  if (x.size() != dimension()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] >= lower_[i] && x[i] <= upper_[i])) return false;
  return true;
}

double StateBox::max_norm() const {
  double s = 0.0;
  for (std::size_t i = 0; i < dimension(); ++i) {
    double c = std::max(std::abs(lower_[i]), std::abs(upper_[i]));
    s += c * c;
  }
  return std::sqrt(s);
}

InputSet::InputSet(std::vector<Vector> inputs) : inputs_(std::move(inputs)) {
  require(!inputs_.empty(), ErrorCode::kInvalidArgument, "input set is empty");
  const std::size_t p = inputs_.front().size();
  std::set<Vector> seen;
  for (const auto& nu : inputs_) {
    require(nu.size() == p, ErrorCode::kInvalidArgument,
            "input vectors differ in dimension");
    require(seen.insert(nu).second, ErrorCode::kInvalidArgument,
            "duplicate input (" + join_doubles(nu, ", ") + ")");
  }
}

double InputSet::max_norm() const {
  double m = 0.0;
  for (const auto& nu : inputs_) m = std::max(m, norm(nu));
  return m;
}

Vector BlackBoxSystem::step(std::span<const double> x,
                            std::span<const double> nu) const {
  require(x.size() == dimension(), ErrorCode::kInvalidArgument,
          name() + ": state has dimension " + std::to_string(x.size()) +
              ", expected " + std::to_string(dimension()));
  require(nu.size() == input_dimension(), ErrorCode::kInvalidArgument,
          name() + ": input has dimension " + std::to_string(nu.size()) +
              ", expected " + std::to_string(input_dimension()));
  return do_step(x, nu);
}

FunctionSystem::FunctionSystem(std::string name, std::size_t dimension,
                               std::size_t input_dimension, StepFunction step)
    : name_(std::move(name)),
      dimension_(dimension),
      input_dimension_(input_dimension),
      step_(std::move(step)) {}

Vector FunctionSystem::do_step(std::span<const double> x,
                               std::span<const double> nu) const {
  return step_(x, nu);
}

// --- external command oracle ----------------------------------------------

ExternalCommandSystem::ExternalCommandSystem(std::string command,
                                             std::size_t dimension,
                                             std::size_t input_dimension)
    : command_(std::move(command)),
      dimension_(dimension),
      input_dimension_(input_dimension) {
  int in_pipe[2];   // parent -> child
  int out_pipe[2];  // child -> parent
  require(::pipe(in_pipe) == 0 && ::pipe(out_pipe) == 0, ErrorCode::kIo,
          "pipe() failed for oracle command");
  pid_ = ::fork();
  require(pid_ >= 0, ErrorCode::kIo, "fork() failed for oracle command");
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = ::fdopen(in_pipe[1], "w");
  from_child_ = ::fdopen(out_pipe[0], "r");
  require(to_child_ && from_child_, ErrorCode::kIo, "fdopen() failed");
  // A dead child must surface as a read/write error, not SIGPIPE.
  ::signal(SIGPIPE, SIG_IGN);
}

ExternalCommandSystem::~ExternalCommandSystem() {
  if (to_child_) std::fclose(to_child_);
  if (from_child_) std::fclose(from_child_);
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

Vector ExternalCommandSystem::do_step(std::span<const double> x,
                                      std::span<const double> nu) const {
  std::lock_guard lock(mutex_);
  std::string line = join_doubles(x, " ");
  if (!nu.empty()) line += " " + join_doubles(nu, " ");
  line += '\n';
  if (std::fputs(line.c_str(), to_child_) == EOF || std::fflush(to_child_) != 0)
    fail(ErrorCode::kDataAcquisition, name() + ": cannot write to oracle");

  std::string reply;
  char buf[512];
  while (std::fgets(buf, sizeof buf, from_child_)) {
    reply += buf;
    if (!reply.empty() && reply.back() == '\n') break;
  }
  if (reply.empty())
    fail(ErrorCode::kDataAcquisition, name() + ": oracle closed its output");

  std::istringstream is(reply);
  Vector next;
  std::string token;
  while (is >> token) next.push_back(parse_double(token));
  require(next.size() == dimension_, ErrorCode::kDataAcquisition,
          name() + ": oracle replied with " + std::to_string(next.size()) +
              " values, expected " + std::to_string(dimension_));
  return next;
}

// --- benchmark plants -------------------------------------------------------

namespace plants {
namespace {

void check_shape(std::span<const double> x, std::span<const double> nu,
                 std::size_t n, std::size_t p, const char* who) {
  require(x.size() == n && nu.size() == p, ErrorCode::kInvalidArgument,
          std::string(who) + ": expected state dimension " + std::to_string(n) +
              " and input dimension " + std::to_string(p));
}

}  // namespace

Vector dc_motor_step(std::span<const double> x, std::span<const double> nu) {
  check_shape(x, nu, 2, 2, "dc_motor");
  constexpr double tau = 0.01, R = 1.0, L = 0.01, J = 0.01, b = 0.9,
                   k_dc = 0.01, gain = 0.7;
  return {x[0] + tau * (-R / L * x[0] - k_dc / L * x[1] + gain * nu[0]),
          x[1] + tau * (k_dc / J * x[0] - b / J * x[1] + gain * nu[1])};
}

Vector jet_engine_step(std::span<const double> x, std::span<const double> nu) {
  check_shape(x, nu, 2, 1, "jet_engine");
  constexpr double tau = 0.01;
  const double x1 = x[0], x2 = x[1];
  return {x1 + tau * (-x2 - 1.5 * x1 * x1 - 0.5 * x1 * x1 * x1),
          x2 + tau * (x1 - nu[0])};
}

}  // namespace plants

SystemPtr make_dc_motor() {
  return std::make_shared<FunctionSystem>("dc_motor", 2, 2,
                                          &plants::dc_motor_step);
}

SystemPtr make_jet_engine() {
  return std::make_shared<FunctionSystem>("jet_engine", 2, 1,
                                          &plants::jet_engine_step);
}

SystemPtr make_identity(std::size_t dimension, std::size_t input_dimension) {
  return std::make_shared<FunctionSystem>(
      "identity", dimension, input_dimension,
      [](std::span<const double> x, std::span<const double>) {
        return Vector(x.begin(), x.end());
      });
}

// --- sampling ---------------------------------------------------------------

std::vector<Vector> sample_states(const StateBox& box, std::size_t count,
                                  std::uint64_t seed) {
  require(count >= 1, ErrorCode::kInvalidArgument, "sample count must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<Vector> out(count, Vector(box.dimension()));
  for (auto& x : out) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      // 53 random mantissa bits -> uniform on [0, 1).
      double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      x[i] = box.lower()[i] + u * box.width(i);
    }
  }
  return out;
}

std::vector<SamplePair> collect_dataset(const BlackBoxSystem& system,
                                        const StateBox& box,
                                        const InputSet& inputs,
                                        std::size_t count, std::uint64_t seed) {
  require(box.dimension() == system.dimension(), ErrorCode::kInvalidArgument,
          "state box dimension does not match the system");
  require(inputs.dimension() == system.input_dimension(),
          ErrorCode::kInvalidArgument,
          "input dimension does not match the system");
  auto states = sample_states(box, count, seed);
  const std::size_t m = inputs.size();
  std::vector<SamplePair> pairs(count * m);
  for_each_block(pairs.size(), 64, system.reentrant(),
                 [&](std::size_t, std::size_t begin, std::size_t end) {
                   for (std::size_t k = begin; k < end; ++k) {
                     auto& pair = pairs[k];
                     pair.x = states[k / m];
                     pair.nu_index = k % m;
                     pair.x_next = system.step(pair.x, inputs[pair.nu_index]);
                     for (double c : pair.x_next) {
                       if (!std::isfinite(c)) {
                         fail(ErrorCode::kDataAcquisition,
                              system.name() + " returned a non-finite state at x = (" +
                                  join_doubles(pair.x, ", ") + "), input " +
                                  std::to_string(pair.nu_index) + " = (" +
                                  join_doubles(inputs[pair.nu_index], ", ") + ")");
                       }
                     }
                   }
                 });
  return pairs;
}

void write_dataset_csv(std::ostream& out, std::span<const SamplePair> pairs) {
  if (pairs.empty()) return;
  const std::size_t n = pairs.front().x.size();
  for (std::size_t i = 0; i < n; ++i) out << "x_" << i << ',';
  out << "nu_index";
  for (std::size_t i = 0; i < n; ++i) out << ",xnext_" << i;
  out << '\n';
  for (const auto& p : pairs) {
    out << join_doubles(p.x, ",") << ',' << p.nu_index << ','
        << join_doubles(p.x_next, ",") << '\n';
  }
}

std::vector<SamplePair> read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  auto header = split(line, ',');
  require(header.size() >= 3 && header.size() % 2 == 1, ErrorCode::kIo,
          "malformed dataset header");
  const std::size_t n = (header.size() - 1) / 2;
  std::vector<SamplePair> pairs;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    require(cells.size() == header.size(), ErrorCode::kIo,
            "dataset row " + std::to_string(row) + " has the wrong width");
    SamplePair p;
    for (std::size_t i = 0; i < n; ++i) p.x.push_back(parse_double(cells[i]));
    p.nu_index = static_cast<std::size_t>(parse_integer(cells[n]));
    for (std::size_t i = 0; i < n; ++i)
      p.x_next.push_back(parse_double(cells[n + 1 + i]));
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace abfkit
