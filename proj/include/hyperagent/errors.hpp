#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hyperagent {

/// Out-of-range or inconsistent construction parameters.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed runtime input (dimension mismatch, empty action set, NaN reward).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke a documented precondition, e.g. a feature outside the unit ball.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary file does not follow its declared layout. Carries the offending offset.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Well-formed file whose contents violate a domain rule (e.g. unknown label).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SGD produced a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, double loss, std::size_t step)
      : std::runtime_error(what + " (loss=" + std::to_string(loss) +
                           ", gradient step " + std::to_string(step) + ")"),
        loss_(loss),
        step_(step) {}
  double loss() const noexcept { return loss_; }
  std::size_t step() const noexcept { return step_; }

 private:
  double loss_;
  std::size_t step_;
};

}  // namespace hyperagent
