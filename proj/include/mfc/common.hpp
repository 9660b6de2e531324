#ifndef MFC_COMMON_HPP
#define MFC_COMMON_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mfc {

using Real = double;
using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<Real>;
using Vector = VectorX<Real>;
using RowVector = RowVectorX<Real>;

inline constexpr Real kTwoPi = 2.0 * std::numbers::pi;

/// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration. The CLI maps it to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Bad arguments to a pure function (empty sample sets and the like).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or runaway particle state. Carries where it happened.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, int step, Index particle)
      : Error(what + " (step " + std::to_string(step) + ", particle " +
              std::to_string(particle) + ")"),
        step_(step),
        particle_(particle) {}

  int step() const { return step_; }
  Index particle() const { return particle_; }

 private:
  int step_;
  Index particle_;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

/// Misuse of a stateful object, e.g. a second backward pass on one tape.
class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfc

#endif  // MFC_COMMON_HPP
