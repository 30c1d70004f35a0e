#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ergolab {

using Point = std::vector<double>;

/// x -> out, both of length dim.
using VectorField = std::function<void(std::span<const double> x, std::span<double> out)>;

/// x -> out, out is a dim x dim matrix stored row-major.
using MatrixField = std::function<void(std::span<const double> x, std::span<double> out)>;

using ScalarField = std::function<double(std::span<const double> x)>;

/// (x, z) -> psi(x, z) with z a row vector of length dim.
using DriverFn = std::function<double(std::span<const double> x, std::span<const double> z)>;

class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised when a simulated state stops being finite.
class NonFiniteStateError : public NumericalError {
  public:
    NonFiniteStateError(std::size_t path, std::size_t step)
        : NumericalError("non-finite state on path " + std::to_string(path) + " at step " +
                         std::to_string(step)),
          path_(path),
          step_(step) {}
    std::size_t path() const { return path_; }
    std::size_t step() const { return step_; }

  private:
    std::size_t path_;
    std::size_t step_;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return dot(a, a); }

}  // namespace ergolab
