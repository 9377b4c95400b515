#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace arbary {

template <typename Scalar>
using VectorX = Eigen::Vector<Scalar, Eigen::Dynamic>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

/// Input violates a precondition (wrong sizes, bad ranges, mismatched grids).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerically degenerate input (all-zero mass, singular Toeplitz system).
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An AR polynomial with a pole on or outside the unit circle.
class InstabilityError : public std::runtime_error {
 public:
  InstabilityError(const std::string& what, int stage)
      : std::runtime_error(what), stage_(stage) {}
  /// 1-based reflection stage at which |kappa| >= 1 was detected (0 if n/a).
  int stage() const { return stage_; }

 private:
  int stage_ = 0;
};

/// Iterative solver hit its iteration cap before reaching tolerance.
class ConvergenceFailure : public std::runtime_error {
 public:
  ConvergenceFailure(const std::string& what, double violation)
      : std::runtime_error(what), violation_(violation) {}
  double violation() const { return violation_; }

 private:
  double violation_ = 0.0;
};

/// splitmix64 finalizer; used to fan a root seed out into stream seeds.
inline std::uint64_t mix_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t z = root ^ stream;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace arbary
