#ifndef MOOGVCF_TYPES_HPP
#define MOOGVCF_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace moogvcf {

template <typename Scalar>
using Vector4 = Eigen::Matrix<Scalar, 4, 1>;

template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4, Eigen::RowMajor>;

using Vector4d = Vector4<double>;
using Matrix4d = Matrix4<double>;

/// Nondimensionalized capacitor voltages x1..x4.
template <typename Scalar>
struct State {
  Vector4<Scalar> x = Vector4<Scalar>::Zero();
};

/// Image of a State under the diagonal scaling w = D x.
template <typename Scalar>
struct ScaledState {
  Vector4<Scalar> w = Vector4<Scalar>::Zero();
};

/// A parameter (or argument) is outside its admissible range.
class RangeError : public std::out_of_range {
 public:
  RangeError(std::string field, const std::string& what)
      : std::out_of_range(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// The operation is not defined on this branch of the model (e.g. alpha = 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative method gave up; carries the last residual it saw.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Time stepping failed for good at the given step index.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, long step, double residual)
      : std::runtime_error(what), step_(step), residual_(residual) {}

  long step() const noexcept { return step_; }
  double residual() const noexcept { return residual_; }

 private:
  long step_;
  double residual_;
};

}  // namespace moogvcf

#endif  // MOOGVCF_TYPES_HPP
