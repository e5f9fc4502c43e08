#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pdlearn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when a caller breaks a documented precondition (dimension mismatch,
/// out-of-support argument, invalid configuration).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an iterate or estimate stops being finite.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a file on disk does not match its documented format.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const char* what) {
  if (!cond) throw ContractViolation(what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& v) {
  return v.allFinite();
}

}  // namespace pdlearn
