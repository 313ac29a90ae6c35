#pragma once

#include <stdexcept>
#include <string>

namespace sanmt {

// Precondition or shape-contract failure. Indicates bad input to an
// operation, not a numerical problem.
struct ContractViolation : std::logic_error {
  explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// Factorization pivot fell below the singularity threshold. Carries the
// operation that failed plus context when it arose from a score matrix.
struct SingularMatrixError : std::runtime_error {
  std::string op;
  int n = 0;
  double max_abs_score = 0.0;
  SingularMatrixError(const std::string& op_name, const std::string& msg)
      : std::runtime_error(msg), op(op_name) {}
};

// Malformed input files, checkpoint mismatches, corpus misalignment.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or other numeric failure during training.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sanmt
