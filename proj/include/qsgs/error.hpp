#ifndef QSGS_ERROR_HPP
#define QSGS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace qsgs {

enum class ErrorCode {
  InvalidMetric,
  InsufficientData,
  Orientation,
  NonPeriodicOrbit,
  DomainViolation,
  DegenerateLevel,
  SpectralFailure,
  SingularOperator,
  Streamline,
  Solvability,
  Gauge,
  Diffeomorphism,
  Extension,
  Divergence,
  DegenerateSymmetry,
  GateFailure,
  Config,
};

const char* error_name(ErrorCode c);

// Process exit status for the CLI; 0 is reserved for success.
int exit_code(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what),
        code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qsgs

#endif
