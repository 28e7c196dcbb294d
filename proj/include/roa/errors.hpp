#pragma once

#include <stdexcept>
#include <string>

namespace roa {

/// Base of every error raised by the library. `kind()` names the concrete
/// error class so the CLI can report it and map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define ROA_DEFINE_ERROR(Name)                                              \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& message) : Error(#Name, message) {}    \
  }

// dynamics
ROA_DEFINE_ERROR(ParseError);
ROA_DEFINE_ERROR(EquilibriumError);
ROA_DEFINE_ERROR(TopologyError);
ROA_DEFINE_ERROR(DimensionError);

// integrator
ROA_DEFINE_ERROR(NonFiniteError);

// lyapunov
ROA_DEFINE_ERROR(NotConvergedError);
ROA_DEFINE_ERROR(DegenerateTrajectoryError);
ROA_DEFINE_ERROR(NotHurwitzError);

// gp
ROA_DEFINE_ERROR(FactorizationError);

// ucb
ROA_DEFINE_ERROR(EmptyDomainError);
ROA_DEFINE_ERROR(BudgetExhaustedError);

// certified
ROA_DEFINE_ERROR(CertificateVoidError);

// region / cli
ROA_DEFINE_ERROR(IndexError);
ROA_DEFINE_ERROR(ConsistencyError);
ROA_DEFINE_ERROR(ConfigError);

#undef ROA_DEFINE_ERROR

}  // namespace roa
