#pragma once

#include <stdexcept>
#include <string>

namespace lsreg {

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// r >= R0 or delta > R0.
struct TubularError : std::domain_error {
  using std::domain_error::domain_error;
};

// A weight exponent violates an integrability condition; what() names it.
struct IntegrabilityError : std::domain_error {
  using std::domain_error::domain_error;
};

// k_s exceeds the smoothness order of the density.
struct SmoothnessError : std::domain_error {
  using std::domain_error::domain_error;
};

struct UnsupportedOrderError : std::domain_error {
  using std::domain_error::domain_error;
};

// Kernel evaluated on its singularity.
struct SingularError : std::domain_error {
  using std::domain_error::domain_error;
};

// Sample spacing too coarse for the requested covering radius.
struct ResolutionError : std::domain_error {
  using std::domain_error::domain_error;
};

}  // namespace lsreg
