#pragma once

#include <stdexcept>
#include <string>

namespace clab {

// Default tolerances shared by every verifier.
namespace tol {
inline constexpr double kDomain = 1e-12;      // slack on domain comparisons
inline constexpr double kIdentity = 1e-12;    // exact identities
inline constexpr double kInequality = 1e-9;   // inequality margins
inline constexpr double kQuadrature = 1e-8;   // bump normalisation
inline constexpr double kDpStop = 1e-5;       // value-iteration stopping rule
}  // namespace tol

enum class ErrorKind {
  InvalidArgument,
  Domain,          // point outside f^p <= F, 0 <= M <= C
  Infeasible,      // profile / schedule / config cannot be realised
  Parse,           // malformed input document
  Measurability,   // sequence not adapted to the filtration
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

}  // namespace clab
