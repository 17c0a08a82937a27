#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sottac {

/// Flat parameter vector (policy theta or critic omega).
using ParamVector = std::vector<double>;

/// Discrete action index or continuous action vector.
using Action = std::variant<int, std::vector<double>>;

inline bool is_discrete(const Action& a) { return std::holds_alternative<int>(a); }
inline int discrete_action(const Action& a) { return std::get<int>(a); }
inline const std::vector<double>& continuous_action(const Action& a) {
  return std::get<std::vector<double>>(a);
}

/// Raised when a computation produces non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a caller breaks an operation's preconditions.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

bool all_finite(std::span<const double> x);

/// Short text summary (norm, min, max, first non-finite index) for error messages.
std::string describe_vector(std::span<const double> x);

}  // namespace sottac
