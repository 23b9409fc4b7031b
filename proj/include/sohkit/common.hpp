#pragma once

#include <stdexcept>
#include <string>

namespace sohkit {

// Single exception type for all validation and runtime failures in the
// toolkit. Messages name the offending field/bound so callers can report
// actionable errors without parsing.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace constants {
inline constexpr double faraday_C_per_mol = 96485.33212;
inline constexpr double gas_J_per_mol_K = 8.31446261815324;
}  // namespace constants

}  // namespace sohkit
