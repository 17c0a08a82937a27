#pragma once

// Flat parameter files: 4-byte magic, u32 version, u64 dimension, then
// dimension little-endian IEEE-754 doubles.

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include "sottac/common.hpp"

namespace sottac {

inline constexpr std::string_view kPolicyMagic = "SOTP";
inline constexpr std::string_view kCriticMagic = "SOTC";
inline constexpr std::uint32_t kParamFormatVersion = 1;

void write_params(std::ostream& out, std::string_view magic, std::span<const double> params);
/// Throws ContractViolation on a bad magic, version or truncated payload.
ParamVector read_params(std::istream& in, std::string_view magic);

void save_params(const std::string& path, std::string_view magic, std::span<const double> params);
ParamVector load_params(const std::string& path, std::string_view magic);

}  // namespace sottac
