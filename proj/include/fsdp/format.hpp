#pragma once
#include <charconv>
#include <cmath>
#include <optional>
#include <string>

namespace fsdp {

/// Shortest round-trip decimal form; locale independent.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Empty field for a missing value.
inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace fsdp
