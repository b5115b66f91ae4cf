#pragma once

#include <cmath>

#include <json.hpp>

namespace critlab {

/// JSON has no infinities; window bounds such as -inf are written as strings.
inline nlohmann::json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace critlab
