#pragma once
#include <cstdio>
#include <stdexcept>
#include <string>

namespace evrot {

// Configuration / usage problems map to CLI exit code 1, bad input data to 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Doubles are printed with %.17g everywhere so text files round-trip exactly
// and repeated runs are byte-identical.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace evrot
