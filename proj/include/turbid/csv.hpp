#pragma once

#include <cstdio>
#include <string>

namespace turbid {

// %.12g round-trips closely enough for plotting and keeps emitted files
// byte-identical across runs.
inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::string(buf);
}

}  // namespace turbid
