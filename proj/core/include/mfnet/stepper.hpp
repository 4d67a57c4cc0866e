#pragma once

namespace mfnet {

// Per-entry integrator arithmetic shared by every state type we advance
// (full weight stacks and the auxiliary pair states).  Keeping these in one
// place pins the exact floating-point expression, which the cross-path
// reproducibility guarantees depend on.

inline double euler_entry(double x, double h, double k) { return x + h * k; }

inline double stage_entry(double x, double c, double k) { return x + c * k; }

inline double rk4_entry(double x, double k1, double k2, double k3, double k4, double h) {
  return x + (h / 6.0) * (((k1 + 2.0 * k2) + 2.0 * k3) + k4);
}

enum class Scheme { Euler, Rk4 };

}  // namespace mfnet
