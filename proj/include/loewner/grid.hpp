#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace loewner {

// Uniform grid 0 = t_0 < t_1 < ... < t_n = T. Experiment configs keep n a
// power of two so that dyadic partitions are exact sub-grids; truncated grids
// (e.g. the [0,t] grid of a reversed driver) may have any step count.
struct TimeGrid {
  double horizon = 1.0;
  int steps = 1;

  double dt() const { return horizon / steps; }
  double t(int i) const { return horizon * (static_cast<double>(i) / steps); }
  int size() const { return steps + 1; }

  bool operator==(const TimeGrid&) const = default;

  static TimeGrid make(double horizon, int steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
      throw std::invalid_argument("TimeGrid: horizon must be positive and finite");
    if (steps < 1) throw std::invalid_argument("TimeGrid: steps must be >= 1");
    return TimeGrid{horizon, steps};
  }

  // Index of a grid time, or throws. Tolerance is a tiny fraction of dt so
  // that times printed and re-read at full precision still resolve.
  int index_of(double time) const {
    const double x = time / dt();
    const int i = static_cast<int>(std::lround(x));
    if (i < 0 || i > steps || std::abs(x - i) > 1e-9)
      throw std::invalid_argument("TimeGrid: t=" + std::to_string(time) + " is not a grid point");
    return i;
  }

  TimeGrid prefix(int upto) const {
    if (upto < 1 || upto > steps) throw std::invalid_argument("TimeGrid: bad prefix length");
    return TimeGrid{t(upto), upto};
  }
};

enum class Interp { piecewise_linear, piecewise_constant_midpoint };

// A sampled continuous driver U with U_0 = 0; the universal input.
struct DriverPath {
  TimeGrid grid;
  std::vector<double> values;  // u_i = U(t_i), size steps+1
  Interp interp = Interp::piecewise_linear;

  double u(int i) const { return values[static_cast<std::size_t>(i)]; }

  void validate() const {
    if (static_cast<int>(values.size()) != grid.size())
      throw std::invalid_argument("DriverPath: values size does not match grid");
    if (values.front() != 0.0)
      throw std::invalid_argument("DriverPath: U_0 must be 0");
    for (double v : values)
      if (!std::isfinite(v)) throw std::invalid_argument("DriverPath: non-finite value");
  }

  // Linear interpolation; clamped to [0,T].
  double value_at(double time) const {
    const double x = time / grid.dt();
    if (x <= 0.0) return values.front();
    if (x >= grid.steps) return values.back();
    const int j = static_cast<int>(x);
    const double w = x - j;
    return (1.0 - w) * values[j] + w * values[j + 1];
  }
};

}  // namespace loewner
