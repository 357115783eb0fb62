#pragma once

#include <array>
#include <cmath>
#include <string>

#include "condcov/errors.hpp"

namespace condcov {

using Point3 = std::array<double, 3>;

// Axis-aligned box for one coordinate pair (x_i, x_j) and the response y.
struct Cube {
  Point3 lo{0.0, 0.0, 0.0};
  Point3 hi{1.0, 1.0, 1.0};

  Cube() = default;
  Cube(const Point3& lo_, const Point3& hi_) : lo(lo_), hi(hi_) {
    for (int k = 0; k < 3; ++k) {
      if (!(std::isfinite(lo[k]) && std::isfinite(hi[k]) && lo[k] < hi[k]))
        throw ConfigError("Cube: lo[" + std::to_string(k) +
                          "] must be finite and below hi");
    }
  }

  static Cube unit() { return Cube{}; }

  double length(int axis) const { return hi[axis] - lo[axis]; }

  double volume() const {
    return length(0) * length(1) * length(2);
  }

  // Area of the (x_i, x_j) face.
  double area_xy() const { return length(0) * length(1); }

  bool contains(const Point3& p, double tol = 1e-12) const {
    for (int k = 0; k < 3; ++k) {
      const double slack = tol * std::max(1.0, std::abs(length(k)));
      if (p[k] < lo[k] - slack || p[k] > hi[k] + slack) return false;
    }
    return true;
  }

  void require_inside(const Point3& p) const {
    if (!contains(p))
      throw DomainError("point (" + std::to_string(p[0]) + ", " +
                        std::to_string(p[1]) + ", " + std::to_string(p[2]) +
                        ") lies outside the cube");
  }
};

}  // namespace condcov
