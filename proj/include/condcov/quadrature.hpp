#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "condcov/cube.hpp"

namespace condcov {

// Tensor-product Gauss-Legendre rule on a Cube. Weights on each axis sum
// to the axis length, so constants integrate exactly.
struct QuadratureRule {
  Cube cube;
  int order = 0;
  std::array<std::vector<double>, 3> nodes;
  std::array<std::vector<double>, 3> weights;
};

// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int order, std::vector<double>& nodes,
                    std::vector<double>& weights);

// Nodes and weights mapped affinely to each axis of the cube.
QuadratureRule build_rule(const Cube& cube, int order);

// Tensor-product integral of fn over the axes listed in `dims`; the
// remaining coordinates are taken from `fixed`. Exact for per-axis
// polynomials of degree <= 2*order - 1.
double integrate(const std::function<double(const Point3&)>& fn,
                 const QuadratureRule& rule, std::span<const int> dims,
                 const Point3& fixed);

// Integral over all three axes.
double integrate(const std::function<double(const Point3&)>& fn,
                 const QuadratureRule& rule);

// Integral over (x_i, x_j) at fixed y.
double integrate_xy(const std::function<double(double, double)>& fn,
                    const QuadratureRule& rule);

// 1-D integral along one axis of the rule.
double integrate_axis(const std::function<double(double)>& fn,
                      const QuadratureRule& rule, int axis);

}  // namespace condcov
