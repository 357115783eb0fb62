#include "condcov/quadrature.hpp"

#include <cmath>
#include <string>

#include "condcov/errors.hpp"

namespace condcov {

void gauss_legendre(int order, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  nodes.assign(order, 0.0);
  weights.assign(order, 0.0);
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[order - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[order - 1 - i] = w;
  }
}

QuadratureRule build_rule(const Cube& cube, int order) {
  if (order < 2) throw ConfigError("build_rule: order must be >= 2");
  std::vector<double> x, w;
  gauss_legendre(order, x, w);
  QuadratureRule rule;
  rule.cube = cube;
  rule.order = order;
  for (int k = 0; k < 3; ++k) {
    const double c = 0.5 * (cube.lo[k] + cube.hi[k]);
    const double h = 0.5 * cube.length(k);
    rule.nodes[k].resize(order);
    rule.weights[k].resize(order);
    for (int i = 0; i < order; ++i) {
      rule.nodes[k][i] = c + h * x[i];
      rule.weights[k][i] = h * w[i];
    }
  }
  return rule;
}

namespace {

[[noreturn]] void throw_nonfinite(const Point3& p) {
  throw NumericError("integrand is not finite at node (" +
                     std::to_string(p[0]) + ", " + std::to_string(p[1]) +
                     ", " + std::to_string(p[2]) + ")");
}

}  // namespace

double integrate(const std::function<double(const Point3&)>& fn,
                 const QuadratureRule& rule, std::span<const int> dims,
                 const Point3& fixed) {
  for (int d : dims)
    if (d < 0 || d > 2) throw ConfigError("integrate: axis out of range");
  Point3 p = fixed;
  const int nd = static_cast<int>(dims.size());
  if (nd == 0) {
    const double v = fn(p);
    if (!std::isfinite(v)) throw_nonfinite(p);
    return v;
  }
  // Tensor sum with the innermost axis last in `dims`; compensated.
  std::array<int, 3> idx{0, 0, 0};
  double total = 0.0, comp = 0.0;
  for (;;) {
    double w = 1.0;
    for (int k = 0; k < nd; ++k) {
      const int ax = dims[k];
      p[ax] = rule.nodes[ax][idx[k]];
      w *= rule.weights[ax][idx[k]];
    }
    const double v = fn(p);
    if (!std::isfinite(v)) throw_nonfinite(p);
    const double term = w * v;
    const double t = total + term;
    comp += std::abs(total) >= std::abs(term) ? (total - t) + term
                                              : (term - t) + total;
    total = t;
    int k = nd - 1;
    for (; k >= 0; --k) {
      if (++idx[k] < rule.order) break;
      idx[k] = 0;
    }
    if (k < 0) break;
  }
  return total + comp;
}

double integrate(const std::function<double(const Point3&)>& fn,
                 const QuadratureRule& rule) {
  static constexpr std::array<int, 3> all{0, 1, 2};
  return integrate(fn, rule, all, Point3{0.0, 0.0, 0.0});
}

double integrate_xy(const std::function<double(double, double)>& fn,
                    const QuadratureRule& rule) {
  static constexpr std::array<int, 2> xy{0, 1};
  return integrate([&fn](const Point3& p) { return fn(p[0], p[1]); }, rule,
                   xy, Point3{0.0, 0.0, 0.0});
}

double integrate_axis(const std::function<double(double)>& fn,
                      const QuadratureRule& rule, int axis) {
  const std::array<int, 1> dims{axis};
  return integrate([&fn, axis](const Point3& p) { return fn(p[axis]); }, rule,
                   dims, Point3{0.0, 0.0, 0.0});
}

}  // namespace condcov
