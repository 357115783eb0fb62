#include "condcov/density.hpp"

#include <bit>
#include <cmath>

#include "condcov/errors.hpp"
#include "condcov/stats.hpp"

namespace condcov {

AnalyticTriDensity::AnalyticTriDensity(
    const Cube& cube, std::function<double(const Point3&)> f, int quad_order)
    : cube_(cube), f_(std::move(f)), rule_(build_rule(cube, quad_order)) {}

double AnalyticTriDensity::eval(const Point3& p) const {
  cube_.require_inside(p);
  const double v = f_(p);
  if (!std::isfinite(v))
    throw NumericError("AnalyticTriDensity: non-finite density value");
  return v;
}

SliceMoments AnalyticTriDensity::slice(double y) const {
  if (y < cube_.lo[2] - 1e-12 || y > cube_.hi[2] + 1e-12)
    throw DomainError("slice: y outside the cube");
  const std::uint64_t key = std::bit_cast<std::uint64_t>(y);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  KahanSum mass, momi, momj;
  for (int a = 0; a < rule_.order; ++a) {
    const double xi = rule_.nodes[0][a];
    const double wa = rule_.weights[0][a];
    for (int b = 0; b < rule_.order; ++b) {
      const double xj = rule_.nodes[1][b];
      const double w = wa * rule_.weights[1][b];
      const double v = f_(Point3{xi, xj, y});
      if (!std::isfinite(v))
        throw NumericError("slice: non-finite density value");
      mass.add(w * v);
      momi.add(w * xi * v);
      momj.add(w * xj * v);
    }
  }
  SliceMoments out;
  out.mass = mass.value();
  if (out.mass <= 0.0)
    throw NumericError("slice: nonpositive mass at y = " + std::to_string(y));
  out.mean_i = momi.value() / out.mass;
  out.mean_j = momj.value() / out.mass;
  std::lock_guard<std::mutex> lock(mutex_);
  memo_.emplace(key, out);
  return out;
}

}  // namespace condcov
