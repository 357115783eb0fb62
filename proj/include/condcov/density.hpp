#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <unordered_map>

#include "condcov/cube.hpp"
#include "condcov/quadrature.hpp"

namespace condcov {

// Integrals of a density over one y-slice of the cube:
//   mass   = int f(x_i, x_j, y) dx_i dx_j
//   mean_i = int x_i f dx_i dx_j / mass,  mean_j likewise.
struct SliceMoments {
  double mass = 0.0;
  double mean_i = 0.0;
  double mean_j = 0.0;
};

// A positive density-like field on a cube. The estimator only queries a
// field through pointwise values and y-slice moments, so the pilot
// estimate and exact analytic densities are interchangeable here.
class TriDensityField {
public:
  virtual ~TriDensityField() = default;
  virtual const Cube& cube() const = 0;
  virtual double eval(const Point3& p) const = 0;
  virtual SliceMoments slice(double y) const = 0;
};

// Field defined by a closed-form density; slice moments computed by
// quadrature and memoized (thread-safe).
class AnalyticTriDensity final : public TriDensityField {
public:
  AnalyticTriDensity(const Cube& cube,
                     std::function<double(const Point3&)> f,
                     int quad_order = 24);

  const Cube& cube() const override { return cube_; }
  double eval(const Point3& p) const override;
  SliceMoments slice(double y) const override;

private:
  Cube cube_;
  std::function<double(const Point3&)> f_;
  QuadratureRule rule_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::uint64_t, SliceMoments> memo_;
};

}  // namespace condcov
