#pragma once

#include <Eigen/Core>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "condcov/cube.hpp"
#include "condcov/density.hpp"
#include "condcov/quadrature.hpp"

namespace condcov {

// Sample of (x_i, x_j, y) triples, already rescaled into the working cube.
struct TriSample {
  std::vector<Point3> rows;

  std::size_t size() const { return rows.size(); }
};

struct SplitSizes {
  long n1 = 0;
  long n2 = 0;
};

// Pilot/estimation split: n1 = max(10, round(n / ln n)).
SplitSizes split_sample(long n);

struct BandwidthRule {
  enum class Kind { silverman, fixed };
  Kind kind = Kind::silverman;
  Point3 fixed_h{0.0, 0.0, 0.0};

  static BandwidthRule silverman() { return {}; }
  static BandwidthRule fixed(const Point3& h) {
    return {Kind::fixed, h};
  }
};

struct ClipConfig {
  double lo = 1e-3;
  double hi = 50.0;
};

// Preliminary density estimate: product-Gaussian kernels reflected at all
// six faces, renormalized over the cube by quadrature, then clipped to
// [clip.lo, clip.hi]. Immutable after construction; slice moments are
// memoized behind a mutex.
class PilotDensity final : public TriDensityField {
public:
  PilotDensity(TriSample centers, const Cube& cube, const BandwidthRule& bw,
               const ClipConfig& clip, int quad_order = 24);

  const Cube& cube() const override { return cube_; }
  double eval(const Point3& p) const override;

  // Moments of the clipped density over the (x_i, x_j) face at fixed y,
  // computed with the rule chosen at fit time.
  SliceMoments slice(double y) const override;

  double marginal_xy(double y) const { return slice(y).mass; }
  // axis 0 -> mean of x_i, axis 1 -> mean of x_j.
  double cond_mean(double y, int axis) const;

  const Point3& bandwidths() const { return h_; }
  const ClipConfig& clip() const { return clip_; }
  double normalization() const { return norm_; }
  long center_count() const { return n1_; }
  const QuadratureRule& rule() const { return rule_; }

private:
  double raw(const Point3& p) const;  // unclipped, normalized kernel sum
  SliceMoments slice_uncached(double y) const;

  Cube cube_;
  std::vector<Point3> centers_;
  Point3 h_{0, 0, 0};
  ClipConfig clip_;
  long n1_ = 0;
  QuadratureRule rule_;
  double norm_ = 1.0;

  // Per-center kernel columns at the x_i / x_j quadrature nodes, their
  // integrals and first moments, and per-center node extrema used to
  // detect whether clipping can bite on a slice.
  Eigen::MatrixXd ax_, bx_;
  Eigen::VectorXd int_a_, int_b_, mom_a_, mom_b_;
  Eigen::VectorXd min_a_, max_a_, min_b_, max_b_;

  mutable std::mutex mutex_;
  mutable std::unordered_map<std::uint64_t, SliceMoments> memo_;
};

// Fit the pilot on the first-stage subsample. Throws DataError when a
// coordinate has zero spread and the Silverman rule is requested.
std::shared_ptr<const PilotDensity> fit_pilot(
    const TriSample& d1, const Cube& cube,
    const BandwidthRule& bw = BandwidthRule::silverman(),
    const ClipConfig& clip = {}, int quad_order = 24);

}  // namespace condcov
