#include "condcov/pilot.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "condcov/errors.hpp"
#include "condcov/stats.hpp"

namespace condcov {

SplitSizes split_sample(long n) {
  if (n < 20) throw DataError("split_sample: need at least 20 rows");
  const long n1 =
      std::max<long>(10, std::lround(static_cast<double>(n) /
                                     std::log(static_cast<double>(n))));
  return SplitSizes{n1, n - n1};
}

namespace {

// 1-D Gaussian kernel reflected at both ends of [lo, hi].
inline double reflected_kernel(double x, double c, double h, double lo,
                               double hi) {
  const double inv = 1.0 / (h * std::sqrt(2.0 * M_PI));
  auto k = [&](double u) {
    const double z = u / h;
    return inv * std::exp(-0.5 * z * z);
  };
  return k(x - c) + k(x - (2.0 * lo - c)) + k(x - (2.0 * hi - c));
}

}  // namespace

PilotDensity::PilotDensity(TriSample centers, const Cube& cube,
                           const BandwidthRule& bw, const ClipConfig& clip,
                           int quad_order)
    : cube_(cube),
      centers_(std::move(centers.rows)),
      clip_(clip),
      n1_(static_cast<long>(centers_.size())),
      rule_(build_rule(cube, quad_order)) {
  if (n1_ < 1) throw DataError("PilotDensity: no centers");
  if (!(clip_.lo > 0.0 && clip_.lo < clip_.hi))
    throw ConfigError("PilotDensity: need 0 < clip.lo < clip.hi");
  for (const auto& r : centers_) cube_.require_inside(r);

  if (bw.kind == BandwidthRule::Kind::fixed) {
    h_ = bw.fixed_h;
    for (int k = 0; k < 3; ++k)
      if (!(h_[k] > 0.0)) throw ConfigError("PilotDensity: bandwidth <= 0");
  } else {
    for (int k = 0; k < 3; ++k) {
      KahanSum s, s2;
      for (const auto& r : centers_) s.add(r[k]);
      const double mu = s.value() / n1_;
      for (const auto& r : centers_) s2.add((r[k] - mu) * (r[k] - mu));
      const double var = n1_ > 1 ? s2.value() / (n1_ - 1) : 0.0;
      if (!(var > 0.0))
        throw DataError("PilotDensity: zero variance on axis " +
                        std::to_string(k));
      h_[k] = 1.06 * std::sqrt(var) *
              std::pow(static_cast<double>(n1_), -0.2);
    }
  }

  const int q = rule_.order;
  ax_.resize(q, n1_);
  bx_.resize(q, n1_);
  Eigen::MatrixXd cy(q, n1_);
  for (long c = 0; c < n1_; ++c) {
    for (int a = 0; a < q; ++a) {
      ax_(a, c) = reflected_kernel(rule_.nodes[0][a], centers_[c][0], h_[0],
                                   cube_.lo[0], cube_.hi[0]);
      bx_(a, c) = reflected_kernel(rule_.nodes[1][a], centers_[c][1], h_[1],
                                   cube_.lo[1], cube_.hi[1]);
      cy(a, c) = reflected_kernel(rule_.nodes[2][a], centers_[c][2], h_[2],
                                  cube_.lo[2], cube_.hi[2]);
    }
  }
  Eigen::Map<const Eigen::VectorXd> wx(rule_.weights[0].data(), q);
  Eigen::Map<const Eigen::VectorXd> wy(rule_.weights[1].data(), q);
  Eigen::Map<const Eigen::VectorXd> wz(rule_.weights[2].data(), q);
  Eigen::Map<const Eigen::VectorXd> nx(rule_.nodes[0].data(), q);
  Eigen::Map<const Eigen::VectorXd> ny(rule_.nodes[1].data(), q);
  int_a_ = ax_.transpose() * wx;
  int_b_ = bx_.transpose() * wy;
  mom_a_ = ax_.transpose() * wx.cwiseProduct(nx);
  mom_b_ = bx_.transpose() * wy.cwiseProduct(ny);
  min_a_ = ax_.colwise().minCoeff().transpose();
  max_a_ = ax_.colwise().maxCoeff().transpose();
  min_b_ = bx_.colwise().minCoeff().transpose();
  max_b_ = bx_.colwise().maxCoeff().transpose();
  const Eigen::VectorXd int_c = cy.transpose() * wz;

  // Renormalize the unclipped kernel sum so it integrates to one under
  // the fit-time rule, then clip.
  norm_ = int_a_.cwiseProduct(int_b_).cwiseProduct(int_c).sum() / n1_;
  if (!(norm_ > 0.0) || !std::isfinite(norm_))
    throw NumericError("PilotDensity: degenerate normalization");
}

double PilotDensity::raw(const Point3& p) const {
  KahanSum s;
  for (const auto& c : centers_) {
    s.add(reflected_kernel(p[0], c[0], h_[0], cube_.lo[0], cube_.hi[0]) *
          reflected_kernel(p[1], c[1], h_[1], cube_.lo[1], cube_.hi[1]) *
          reflected_kernel(p[2], c[2], h_[2], cube_.lo[2], cube_.hi[2]));
  }
  return s.value() / (n1_ * norm_);
}

double PilotDensity::eval(const Point3& p) const {
  cube_.require_inside(p);
  return std::clamp(raw(p), clip_.lo, clip_.hi);
}

SliceMoments PilotDensity::slice_uncached(double y) const {
  const int q = rule_.order;
  Eigen::VectorXd cval(n1_);
  for (long c = 0; c < n1_; ++c)
    cval(c) = reflected_kernel(y, centers_[c][2], h_[2], cube_.lo[2],
                               cube_.hi[2]);
  const double scale = 1.0 / (n1_ * norm_);

  // If no grid value can cross a clip bound, the moments factorize
  // through the per-center integrals.
  const double lo_bound =
      scale * min_a_.cwiseProduct(min_b_).dot(cval);
  const double hi_bound =
      scale * max_a_.cwiseProduct(max_b_).dot(cval);
  SliceMoments out;
  if (lo_bound >= clip_.lo && hi_bound <= clip_.hi) {
    out.mass = scale * int_a_.cwiseProduct(int_b_).dot(cval);
    out.mean_i = scale * mom_a_.cwiseProduct(int_b_).dot(cval) / out.mass;
    out.mean_j = scale * int_a_.cwiseProduct(mom_b_).dot(cval) / out.mass;
    return out;
  }

  // Clipping may bite: evaluate the full (x_i, x_j) grid and clip nodes.
  Eigen::MatrixXd grid =
      scale * (ax_ * cval.asDiagonal() * bx_.transpose());
  grid = grid.cwiseMax(clip_.lo).cwiseMin(clip_.hi);
  Eigen::Map<const Eigen::VectorXd> wx(rule_.weights[0].data(), q);
  Eigen::Map<const Eigen::VectorXd> wy(rule_.weights[1].data(), q);
  Eigen::Map<const Eigen::VectorXd> nx(rule_.nodes[0].data(), q);
  Eigen::Map<const Eigen::VectorXd> ny(rule_.nodes[1].data(), q);
  const Eigen::VectorXd gw = grid * wy;
  out.mass = wx.dot(gw);
  out.mean_i = wx.cwiseProduct(nx).dot(gw) / out.mass;
  out.mean_j = wx.dot(grid * wy.cwiseProduct(ny)) / out.mass;
  return out;
}

SliceMoments PilotDensity::slice(double y) const {
  if (y < cube_.lo[2] - 1e-12 || y > cube_.hi[2] + 1e-12)
    throw DomainError("PilotDensity::slice: y outside the cube");
  const std::uint64_t key = std::bit_cast<std::uint64_t>(y);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  SliceMoments out = slice_uncached(y);
  std::lock_guard<std::mutex> lock(mutex_);
  memo_.emplace(key, out);
  return out;
}

double PilotDensity::cond_mean(double y, int axis) const {
  if (axis != 0 && axis != 1)
    throw ConfigError("cond_mean: axis must be 0 or 1");
  const SliceMoments s = slice(y);
  return axis == 0 ? s.mean_i : s.mean_j;
}

std::shared_ptr<const PilotDensity> fit_pilot(const TriSample& d1,
                                              const Cube& cube,
                                              const BandwidthRule& bw,
                                              const ClipConfig& clip,
                                              int quad_order) {
  return std::make_shared<const PilotDensity>(d1, cube, bw, clip, quad_order);
}

}  // namespace condcov
