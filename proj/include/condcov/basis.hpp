#pragma once

#include <compare>
#include <functional>
#include <vector>

#include "condcov/cube.hpp"
#include "condcov/quadrature.hpp"

namespace condcov {

// Frequency triple of one tensor basis function: `alpha` indexes the 2-D
// factor over (x_i, x_j), `beta` the 1-D factor over y.
struct BasisIndex {
  std::array<int, 2> alpha{0, 0};
  int beta = 0;

  int total() const { return alpha[0] + alpha[1] + beta; }
  friend bool operator==(const BasisIndex&, const BasisIndex&) = default;
};

// Graded order: by total frequency, then lexicographic.
bool graded_less(const BasisIndex& a, const BasisIndex& b);

// One member of the 1-D orthonormal cosine family on [lo, lo+len]:
//   phi_0 = 1/sqrt(len),  phi_k(t) = sqrt(2/len) cos(k pi (t-lo)/len).
double cosine_phi(int freq, double t, double lo, double len);

struct SizeRule {
  enum class Kind { sqrt_n, fixed };
  Kind kind = Kind::sqrt_n;
  int fixed_m = 0;

  static SizeRule sqrt_default() { return {}; }
  static SizeRule fixed(int m) { return {Kind::fixed, m}; }
};

// Size of the truncation set: default ceil(sqrt(n)), so that m/n -> 0.
int select_model_size(long n, const SizeRule& rule = {});

// Truncated tensor-product cosine basis on a cube.
class BasisModel {
public:
  BasisModel(const Cube& cube, std::vector<BasisIndex> indices);

  // The m graded-smallest indices. With `swap_closed`, partner indices
  // (alpha swapped) on the boundary are pulled in as well so the set is
  // invariant under exchanging the two x axes; the pair estimator needs
  // that for exact i<->j symmetry.
  static BasisModel graded(const Cube& cube, int m, bool swap_closed = false);

  const Cube& cube() const { return cube_; }
  const std::vector<BasisIndex>& indices() const { return indices_; }
  int size() const { return static_cast<int>(indices_.size()); }
  int max_frequency() const { return max_freq_; }

  double eval(const BasisIndex& idx, const Point3& p) const;
  double eval(int which, const Point3& p) const {
    return eval(indices_[which], p);
  }

  // 1-D factor on one axis (0: x_i, 1: x_j, 2: y).
  double axis_phi(int axis, int freq, double t) const {
    return cosine_phi(freq, t, cube_.lo[axis], cube_.length(axis));
  }

private:
  Cube cube_;
  std::vector<BasisIndex> indices_;
  int max_freq_ = 0;
};

struct CoefficientSet {
  std::vector<double> values;
};

// Scalar products a_l = <p_l, f> for every index of the model.
CoefficientSet coefficients(const std::function<double(const Point3&)>& f,
                            const BasisModel& model,
                            const QuadratureRule& rule);

// Truncated projection  sum_l a_l p_l(point).
double project(const CoefficientSet& coeffs, const BasisModel& model,
               const Point3& point);

}  // namespace condcov
