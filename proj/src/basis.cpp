#include "condcov/basis.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "condcov/errors.hpp"
#include "condcov/stats.hpp"

namespace condcov {

bool graded_less(const BasisIndex& a, const BasisIndex& b) {
  return std::make_tuple(a.total(), a.alpha[0], a.alpha[1], a.beta) <
         std::make_tuple(b.total(), b.alpha[0], b.alpha[1], b.beta);
}

double cosine_phi(int freq, double t, double lo, double len) {
  if (freq == 0) return 1.0 / std::sqrt(len);
  return std::sqrt(2.0 / len) * std::cos(freq * M_PI * (t - lo) / len);
}

int select_model_size(long n, const SizeRule& rule) {
  if (n < 4) throw ConfigError("select_model_size: n must be >= 4");
  switch (rule.kind) {
    case SizeRule::Kind::fixed:
      if (rule.fixed_m < 1)
        throw ConfigError("select_model_size: fixed size must be >= 1");
      return rule.fixed_m;
    case SizeRule::Kind::sqrt_n:
    default:
      return std::max(1, static_cast<int>(
                             std::ceil(std::sqrt(static_cast<double>(n)))));
  }
}

BasisModel::BasisModel(const Cube& cube, std::vector<BasisIndex> indices)
    : cube_(cube), indices_(std::move(indices)) {
  if (indices_.empty()) throw ConfigError("BasisModel: empty index set");
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    const auto& l = indices_[i];
    if (l.alpha[0] < 0 || l.alpha[1] < 0 || l.beta < 0)
      throw ConfigError("BasisModel: negative frequency");
    max_freq_ = std::max({max_freq_, l.alpha[0], l.alpha[1], l.beta});
    for (std::size_t j = i + 1; j < indices_.size(); ++j)
      if (indices_[j] == l) throw ConfigError("BasisModel: duplicate index");
  }
  if (std::find(indices_.begin(), indices_.end(), BasisIndex{}) ==
      indices_.end())
    throw ConfigError("BasisModel: constant index (0,0,0) must be included");
}

BasisModel BasisModel::graded(const Cube& cube, int m, bool swap_closed) {
  if (m < 1) throw ConfigError("BasisModel::graded: m must be >= 1");
  std::vector<BasisIndex> idx;
  for (int total = 0; static_cast<int>(idx.size()) < m; ++total) {
    for (int a0 = 0; a0 <= total; ++a0)
      for (int a1 = 0; a1 + a0 <= total; ++a1)
        idx.push_back(BasisIndex{{a0, a1}, total - a0 - a1});
  }
  std::sort(idx.begin(), idx.end(), graded_less);
  idx.resize(m);
  if (swap_closed) {
    std::set<std::tuple<int, int, int>> seen;
    for (const auto& l : idx) seen.insert({l.alpha[0], l.alpha[1], l.beta});
    for (const auto& l : std::vector<BasisIndex>(idx))
      if (!seen.count({l.alpha[1], l.alpha[0], l.beta})) {
        idx.push_back(BasisIndex{{l.alpha[1], l.alpha[0]}, l.beta});
        seen.insert({l.alpha[1], l.alpha[0], l.beta});
      }
    std::sort(idx.begin(), idx.end(), graded_less);
  }
  return BasisModel(cube, std::move(idx));
}

double BasisModel::eval(const BasisIndex& idx, const Point3& p) const {
  cube_.require_inside(p);
  return axis_phi(0, idx.alpha[0], p[0]) * axis_phi(1, idx.alpha[1], p[1]) *
         axis_phi(2, idx.beta, p[2]);
}

CoefficientSet coefficients(const std::function<double(const Point3&)>& f,
                            const BasisModel& model,
                            const QuadratureRule& rule) {
  CoefficientSet out;
  out.values.reserve(model.size());
  for (const auto& idx : model.indices()) {
    out.values.push_back(integrate(
        [&](const Point3& p) {
          return f(p) * model.axis_phi(0, idx.alpha[0], p[0]) *
                 model.axis_phi(1, idx.alpha[1], p[1]) *
                 model.axis_phi(2, idx.beta, p[2]);
        },
        rule));
  }
  return out;
}

double project(const CoefficientSet& coeffs, const BasisModel& model,
               const Point3& point) {
  if (static_cast<int>(coeffs.values.size()) != model.size())
    throw ConfigError("project: coefficient count does not match the model");
  model.cube().require_inside(point);
  KahanSum s;
  for (int l = 0; l < model.size(); ++l)
    s.add(coeffs.values[l] * model.eval(l, point));
  return s.value();
}

}  // namespace condcov
