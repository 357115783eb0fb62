#include "condcov/estimator.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>

#include <nlohmann/json.hpp>

#include "condcov/errors.hpp"
#include "condcov/functionals.hpp"
#include "condcov/quadrature.hpp"
#include "condcov/stats.hpp"

namespace condcov {

void EstimatorConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0))
    throw ConfigError("EstimatorConfig: delta must lie in (0,1)");
  if (quad_order < 2)
    throw ConfigError("EstimatorConfig: quadrature order must be >= 2");
  if (!(cube_margin >= 0.0))
    throw ConfigError("EstimatorConfig: cube margin must be >= 0");
  if (!(clip.lo > 0.0 && clip.lo < clip.hi))
    throw ConfigError("EstimatorConfig: need 0 < clip.lo < clip.hi");
  if (size_rule.kind == SizeRule::Kind::fixed && size_rule.fixed_m < 1)
    throw ConfigError("EstimatorConfig: fixed basis size must be >= 1");
}

namespace {

struct AxisMap {
  double lo = 0.0;
  double scale = 1.0;  // original = lo + scale * unit
  double to_unit(double v) const { return (v - lo) / scale; }
};

AxisMap axis_map_from_data(const Eigen::VectorXd& col, double margin) {
  const double lo = col.minCoeff();
  const double hi = col.maxCoeff();
  if (!(hi > lo))
    throw DataError("estimate: a selected column has zero spread");
  const double pad = margin * (hi - lo);
  return AxisMap{lo - pad, (hi - lo) + 2.0 * pad};
}

AxisMap axis_map_from_bounds(double lo, double hi) {
  if (!(hi > lo)) throw ConfigError("estimate: invalid fixed bounds");
  return AxisMap{lo, hi - lo};
}

// Shared estimation context: permutation and split, identical across all
// pairs of one call so entries stay comparable.
struct SplitPlan {
  std::vector<int> order;
  long n1 = 0;
  long n2 = 0;
};

SplitPlan make_split_plan(long n, std::uint64_t seed) {
  const SplitSizes sizes = split_sample(n);
  SplitPlan plan;
  plan.n1 = sizes.n1;
  plan.n2 = sizes.n2;
  plan.order.resize(n);
  std::iota(plan.order.begin(), plan.order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, 17));
  std::shuffle(plan.order.begin(), plan.order.end(), rng);
  return plan;
}

struct PairResult {
  PairEstimate estimate;
  Eigen::VectorXd influence;  // per-row, original scale (up to a constant)
};

PairResult estimate_pair_impl(const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y, int i0, int j0,
                              const EstimatorConfig& cfg,
                              const SplitPlan& plan) {
  const long n = x.rows();
  AxisMap map_i, map_j, map_y;
  if (cfg.bounds) {
    const auto& b = *cfg.bounds;
    map_i = axis_map_from_bounds(b(0, i0), b(1, i0));
    map_j = axis_map_from_bounds(b(0, j0), b(1, j0));
    map_y = axis_map_from_bounds(b(0, b.cols() - 1), b(1, b.cols() - 1));
  } else {
    map_i = axis_map_from_data(x.col(i0), cfg.cube_margin);
    map_j = axis_map_from_data(x.col(j0), cfg.cube_margin);
    map_y = axis_map_from_data(y, cfg.cube_margin);
  }

  const Cube unit = Cube::unit();
  TriSample d1, d2;
  d1.rows.reserve(plan.n1);
  d2.rows.reserve(plan.n2);
  for (long k = 0; k < n; ++k) {
    const int r = plan.order[k];
    const Point3 p{map_i.to_unit(x(r, i0)), map_j.to_unit(x(r, j0)),
                   map_y.to_unit(y(r))};
    if (!unit.contains(p))
      throw DataError("estimate: a row falls outside the configured bounds");
    (k < plan.n1 ? d1 : d2).rows.push_back(p);
  }

  const auto pilot =
      fit_pilot(d1, unit, cfg.bandwidth, cfg.clip, cfg.quad_order);
  const QuadratureRule& rule = pilot->rule();

  // Linear term and per-row influences. The back-transformed estimator
  // has influence s_i s_j H1~ + lo_i s_j xj~ + lo_j s_i xi~ per row, so
  // its variance matches Var(H1) on the original scale.
  const long n2 = plan.n2;
  Eigen::VectorXd influence(n2);
  KahanSum lin, mi_sum, mj_sum;
  for (long k = 0; k < n2; ++k) {
    const Point3& r = d2.rows[k];
    const SliceMoments s = pilot->slice(r[2]);
    const double h1v = r[0] * s.mean_j + r[1] * s.mean_i - s.mean_i * s.mean_j;
    lin.add(h1v);
    mi_sum.add(r[0]);
    mj_sum.add(r[1]);
    influence(k) = map_i.scale * map_j.scale * h1v +
                   map_i.lo * map_j.scale * r[1] +
                   map_j.lo * map_i.scale * r[0];
  }
  const double linear = lin.value() / static_cast<double>(n2);
  const double mean_i = mi_sum.value() / static_cast<double>(n2);
  const double mean_j = mj_sum.value() / static_cast<double>(n2);

  const int m = select_model_size(n2, cfg.size_rule);
  const BasisModel model = BasisModel::graded(unit, m, /*swap_closed=*/true);
  const EtaFunction eta = make_eta_h2(*pilot);
  const QuadEstimate quad = quad_estimate(eta, d2, model, rule);

  const double t_unit = linear + quad.value;
  const double t_hat = map_i.lo * map_j.lo + map_i.lo * map_j.scale * mean_j +
                       map_j.lo * map_i.scale * mean_i +
                       map_i.scale * map_j.scale * t_unit;

  PairResult out;
  out.influence = std::move(influence);
  PairEstimate& pe = out.estimate;
  pe.i = i0 + 1;
  pe.j = j0 + 1;
  pe.t_hat = t_hat;
  pe.c_hat = sample_variance(
      std::span<const double>(out.influence.data(), out.influence.size()));
  pe.n1 = plan.n1;
  pe.n2 = n2;
  pe.basis_size = model.size();
  pe.small_sample = quad.small_sample;
  const double half = normal_quantile(1.0 - cfg.delta / 2.0) *
                      std::sqrt(pe.c_hat / static_cast<double>(n2));
  pe.ci_lo = t_hat - half;
  pe.ci_hi = t_hat + half;
  return out;
}

void check_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.cols() < 1) throw ConfigError("estimate: need at least one column");
  if (x.rows() != y.size())
    throw DataError("estimate: x and y row counts differ");
  if (x.rows() < 20) throw DataError("estimate: need at least 20 rows");
  if (!x.allFinite() || !y.allFinite())
    throw DataError("estimate: input contains non-finite values");
}

int sign_anchor(const Eigen::VectorXd& v) {
  const double scale = v.cwiseAbs().maxCoeff();
  for (int k = 0; k < v.size(); ++k)
    if (std::abs(v(k)) > 1e-12 * std::max(1.0, scale)) return k;
  return -1;
}

}  // namespace

PairEstimate estimate_pair(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           int i, int j, const EstimatorConfig& cfg) {
  cfg.validate();
  check_inputs(x, y);
  const int p = static_cast<int>(x.cols());
  if (i < 1 || i > p || j < 1 || j > p)
    throw ConfigError("estimate_pair: coordinate index out of range");
  if (cfg.bounds && (cfg.bounds->rows() != 2 || cfg.bounds->cols() != p + 1))
    throw ConfigError("estimate_pair: bounds must be 2 x (p+1)");
  const SplitPlan plan = make_split_plan(x.rows(), cfg.seed);
  const int a = std::min(i, j) - 1;
  const int b = std::max(i, j) - 1;
  return estimate_pair_impl(x, y, a, b, cfg, plan).estimate;
}

double asymptotic_variance(const TriDensityField& field,
                           const TriSample& d2) {
  if (d2.rows.size() < 2)
    throw DataError("asymptotic_variance: need at least 2 rows");
  std::vector<double> vals;
  vals.reserve(d2.rows.size());
  for (const auto& r : d2.rows) vals.push_back(h1(field, r[0], r[1], r[2]));
  return sample_variance(vals);
}

Eigen::VectorXd vech(const Eigen::MatrixXd& mat, double sym_tol) {
  const int p = static_cast<int>(mat.rows());
  if (mat.cols() != p) throw ConfigError("vech: matrix must be square");
  const double scale = std::max(1.0, mat.cwiseAbs().maxCoeff());
  if ((mat - mat.transpose()).cwiseAbs().maxCoeff() > sym_tol * scale)
    throw NumericError("vech: matrix is not symmetric within tolerance");
  Eigen::VectorXd out(p * (p + 1) / 2);
  int k = 0;
  for (int j = 0; j < p; ++j)
    for (int i = j; i < p; ++i) out(k++) = mat(i, j);
  return out;
}

Eigen::MatrixXd unvech(const Eigen::VectorXd& v) {
  const int q = static_cast<int>(v.size());
  const int p = static_cast<int>(std::lround((std::sqrt(8.0 * q + 1) - 1) / 2));
  if (p * (p + 1) / 2 != q)
    throw ConfigError("unvech: length is not a triangular number");
  Eigen::MatrixXd out(p, p);
  int k = 0;
  for (int j = 0; j < p; ++j)
    for (int i = j; i < p; ++i) {
      out(i, j) = v(k);
      out(j, i) = v(k);
      ++k;
    }
  return out;
}

Eigen::MatrixXd vech_covariance(const Eigen::MatrixXd& influence) {
  const long n = influence.rows();
  if (n < 2) throw DataError("vech_covariance: need at least 2 rows");
  const Eigen::RowVectorXd mu = influence.colwise().mean();
  const Eigen::MatrixXd centered = influence.rowwise() - mu;
  return centered.transpose() * centered / static_cast<double>(n - 1);
}

EdrDirections edr_directions(const Eigen::MatrixXd& cov_matrix, int k) {
  const int p = static_cast<int>(cov_matrix.rows());
  if (cov_matrix.cols() != p)
    throw ConfigError("edr_directions: matrix must be square");
  if (k < 1 || k > p)
    throw ConfigError("edr_directions: k must lie in 1..p");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      0.5 * (cov_matrix + cov_matrix.transpose()));
  if (solver.info() != Eigen::Success)
    throw NumericError("edr_directions: eigen decomposition failed");
  EdrDirections out;
  out.eigenvalues.resize(k);
  out.eigenvectors.resize(p, k);
  for (int c = 0; c < k; ++c) {
    out.eigenvalues(c) = solver.eigenvalues()(p - 1 - c);
    Eigen::VectorXd vec = solver.eigenvectors().col(p - 1 - c);
    const int anchor = sign_anchor(vec);
    if (anchor >= 0 && vec(anchor) < 0.0) vec = -vec;
    out.eigenvectors.col(c) = vec;
  }
  return out;
}

MatrixEstimate estimate_matrix(const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y,
                               const EstimatorConfig& cfg) {
  cfg.validate();
  check_inputs(x, y);
  const int p = static_cast<int>(x.cols());
  if (cfg.bounds && (cfg.bounds->rows() != 2 || cfg.bounds->cols() != p + 1))
    throw ConfigError("estimate_matrix: bounds must be 2 x (p+1)");
  const SplitPlan plan = make_split_plan(x.rows(), cfg.seed);

  // vech slot order: (j, i) with i >= j, column-major lower triangle.
  std::vector<std::pair<int, int>> slots;
  for (int j = 0; j < p; ++j)
    for (int i = j; i < p; ++i) slots.emplace_back(j, i);
  const int q = static_cast<int>(slots.size());

  std::vector<PairResult> results(q);
  parallel_for(
      q, cfg.threads,
      [&](std::size_t s) {
        const auto [a, b] = slots[s];
        results[s] = estimate_pair_impl(x, y, a, b, cfg, plan);
      });

  MatrixEstimate est;
  est.seed = cfg.seed;
  est.t_matrix.resize(p, p);
  for (int s = 0; s < q; ++s) {
    const auto [a, b] = slots[s];
    est.t_matrix(a, b) = results[s].estimate.t_hat;
    est.t_matrix(b, a) = results[s].estimate.t_hat;
    est.per_pair.push_back(results[s].estimate);
  }

  Eigen::VectorXd mean_x(p);
  for (int c = 0; c < p; ++c) {
    KahanSum s;
    for (long r = 0; r < x.rows(); ++r) s.add(x(r, c));
    mean_x(c) = s.value() / static_cast<double>(x.rows());
  }
  est.mean_outer = mean_x * mean_x.transpose();
  Eigen::MatrixXd cov = est.t_matrix - est.mean_outer;
  est.cov_matrix = 0.5 * (cov + cov.transpose());
  est.vech_values = vech(est.cov_matrix);

  Eigen::MatrixXd influence(plan.n2, q);
  for (int s = 0; s < q; ++s) influence.col(s) = results[s].influence;
  est.vech_cov = vech_covariance(influence);

  const EdrDirections full = edr_directions(est.cov_matrix, p);
  est.eigenvalues_raw = full.eigenvalues;
  est.eigenvectors = full.eigenvectors;
  est.eigenvalues = full.eigenvalues.cwiseMax(0.0);
  est.psd_clipped = (full.eigenvalues.array() < 0.0).any();
  return est;
}

std::string to_json(const MatrixEstimate& est, const EstimatorConfig& cfg) {
  using nlohmann::json;
  auto matrix = [](const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  auto vector = [](const Eigen::VectorXd& v) {
    json out = json::array();
    for (int k = 0; k < v.size(); ++k) out.push_back(v(k));
    return out;
  };

  json per_pair = json::array();
  for (const auto& pe : est.per_pair) {
    per_pair.push_back(json{{"i", pe.i},
                            {"j", pe.j},
                            {"t_hat", pe.t_hat},
                            {"c_hat", pe.c_hat},
                            {"ci_lo", pe.ci_lo},
                            {"ci_hi", pe.ci_hi},
                            {"n1", pe.n1},
                            {"n2", pe.n2},
                            {"basis_size", pe.basis_size},
                            {"small_sample", pe.small_sample}});
  }

  json config_echo{
      {"confidence", 1.0 - cfg.delta},
      {"quad_order", cfg.quad_order},
      {"clip_lo", cfg.clip.lo},
      {"clip_hi", cfg.clip.hi},
      {"cube_margin", cfg.cube_margin},
      {"basis_rule", cfg.size_rule.kind == SizeRule::Kind::fixed
                         ? json(cfg.size_rule.fixed_m)
                         : json("ceil(sqrt(n2))")},
      {"bandwidth_rule", cfg.bandwidth.kind == BandwidthRule::Kind::fixed
                             ? json({cfg.bandwidth.fixed_h[0],
                                     cfg.bandwidth.fixed_h[1],
                                     cfg.bandwidth.fixed_h[2]})
                             : json("silverman")},
  };

  json out{{"t_matrix", matrix(est.t_matrix)},
           {"cov_matrix", matrix(est.cov_matrix)},
           {"vech", vector(est.vech_values)},
           {"vech_cov", matrix(est.vech_cov)},
           {"eigenvalues", vector(est.eigenvalues)},
           {"eigenvalues_raw", vector(est.eigenvalues_raw)},
           {"eigenvectors", matrix(est.eigenvectors)},
           {"psd_clipped", est.psd_clipped},
           {"per_pair", std::move(per_pair)},
           {"config_echo", std::move(config_echo)},
           {"seed", est.seed}};
  return out.dump(2) + "\n";
}

}  // namespace condcov
