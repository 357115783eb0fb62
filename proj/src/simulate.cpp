#include "condcov/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "condcov/errors.hpp"
#include "condcov/functionals.hpp"
#include "condcov/stats.hpp"

namespace condcov {

namespace {

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Variance of a standard normal truncated to [-b, b].
double truncated_normal_variance(double b) {
  const double mass = 2.0 * std_normal_cdf(b) - 1.0;
  return 1.0 - 2.0 * b * std_normal_pdf(b) / mass;
}

Eigen::VectorXd default_beta(int p) {
  Eigen::VectorXd beta(p);
  double v = 1.0;
  for (int k = 0; k < p; ++k, v *= 0.5) beta(k) = v;
  return beta;
}

}  // namespace

ModelSpec ModelSpec::independent_uniform(int p) {
  ModelSpec m;
  m.kind = Kind::independent_uniform;
  m.p = p;
  m.beta = Eigen::VectorXd::Zero(p);
  m.y_lo = 0.0;
  m.y_hi = 1.0;
  m.validate();
  return m;
}

ModelSpec ModelSpec::truncated_linear(int p, Eigen::VectorXd beta,
                                      double sigma) {
  ModelSpec m;
  m.kind = Kind::truncated_linear;
  m.p = p;
  m.beta = std::move(beta);
  m.sigma = sigma;
  m.x_half = 2.0;
  // Y box at 2.2 standard deviations of beta'X + sigma eps: wide enough
  // to keep most draws, tight enough that the joint density stays
  // bounded below on the cube (Assumption A2-style support).
  const double var_y =
      truncated_normal_variance(m.x_half) * m.beta.squaredNorm() +
      sigma * sigma;
  const double half = 2.2 * std::sqrt(var_y);
  m.y_lo = -half;
  m.y_hi = half;
  m.validate();
  return m;
}

ModelSpec ModelSpec::truncated_linear(int p) {
  return truncated_linear(p, default_beta(p), 0.5);
}

ModelSpec ModelSpec::nonlinear_link(int p) {
  ModelSpec m;
  m.kind = Kind::nonlinear_link;
  m.p = p;
  m.beta = default_beta(p);
  m.sigma = 0.5;
  m.x_half = 2.0;
  const double half = 1.0 + 2.2 * m.sigma;
  m.y_lo = -half;
  m.y_hi = half;
  m.validate();
  return m;
}

ModelSpec ModelSpec::by_name(const std::string& name, int p) {
  if (name == "independent" || name == "independent-uniform")
    return independent_uniform(p);
  if (name == "linear" || name == "truncated-linear")
    return truncated_linear(p);
  if (name == "nonlinear" || name == "nonlinear-link")
    return nonlinear_link(p);
  throw ConfigError("unknown model name: " + name);
}

double ModelSpec::link(double t) const {
  return kind == Kind::nonlinear_link ? std::sin(t) : t;
}

double ModelSpec::joint_density(const Eigen::VectorXd& x, double y) const {
  if (kind == Kind::independent_uniform) return 1.0;
  double dens = 1.0;
  for (int k = 0; k < p; ++k) dens *= std_normal_pdf(x(k));
  const double resid = (y - link(beta.dot(x))) / sigma;
  return dens * std_normal_pdf(resid) / sigma;
}

void ModelSpec::validate() const {
  if (p < 1) throw ConfigError("ModelSpec: p must be >= 1");
  if (!(sigma > 0.0)) throw ConfigError("ModelSpec: sigma must be > 0");
  if (!(y_hi > y_lo)) throw ConfigError("ModelSpec: empty y box");
  if (kind != Kind::independent_uniform) {
    if (beta.size() != p) throw ConfigError("ModelSpec: beta length != p");
    if (beta.norm() <= 0.0)
      throw ConfigError("ModelSpec: beta must be nonzero for link models");
    if (!(x_half > 0.0)) throw ConfigError("ModelSpec: empty x box");
  }
}

Sample generate(const ModelSpec& model, long n, std::uint64_t seed) {
  model.validate();
  if (n < 1) throw ConfigError("generate: n must be >= 1");
  Sample out;
  out.x.resize(n, model.p);
  out.y.resize(n);
  std::mt19937_64 rng(splitmix64(seed));
  if (model.kind == ModelSpec::Kind::independent_uniform) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (long r = 0; r < n; ++r) {
      for (int c = 0; c < model.p; ++c) out.x(r, c) = unif(rng);
      out.y(r) = unif(rng);
    }
    return out;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  long accepted = 0;
  long attempts = 0;
  Eigen::VectorXd x(model.p);
  while (accepted < n) {
    ++attempts;
    if (attempts >= 10000 && accepted < attempts / 100)
      throw DataError("generate: rejection acceptance below 1%");
    bool in_box = true;
    for (int c = 0; c < model.p; ++c) {
      x(c) = gauss(rng);
      if (std::abs(x(c)) > model.x_half) in_box = false;
    }
    if (!in_box) continue;
    const double y = model.link(model.beta.dot(x)) + model.sigma * gauss(rng);
    if (y < model.y_lo || y > model.y_hi) continue;
    out.x.row(accepted) = x.transpose();
    out.y(accepted) = y;
    ++accepted;
  }
  return out;
}

ModelOracle::ModelOracle(const ModelSpec& model, int order)
    : p_(model.p), order_(order) {
  model.validate();
  if (order < 8) throw ConfigError("ModelOracle: order must be >= 8");
  if (p_ > 4) throw ConfigError("ModelOracle: supports p <= 4");
  std::vector<double> gl_x, gl_w;
  gauss_legendre(order, gl_x, gl_w);

  const double x_lo = model.kind == ModelSpec::Kind::independent_uniform
                          ? 0.0
                          : -model.x_half;
  const double x_hi = model.kind == ModelSpec::Kind::independent_uniform
                          ? 1.0
                          : model.x_half;
  std::vector<double> xn(order), xw(order), yn(order);
  wy_.resize(order);
  for (int t = 0; t < order; ++t) {
    xn[t] = 0.5 * (x_lo + x_hi) + 0.5 * (x_hi - x_lo) * gl_x[t];
    xw[t] = 0.5 * (x_hi - x_lo) * gl_w[t];
    yn[t] = 0.5 * (model.y_lo + model.y_hi) +
            0.5 * (model.y_hi - model.y_lo) * gl_x[t];
    wy_(t) = 0.5 * (model.y_hi - model.y_lo) * gl_w[t];
  }

  s0_.setZero(order);
  s1_.setZero(p_, order);
  s2_.assign(order, Eigen::MatrixXd::Zero(p_, p_));
  Eigen::VectorXd x(p_);
  std::vector<int> idx(p_, 0);
  for (int t = 0; t < order; ++t) {
    const double y = yn[t];
    std::fill(idx.begin(), idx.end(), 0);
    for (;;) {
      double w = 1.0;
      for (int c = 0; c < p_; ++c) {
        x(c) = xn[idx[c]];
        w *= xw[idx[c]];
      }
      const double rho = w * model.joint_density(x, y);
      s0_(t) += rho;
      s1_.col(t) += rho * x;
      s2_[t].noalias() += rho * x * x.transpose();
      int c = p_ - 1;
      for (; c >= 0; --c) {
        if (++idx[c] < order) break;
        idx[c] = 0;
      }
      if (c < 0) break;
    }
  }
  z_ = wy_.dot(s0_);
  if (!(z_ > 0.0)) throw NumericError("ModelOracle: zero total mass");
  mean_x_ = (s1_ * wy_) / z_;
}

double ModelOracle::t_entry(int i, int j) const {
  if (i < 1 || i > p_ || j < 1 || j > p_)
    throw ConfigError("ModelOracle: index out of range");
  const int a = i - 1, b = j - 1;
  KahanSum s;
  for (int t = 0; t < order_; ++t)
    s.add(wy_(t) * s1_(a, t) * s1_(b, t) / s0_(t));
  return s.value() / z_;
}

double ModelOracle::c_entry(int i, int j) const {
  if (i < 1 || i > p_ || j < 1 || j > p_)
    throw ConfigError("ModelOracle: index out of range");
  const int a = i - 1, b = j - 1;
  const double t_ij = t_entry(i, j);
  KahanSum s;
  for (int t = 0; t < order_; ++t) {
    const double mi = s1_(a, t) / s0_(t);
    const double mj = s1_(b, t) / s0_(t);
    const double kii = s2_[t](a, a) / s0_(t);
    const double kjj = s2_[t](b, b) / s0_(t);
    const double kij = s2_[t](a, b) / s0_(t);
    const double e2 = mj * mj * kii + mi * mi * kjj + 2.0 * mi * mj * kij -
                      3.0 * mi * mi * mj * mj;
    s.add(wy_(t) * s0_(t) * e2);
  }
  return s.value() / z_ - t_ij * t_ij;
}

Eigen::MatrixXd ModelOracle::t_matrix() const {
  Eigen::MatrixXd out(p_, p_);
  for (int i = 1; i <= p_; ++i)
    for (int j = i; j <= p_; ++j) {
      out(i - 1, j - 1) = t_entry(i, j);
      out(j - 1, i - 1) = out(i - 1, j - 1);
    }
  return out;
}

Eigen::MatrixXd ModelOracle::cov_matrix() const {
  return t_matrix() - mean_x_ * mean_x_.transpose();
}

Eigen::MatrixXd oracle_cov(const ModelSpec& model, int order) {
  return ModelOracle(model, order).cov_matrix();
}

namespace {

StudyRecord run_replication(const ModelSpec& model, int i, int j, long n,
                            double oracle_t, const EstimatorConfig& cfg,
                            std::uint64_t rep_seed, int rep) {
  Sample sample = generate(model, n, rep_seed);
  EstimatorConfig rep_cfg = cfg;
  rep_cfg.seed = rep_seed;
  const PairEstimate pe = estimate_pair(sample.x, sample.y, i, j, rep_cfg);
  StudyRecord rec;
  rec.n = n;
  rec.rep = rep;
  rec.t_hat = pe.t_hat;
  rec.oracle = oracle_t;
  rec.sq_err = (pe.t_hat - oracle_t) * (pe.t_hat - oracle_t);
  rec.ci_lo = pe.ci_lo;
  rec.ci_hi = pe.ci_hi;
  rec.covered = pe.ci_lo <= oracle_t && oracle_t <= pe.ci_hi;
  return rec;
}

double ls_slope(const std::vector<double>& logn,
                const std::vector<double>& logmse) {
  const double mx = mean(logn);
  const double my = mean(logmse);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < logn.size(); ++k) {
    sxx += (logn[k] - mx) * (logn[k] - mx);
    sxy += (logn[k] - mx) * (logmse[k] - my);
  }
  return sxy / sxx;
}

}  // namespace

StudyResult rate_study(const ModelSpec& model, int i, int j,
                       const std::vector<long>& n_grid, int reps,
                       const EstimatorConfig& cfg, std::uint64_t seed) {
  if (n_grid.empty() || !std::is_sorted(n_grid.begin(), n_grid.end()))
    throw ConfigError("rate_study: n grid must be ascending and nonempty");
  if (reps < 100) throw ConfigError("rate_study: need reps >= 100");
  ModelOracle oracle(model);
  const double oracle_t = oracle.t_entry(i, j);

  StudyResult out;
  out.n_grid = n_grid;
  out.reps = reps;
  out.seed = seed;
  const std::size_t g = n_grid.size();
  out.records.resize(g * reps);
  parallel_for(g * reps, cfg.threads, [&](std::size_t task) {
    const std::size_t gi = task / reps;
    const int rep = static_cast<int>(task % reps);
    out.records[task] =
        run_replication(model, i, j, n_grid[gi], oracle_t, cfg,
                        derive_seed(seed, task), rep);
  });

  std::vector<double> logn, logmse;
  for (std::size_t gi = 0; gi < g; ++gi) {
    KahanSum se_sum;
    long covered = 0;
    for (int r = 0; r < reps; ++r) {
      const auto& rec = out.records[gi * reps + r];
      se_sum.add(rec.sq_err);
      covered += rec.covered ? 1 : 0;
    }
    out.mse_per_n.push_back(se_sum.value() / reps);
    out.coverage_per_n.push_back(static_cast<double>(covered) / reps);
    logn.push_back(std::log(static_cast<double>(n_grid[gi])));
    logmse.push_back(std::log(out.mse_per_n.back()));
  }
  out.slope = g >= 2 ? ls_slope(logn, logmse) : 0.0;
  return out;
}

StudyResult coverage_study(const ModelSpec& model, int i, int j, long n,
                           int reps, double delta, const EstimatorConfig& cfg,
                           std::uint64_t seed) {
  if (reps < 200) throw ConfigError("coverage_study: need reps >= 200");
  if (!(delta > 0.0 && delta < 1.0))
    throw ConfigError("coverage_study: delta must lie in (0,1)");
  ModelOracle oracle(model);
  const double oracle_t = oracle.t_entry(i, j);
  EstimatorConfig run_cfg = cfg;
  run_cfg.delta = delta;

  StudyResult out;
  out.n_grid = {n};
  out.reps = reps;
  out.seed = seed;
  out.records.resize(reps);
  parallel_for(reps, cfg.threads, [&](std::size_t task) {
    out.records[task] =
        run_replication(model, i, j, n, oracle_t, run_cfg,
                        derive_seed(seed, task), static_cast<int>(task));
  });
  KahanSum se_sum;
  long covered = 0;
  for (const auto& rec : out.records) {
    se_sum.add(rec.sq_err);
    covered += rec.covered ? 1 : 0;
  }
  out.mse_per_n.push_back(se_sum.value() / reps);
  out.coverage_per_n.push_back(static_cast<double>(covered) / reps);
  return out;
}

HoeffdingResult hoeffding_diagnostic(const ModelSpec& model, long n, int reps,
                                     const EstimatorConfig& cfg,
                                     std::uint64_t seed) {
  if (reps < 200) throw ConfigError("hoeffding_diagnostic: need reps >= 200");
  if (n < 20) throw DataError("hoeffding_diagnostic: need n >= 20");
  if (model.p < 2)
    throw ConfigError("hoeffding_diagnostic: model needs p >= 2");
  model.validate();

  // Work on the (X_1, X_2, Y) margin of the model with a fixed bounded
  // non-separable probe weight.
  const double x_lo = model.kind == ModelSpec::Kind::independent_uniform
                          ? 0.0
                          : -model.x_half;
  const double x_hi = model.kind == ModelSpec::Kind::independent_uniform
                          ? 1.0
                          : model.x_half;
  const Cube cube{Point3{x_lo, x_lo, model.y_lo},
                  Point3{x_hi, x_hi, model.y_hi}};
  const double sx = x_hi - x_lo;
  const double sy = model.y_hi - model.y_lo;
  EtaFunction eta;
  eta.eval = [=](double a, double b, double y) {
    const double ua = (a - x_lo) / sx;
    const double ub = (b - x_lo) / sx;
    const double uy = (y - model.y_lo) / sy;
    return 1.0 / (1.0 + 0.5 * ua + 0.4 * ub * uy);
  };

  // Exact pair density of (X_1, X_2, Y): remaining x coordinates are
  // integrated out by quadrature.
  const int inner_order = 32;
  std::vector<double> gx, gw;
  gauss_legendre(inner_order, gx, gw);
  const int rest = model.p - 2;
  auto pair_density = [&, model](const Point3& pt) {
    if (model.kind == ModelSpec::Kind::independent_uniform) return 1.0;
    if (rest == 0) {
      Eigen::VectorXd x(2);
      x << pt[0], pt[1];
      return model.joint_density(x, pt[2]);
    }
    // tensor integral over the remaining coordinates
    std::vector<int> idx(rest, 0);
    Eigen::VectorXd x(model.p);
    x(0) = pt[0];
    x(1) = pt[1];
    double total = 0.0;
    for (;;) {
      double w = 1.0;
      for (int c = 0; c < rest; ++c) {
        x(2 + c) = 0.5 * (x_lo + x_hi) + 0.5 * (x_hi - x_lo) * gx[idx[c]];
        w *= 0.5 * (x_hi - x_lo) * gw[idx[c]];
      }
      total += w * model.joint_density(x, pt[2]);
      int c = rest - 1;
      for (; c >= 0; --c) {
        if (++idx[c] < inner_order) break;
        idx[c] = 0;
      }
      if (c < 0) break;
    }
    return total;
  };

  // Normalize so the pair density integrates to one on the cube.
  const QuadratureRule rule = build_rule(cube, cfg.quad_order);
  const double mass = integrate(pair_density, rule);
  auto f_pair = [pair_density, mass](const Point3& pt) {
    return pair_density(pt) / mass;
  };

  const int m = select_model_size(n, cfg.size_rule);
  const BasisModel basis = BasisModel::graded(cube, m);
  const CoefficientSet a_set = coefficients(f_pair, basis, rule);
  Eigen::Map<const Eigen::VectorXd> a(a_set.values.data(), basis.size());

  // b_l = <p_l, g> with g(x_i, x_j, y) = int f psi; as in lambda_f_eta,
  // g splits into functions of (x_i, y) and (x_j, y).
  const int q = rule.order;
  Eigen::VectorXd b(basis.size());
  {
    std::vector<Eigen::VectorXd> g1(q), g2(q);
    Eigen::MatrixXd fgrid(q, q);
    for (int t = 0; t < q; ++t) {
      const double yt = rule.nodes[2][t];
      for (int aa = 0; aa < q; ++aa)
        for (int bb = 0; bb < q; ++bb)
          fgrid(aa, bb) =
              f_pair(Point3{rule.nodes[0][aa], rule.nodes[1][bb], yt});
      Eigen::VectorXd fi(q), fj(q);
      for (int aa = 0; aa < q; ++aa) {
        double s = 0.0;
        for (int bb = 0; bb < q; ++bb) s += rule.weights[1][bb] * fgrid(aa, bb);
        fi(aa) = s;
      }
      for (int bb = 0; bb < q; ++bb) {
        double s = 0.0;
        for (int aa = 0; aa < q; ++aa) s += rule.weights[0][aa] * fgrid(aa, bb);
        fj(bb) = s;
      }
      g1[t].resize(q);
      g2[t].resize(q);
      for (int aa = 0; aa < q; ++aa) {
        double s = 0.0;
        for (int bb = 0; bb < q; ++bb)
          s += rule.weights[1][bb] *
               eta.eval(rule.nodes[0][aa], rule.nodes[1][bb], yt) * fj(bb);
        g1[t](aa) = s;
      }
      for (int bb = 0; bb < q; ++bb) {
        double s = 0.0;
        for (int aa = 0; aa < q; ++aa)
          s += rule.weights[0][aa] *
               eta.eval(rule.nodes[0][aa], rule.nodes[1][bb], yt) * fi(aa);
        g2[t](bb) = s;
      }
    }
    for (int l = 0; l < basis.size(); ++l) {
      const auto& ix = basis.indices()[l];
      KahanSum s;
      for (int t = 0; t < q; ++t) {
        const double py = basis.axis_phi(2, ix.beta, rule.nodes[2][t]);
        for (int aa = 0; aa < q; ++aa)
          for (int bb = 0; bb < q; ++bb)
            s.add(rule.weights[2][t] * rule.weights[0][aa] *
                  rule.weights[1][bb] * py *
                  basis.axis_phi(0, ix.alpha[0], rule.nodes[0][aa]) *
                  basis.axis_phi(1, ix.alpha[1], rule.nodes[1][bb]) *
                  (g1[t](aa) + g2[t](bb)));
      }
      b(l) = s.value();
    }
  }

  std::vector<double> u_vals(reps), l_vals(reps);
  parallel_for(reps, cfg.threads, [&](std::size_t task) {
    Sample sample = generate(model, n, derive_seed(seed, task));
    TriSample tri;
    tri.rows.reserve(n);
    for (long r = 0; r < n; ++r)
      tri.rows.push_back(Point3{sample.x(r, 0), sample.x(r, 1), sample.y(r)});
    QuadKernel kernel(eta, tri, basis, rule);
    const auto parts = kernel.hoeffding_parts(a, b);
    u_vals[task] = parts.u_part;
    l_vals[task] = parts.linear_part;
  });

  HoeffdingResult out;
  out.reps = reps;
  out.u_mean = mean(u_vals);
  out.u_se = std::sqrt(sample_variance(u_vals) / reps);
  out.linear_mean = mean(l_vals);
  out.linear_se = std::sqrt(sample_variance(l_vals) / reps);
  std::vector<double> prod(reps);
  for (int r = 0; r < reps; ++r)
    prod[r] = (u_vals[r] - out.u_mean) * (l_vals[r] - out.linear_mean);
  out.cov_estimate = mean(prod);
  out.cov_se = std::sqrt(sample_variance(prod) / reps);
  return out;
}

namespace {

std::string fmt(double v) {
  nlohmann::json j = v;
  return j.dump();
}

}  // namespace

std::string study_csv(const StudyResult& result) {
  std::string out = "n,rep,t_hat,oracle,sq_err,ci_lo,ci_hi,covered\n";
  for (const auto& r : result.records) {
    out += std::to_string(r.n) + "," + std::to_string(r.rep) + "," +
           fmt(r.t_hat) + "," + fmt(r.oracle) + "," + fmt(r.sq_err) + "," +
           fmt(r.ci_lo) + "," + fmt(r.ci_hi) + "," +
           (r.covered ? "1" : "0") + "\n";
  }
  return out;
}

std::string study_summary_json(const StudyResult& result,
                               const std::string& command) {
  nlohmann::json n_grid = nlohmann::json::array();
  for (long n : result.n_grid) n_grid.push_back(n);
  nlohmann::json j{{"command", command},
                   {"n_grid", n_grid},
                   {"reps", result.reps},
                   {"mse_per_n", result.mse_per_n},
                   {"coverage_per_n", result.coverage_per_n},
                   {"slope", result.slope},
                   {"seed", result.seed},
                   {"seed_rule", "rep seed = derive_seed(seed, grid_index * "
                                 "reps + rep)"}};
  return j.dump(2) + "\n";
}

}  // namespace condcov
