#include "condcov/functionals.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "condcov/errors.hpp"
#include "condcov/stats.hpp"

namespace condcov {

void EtaFunction::check_bounded(const Cube& cube) const {
  if (!eval) throw ConfigError("EtaFunction: missing evaluation rule");
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b)
      for (int c = 0; c < 5; ++c) {
        const double xi = cube.lo[0] + cube.length(0) * (a + 0.5) / 5.0;
        const double xj = cube.lo[1] + cube.length(1) * (b + 0.5) / 5.0;
        const double y = cube.lo[2] + cube.length(2) * (c + 0.5) / 5.0;
        if (!std::isfinite(eval(xi, xj, y)))
          throw NumericError("EtaFunction: non-finite value on probe grid");
      }
}

EtaFunction make_eta_constant(double value) {
  EtaFunction eta;
  eta.eval = [value](double, double, double) { return value; };
  eta.separable = true;
  eta.u = [value](double, double) { return value; };
  eta.v = [](double, double) { return 1.0; };
  eta.w = [](double) { return 1.0; };
  return eta;
}

namespace {

EtaFunction eta_h2_impl(const TriDensityField* d,
                        std::shared_ptr<const TriDensityField> owner) {
  EtaFunction eta;
  eta.separable = true;
  eta.eval = [d, owner](double x_i1, double x_j2, double y) {
    const SliceMoments s = d->slice(y);
    return (x_i1 - s.mean_i) * (x_j2 - s.mean_j) / s.mass;
  };
  eta.u = [d, owner](double x, double y) { return x - d->slice(y).mean_i; };
  eta.v = [d, owner](double x, double y) { return x - d->slice(y).mean_j; };
  eta.w = [d, owner](double y) { return d->slice(y).mass; };
  return eta;
}

}  // namespace

EtaFunction make_eta_h2(const TriDensityField& field) {
  return eta_h2_impl(&field, nullptr);
}

EtaFunction make_eta_h2(std::shared_ptr<const TriDensityField> field) {
  const TriDensityField* raw = field.get();
  return eta_h2_impl(raw, std::move(field));
}

double h1(const TriDensityField& d, double x_i, double x_j, double y) {
  d.cube().require_inside(Point3{x_i, x_j, y});
  const SliceMoments s = d.slice(y);
  return x_i * s.mean_j + x_j * s.mean_i - s.mean_i * s.mean_j;
}

double h2(const TriDensityField& d, double x_i1, double x_j2, double y) {
  d.cube().require_inside(Point3{x_i1, x_j2, y});
  const SliceMoments s = d.slice(y);
  return (x_i1 - s.mean_i) * (x_j2 - s.mean_j) / s.mass;
}

double h3(const TriDensityField& d, double x_i1, double x_j1, double x_i2,
          double x_j2, double y) {
  return h2(d, x_i1, x_j2, y) + h2(d, x_i2, x_j1, y);
}

double psi(const EtaFunction& eta, double x_i1, double x_j1, double x_i2,
           double x_j2, double y) {
  return eta.eval(x_i1, x_j2, y) + eta.eval(x_i2, x_j1, y);
}

double linear_estimate(const TriDensityField& d, const TriSample& d2) {
  if (d2.rows.empty()) throw DataError("linear_estimate: empty sample");
  KahanSum s;
  for (const auto& r : d2.rows) s.add(h1(d, r[0], r[1], r[2]));
  return s.value() / static_cast<double>(d2.rows.size());
}

namespace {

// Values of the 1-D family for frequencies 0..maxf at given abscissae.
Eigen::MatrixXd phi_table(const BasisModel& model, int axis, int maxf,
                          const std::vector<double>& ts) {
  Eigen::MatrixXd out(maxf + 1, ts.size());
  for (int a = 0; a <= maxf; ++a)
    for (std::size_t t = 0; t < ts.size(); ++t)
      out(a, t) = model.axis_phi(axis, a, ts[t]);
  return out;
}

}  // namespace

QuadKernel::QuadKernel(const EtaFunction& eta, const TriSample& d2,
                       const BasisModel& model, const QuadratureRule& rule) {
  n2_ = static_cast<long>(d2.rows.size());
  if (n2_ < 2) throw DataError("QuadKernel: need at least 2 rows");
  const Cube& cube = model.cube();
  for (int k = 0; k < 3; ++k)
    if (std::abs(cube.lo[k] - rule.cube.lo[k]) > 1e-12 ||
        std::abs(cube.hi[k] - rule.cube.hi[k]) > 1e-12)
      throw ConfigError("QuadKernel: rule and model cubes differ");
  eta.check_bounded(cube);
  if (eta.separable && !(eta.u && eta.v && eta.w))
    throw ConfigError("QuadKernel: separable eta lacks u/v/w factors");
  for (const auto& r : d2.rows) cube.require_inside(r);

  const int m = model.size();
  const int maxf = model.max_frequency();
  const int q = rule.order;
  const auto& idx = model.indices();

  // Per-axis tables at quadrature nodes and at the sample rows.
  const Eigen::MatrixXd phi_xq = phi_table(model, 0, maxf, rule.nodes[0]);
  const Eigen::MatrixXd phi_jq = phi_table(model, 1, maxf, rule.nodes[1]);
  const Eigen::MatrixXd phi_yq = phi_table(model, 2, maxf, rule.nodes[2]);
  Eigen::Map<const Eigen::VectorXd> wx(rule.weights[0].data(), q);
  Eigen::Map<const Eigen::VectorXd> wj(rule.weights[1].data(), q);
  Eigen::Map<const Eigen::VectorXd> wy(rule.weights[2].data(), q);
  const Eigen::VectorXd i0x = phi_xq * wx;  // int phi_a over x_i
  const Eigen::VectorXd i0j = phi_jq * wj;  // int phi_b over x_j

  std::vector<double> row_xi(n2_), row_xj(n2_), row_y(n2_);
  for (long k = 0; k < n2_; ++k) {
    row_xi[k] = d2.rows[k][0];
    row_xj[k] = d2.rows[k][1];
    row_y[k] = d2.rows[k][2];
  }
  const Eigen::MatrixXd phi_xr = phi_table(model, 0, maxf, row_xi);
  const Eigen::MatrixXd phi_jr = phi_table(model, 1, maxf, row_xj);
  const Eigen::MatrixXd phi_yr = phi_table(model, 2, maxf, row_y);

  p_.resize(m, n2_);
  for (int l = 0; l < m; ++l)
    for (long k = 0; k < n2_; ++k)
      p_(l, k) = phi_xr(idx[l].alpha[0], k) * phi_jr(idx[l].alpha[1], k) *
                 phi_yr(idx[l].beta, k);

  // rho_l(Z_k) = int p_l(x_i, x_j, Y_k) psi(x_i, x_j, Z_k) dx_i dx_j.
  // With the tensor basis the double integral splits; the psi piece in
  // x_i pairs with int phi over x_j and vice versa.
  rho_.resize(m, n2_);
  if (eta.separable) {
    // int phi_a(x) u(x, Y_k) dx and int phi_b(x) v(x, Y_k) dx per row.
    Eigen::MatrixXd urow(maxf + 1, n2_), vrow(maxf + 1, n2_);
    Eigen::VectorXd uval(q), vval(q);
    for (long k = 0; k < n2_; ++k) {
      for (int a = 0; a < q; ++a) {
        uval(a) = eta.u(rule.nodes[0][a], row_y[k]) * wx(a);
        vval(a) = eta.v(rule.nodes[1][a], row_y[k]) * wj(a);
      }
      urow.col(k) = phi_xq * uval;
      vrow.col(k) = phi_jq * vval;
    }
    for (long k = 0; k < n2_; ++k) {
      const double wk = eta.w(row_y[k]);
      const double uk = eta.u(row_xi[k], row_y[k]) / wk;
      const double vk = eta.v(row_xj[k], row_y[k]) / wk;
      for (int l = 0; l < m; ++l) {
        const auto& ix = idx[l];
        rho_(l, k) = phi_yr(ix.beta, k) *
                     (vk * urow(ix.alpha[0], k) * i0j(ix.alpha[1]) +
                      uk * i0x(ix.alpha[0]) * vrow(ix.alpha[1], k));
      }
    }
  } else {
    Eigen::MatrixXd arow(maxf + 1, n2_), brow(maxf + 1, n2_);
    Eigen::VectorXd av(q), bv(q);
    for (long k = 0; k < n2_; ++k) {
      for (int a = 0; a < q; ++a) {
        av(a) = eta.eval(rule.nodes[0][a], row_xj[k], row_y[k]) * wx(a);
        bv(a) = eta.eval(row_xi[k], rule.nodes[1][a], row_y[k]) * wj(a);
      }
      arow.col(k) = phi_xq * av;
      brow.col(k) = phi_jq * bv;
    }
    for (long k = 0; k < n2_; ++k)
      for (int l = 0; l < m; ++l) {
        const auto& ix = idx[l];
        rho_(l, k) = phi_yr(ix.beta, k) *
                     (arow(ix.alpha[0], k) * i0j(ix.alpha[1]) +
                      i0x(ix.alpha[0]) * brow(ix.alpha[1], k));
      }
  }

  // c_ll' = i0j(alpha_1) i0x(alpha_0') J(alpha_0, alpha_1', beta, beta'),
  // J(a,b,c,d) = int phi_a(x_i1) phi_b(x_j2) phi_c(y) phi_d(y) eta.
  c_.resize(m, m);
  if (eta.separable) {
    Eigen::MatrixXd uq(maxf + 1, q), vq(maxf + 1, q);
    Eigen::VectorXd uval(q), vval(q), winv(q);
    for (int t = 0; t < q; ++t) {
      const double yt = rule.nodes[2][t];
      for (int a = 0; a < q; ++a) {
        uval(a) = eta.u(rule.nodes[0][a], yt) * wx(a);
        vval(a) = eta.v(rule.nodes[1][a], yt) * wj(a);
      }
      uq.col(t) = phi_xq * uval;
      vq.col(t) = phi_jq * vval;
      winv(t) = wy(t) / eta.w(yt);
    }
    for (int l = 0; l < m; ++l)
      for (int lp = 0; lp < m; ++lp) {
        KahanSum jsum;
        for (int t = 0; t < q; ++t)
          jsum.add(winv(t) * phi_yq(idx[l].beta, t) *
                   phi_yq(idx[lp].beta, t) * uq(idx[l].alpha[0], t) *
                   vq(idx[lp].alpha[1], t));
        c_(l, lp) = i0j(idx[l].alpha[1]) * i0x(idx[lp].alpha[0]) * jsum.value();
      }
  } else {
    // E(a, b, t) = sum over the (x_i1, x_j2) grid of phi_a phi_b eta.
    std::vector<Eigen::MatrixXd> egrid(q);
    Eigen::MatrixXd etag(q, q);
    for (int t = 0; t < q; ++t) {
      const double yt = rule.nodes[2][t];
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b)
          etag(a, b) =
              wx(a) * wj(b) * eta.eval(rule.nodes[0][a], rule.nodes[1][b], yt);
      egrid[t] = phi_xq * etag * phi_jq.transpose();
    }
    for (int l = 0; l < m; ++l)
      for (int lp = 0; lp < m; ++lp) {
        KahanSum jsum;
        for (int t = 0; t < q; ++t)
          jsum.add(wy(t) * phi_yq(idx[l].beta, t) * phi_yq(idx[lp].beta, t) *
                   egrid[t](idx[l].alpha[0], idx[lp].alpha[1]));
        c_(l, lp) = i0j(idx[l].alpha[1]) * i0x(idx[lp].alpha[0]) * jsum.value();
      }
  }

  if (!p_.allFinite() || !rho_.allFinite() || !c_.allFinite())
    throw NumericError("QuadKernel: non-finite table entry");
}

double QuadKernel::theta() const {
  const int m = static_cast<int>(p_.rows());
  const Eigen::VectorXd sp = p_.rowwise().sum();
  const Eigen::VectorXd srho = rho_.rowwise().sum();
  KahanSum term1;
  for (int l = 0; l < m; ++l)
    term1.add(sp(l) * srho(l) - p_.row(l).dot(rho_.row(l)));
  const Eigen::MatrixXd pp = p_ * p_.transpose();
  KahanSum term2;
  for (int l = 0; l < m; ++l)
    for (int lp = 0; lp < m; ++lp)
      term2.add(c_(l, lp) * (sp(l) * sp(lp) - pp(l, lp)));
  const double denom = static_cast<double>(n2_) * (n2_ - 1);
  const double value = (term1.value() - term2.value()) / denom;
  if (!std::isfinite(value))
    throw NumericError("quad_estimate: non-finite estimate");
  return value;
}

QuadKernel::HoeffdingParts QuadKernel::hoeffding_parts(
    const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  const int m = static_cast<int>(p_.rows());
  if (a.size() != m || b.size() != m)
    throw ConfigError("hoeffding_parts: coefficient length mismatch");
  // Only the symmetric part of C survives the symmetrized double sum.
  const Eigen::MatrixXd cs = 0.5 * (c_ + c_.transpose());
  const Eigen::MatrixXd qt = p_.colwise() - a;    // q_l(Z_k)
  const Eigen::MatrixXd rt = rho_.colwise() - b;  // r_l(Z_k)
  const Eigen::VectorXd sq = qt.rowwise().sum();
  const Eigen::VectorXd sr = rt.rowwise().sum();

  HoeffdingParts parts;
  KahanSum u1;
  for (int l = 0; l < m; ++l)
    u1.add(sq(l) * sr(l) - qt.row(l).dot(rt.row(l)));
  const Eigen::MatrixXd qq = qt * qt.transpose();
  KahanSum u2;
  for (int l = 0; l < m; ++l)
    for (int lp = 0; lp < m; ++lp)
      u2.add(cs(l, lp) * (sq(l) * sq(lp) - qq(l, lp)));
  const double denom = static_cast<double>(n2_) * (n2_ - 1);
  parts.u_part = (u1.value() - u2.value()) / denom;

  const Eigen::VectorXd ca = cs * a;
  KahanSum lin;
  for (long k = 0; k < n2_; ++k)
    lin.add(a.dot(rt.col(k)) + b.dot(qt.col(k)) - 2.0 * ca.dot(qt.col(k)));
  parts.linear_part = lin.value() / static_cast<double>(n2_);
  parts.constant = a.dot(b) - a.dot(cs * a);
  return parts;
}

QuadEstimate quad_estimate(const EtaFunction& eta, const TriSample& d2,
                           const BasisModel& model,
                           const QuadratureRule& rule) {
  QuadKernel kernel(eta, d2, model, rule);
  QuadEstimate out;
  out.value = kernel.theta();
  out.small_sample = kernel.n2() == 2;
  return out;
}

double oracle_bias(const std::function<double(const Point3&)>& f_true,
                   const EtaFunction& eta, const BasisModel& model,
                   const QuadratureRule& rule) {
  eta.check_bounded(model.cube());
  const CoefficientSet coeffs = coefficients(f_true, model, rule);
  const int q = rule.order;

  // With D = S_M f - f the bias factors through the y-slices:
  //   -int_y int int eta(x_i1, x_j2, y) Dj(x_i1, y) Di(x_j2, y),
  // Dj marginalizes D over x_j, Di over x_i.
  KahanSum total;
  for (int t = 0; t < q; ++t) {
    const double yt = rule.nodes[2][t];
    Eigen::MatrixXd dgrid(q, q);
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) {
        const Point3 pnt{rule.nodes[0][a], rule.nodes[1][b], yt};
        dgrid(a, b) = project(coeffs, model, pnt) - f_true(pnt);
      }
    Eigen::VectorXd dj(q), di(q);
    for (int a = 0; a < q; ++a) {
      KahanSum s;
      for (int b = 0; b < q; ++b) s.add(rule.weights[1][b] * dgrid(a, b));
      dj(a) = s.value();
    }
    for (int b = 0; b < q; ++b) {
      KahanSum s;
      for (int a = 0; a < q; ++a) s.add(rule.weights[0][a] * dgrid(a, b));
      di(b) = s.value();
    }
    KahanSum inner;
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b)
        inner.add(rule.weights[0][a] * rule.weights[1][b] *
                  eta.eval(rule.nodes[0][a], rule.nodes[1][b], yt) * dj(a) *
                  di(b));
    total.add(rule.weights[2][t] * inner.value());
  }
  return -total.value();
}

double lambda_f_eta(const std::function<double(const Point3&)>& f,
                    const EtaFunction& eta, const QuadratureRule& rule) {
  eta.check_bounded(rule.cube);
  const int q = rule.order;
  // g(x_i, x_j, y) = int eta(x_i, b, y) fj(b, y) db
  //                + int eta(a, x_j, y) fi(a, y) da
  // where fi, fj are the one-axis marginals of f at fixed y; note g is a
  // sum of a function of (x_i, y) and a function of (x_j, y).
  KahanSum mom2, mom1;
  for (int t = 0; t < q; ++t) {
    const double yt = rule.nodes[2][t];
    Eigen::MatrixXd fgrid(q, q);
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) {
        const double v = f(Point3{rule.nodes[0][a], rule.nodes[1][b], yt});
        if (!std::isfinite(v))
          throw NumericError("lambda_f_eta: non-finite density value");
        fgrid(a, b) = v;
      }
    Eigen::VectorXd fi(q), fj(q);
    for (int a = 0; a < q; ++a) {
      KahanSum s;
      for (int b = 0; b < q; ++b) s.add(rule.weights[1][b] * fgrid(a, b));
      fi(a) = s.value();
    }
    for (int b = 0; b < q; ++b) {
      KahanSum s;
      for (int a = 0; a < q; ++a) s.add(rule.weights[0][a] * fgrid(a, b));
      fj(b) = s.value();
    }
    Eigen::VectorXd g1(q), g2(q);
    for (int a = 0; a < q; ++a) {
      KahanSum s;
      for (int b = 0; b < q; ++b)
        s.add(rule.weights[1][b] *
              eta.eval(rule.nodes[0][a], rule.nodes[1][b], yt) * fj(b));
      g1(a) = s.value();
    }
    for (int b = 0; b < q; ++b) {
      KahanSum s;
      for (int a = 0; a < q; ++a)
        s.add(rule.weights[0][a] *
              eta.eval(rule.nodes[0][a], rule.nodes[1][b], yt) * fi(a));
      g2(b) = s.value();
    }
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) {
        const double w =
            rule.weights[0][a] * rule.weights[1][b] * rule.weights[2][t];
        const double g = g1(a) + g2(b);
        mom2.add(w * g * g * fgrid(a, b));
        mom1.add(w * g * fgrid(a, b));
      }
  }
  return mom2.value() - mom1.value() * mom1.value();
}

}  // namespace condcov
