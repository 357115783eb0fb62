#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>

#include "condcov/basis.hpp"
#include "condcov/density.hpp"
#include "condcov/pilot.hpp"
#include "condcov/quadrature.hpp"

namespace condcov {

// Bounded weight eta(x_i1, x_j2, y) of the quadratic functional
//   theta = int eta(x_i1, x_j2, y) f(x_i1, x_j1, y) f(x_i2, x_j2, y).
// When eta factors as u(x_i1, y) v(x_j2, y) / w(y) the separable flag
// unlocks the fast path (every H2 instance is of that form).
struct EtaFunction {
  std::function<double(double, double, double)> eval;
  bool separable = false;
  std::function<double(double, double)> u;
  std::function<double(double, double)> v;
  std::function<double(double)> w;

  // Throws NumericError if eta is not finite on a 5x5x5 probe grid.
  void check_bounded(const Cube& cube) const;
};

EtaFunction make_eta_constant(double value);

// eta = H2(field): (x_i1 - m_i(y)) (x_j2 - m_j(y)) / marginal(y).
// The field reference must outlive the returned object; prefer the
// shared_ptr overload when lifetimes are not obvious.
EtaFunction make_eta_h2(const TriDensityField& field);
EtaFunction make_eta_h2(std::shared_ptr<const TriDensityField> field);

// First-order kernel  x_i m_j(y) + x_j m_i(y) - m_i(y) m_j(y).
double h1(const TriDensityField& d, double x_i, double x_j, double y);

// Second-order kernel  (x_i1 - m_i(y)) (x_j2 - m_j(y)) / marginal(y).
double h2(const TriDensityField& d, double x_i1, double x_j2, double y);

// Symmetrized second-order kernel H2(1,2') + H2(2,1').
double h3(const TriDensityField& d, double x_i1, double x_j1, double x_i2,
          double x_j2, double y);

// psi(z1, z2) = eta(x_i1, x_j2, y) + eta(x_i2, x_j1, y).
double psi(const EtaFunction& eta, double x_i1, double x_j1, double x_i2,
           double x_j2, double y);

// Empirical mean of H1 over the estimation subsample.
double linear_estimate(const TriDensityField& d, const TriSample& d2);

struct QuadEstimate {
  double value = 0.0;
  bool small_sample = false;  // set when n2 == 2
};

// Per-row tables of the orthonormal-series U-statistic
//   theta_hat = 1/(n(n-1)) sum_l sum_{k != k'} p_l(Z_k) rho_l(Z_k')
//             - 1/(n(n-1)) sum_{l,l'} sum_{k != k'} p_l(Z_k) p_l'(Z_k') c_ll'
// with rho_l(z) = int p_l(x_i, x_j, y_z) psi(x_i, x_j, z) dx_i dx_j and
// c_ll' = int p_l(z1) p_l'(z2) eta(x_i1, x_j2, y) over the doubled cube.
// The k-sums collapse to O(n m) accumulators via
//   sum_{k != k'} a_k b_k' = (sum a)(sum b) - sum a_k b_k,
// which is algebraically identical to the double sum.
class QuadKernel {
public:
  QuadKernel(const EtaFunction& eta, const TriSample& d2,
             const BasisModel& model, const QuadratureRule& rule);

  double theta() const;
  long n2() const { return n2_; }
  int m() const { return static_cast<int>(p_.rows()); }

  struct HoeffdingParts {
    double u_part = 0.0;       // degenerate U-statistic component
    double linear_part = 0.0;  // centered empirical-mean component
    double constant = 0.0;     // a'b - a'C_s a
  };
  // Decomposition against population coefficients a_l = <p_l, f> and
  // b_l = <p_l, g>; theta() == u_part + linear_part + constant exactly.
  HoeffdingParts hoeffding_parts(const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b) const;

  const Eigen::MatrixXd& p_table() const { return p_; }
  const Eigen::MatrixXd& rho_table() const { return rho_; }
  const Eigen::MatrixXd& c_matrix() const { return c_; }

private:
  long n2_ = 0;
  Eigen::MatrixXd p_;    // m x n2: p_l(Z_k)
  Eigen::MatrixXd rho_;  // m x n2: rho_l(Z_k)
  Eigen::MatrixXd c_;    // m x m
};

QuadEstimate quad_estimate(const EtaFunction& eta, const TriSample& d2,
                           const BasisModel& model,
                           const QuadratureRule& rule);

// Exact bias of the series estimator for a known density:
//   -int (S_M f - f)(z1) (S_M f - f)(z2) eta(x_i1, x_j2, y).
double oracle_bias(const std::function<double(const Point3&)>& f_true,
                   const EtaFunction& eta, const BasisModel& model,
                   const QuadratureRule& rule);

// Asymptotic variance of the linear Hoeffding component:
//   Lambda = int g^2 f - (int g f)^2,
//   g(x_i, x_j, y) = int f(x_i2, x_j2, y) psi(x_i, x_j, x_i2, x_j2, y).
double lambda_f_eta(const std::function<double(const Point3&)>& f,
                    const EtaFunction& eta, const QuadratureRule& rule);

}  // namespace condcov
