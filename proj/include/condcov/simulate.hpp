#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "condcov/estimator.hpp"

namespace condcov {

// Synthetic data models. Supports A2: the default truncation boxes keep
// the joint density bounded away from zero on its cube.
struct ModelSpec {
  enum class Kind { independent_uniform, truncated_linear, nonlinear_link };
  Kind kind = Kind::independent_uniform;
  int p = 2;
  Eigen::VectorXd beta;  // link direction (ignored for the uniform model)
  double sigma = 0.5;    // noise scale
  double x_half = 2.0;   // X truncated to [-x_half, x_half]^p
  double y_lo = 0.0;
  double y_hi = 1.0;

  static ModelSpec independent_uniform(int p);
  static ModelSpec truncated_linear(int p, Eigen::VectorXd beta,
                                    double sigma);
  static ModelSpec truncated_linear(int p);  // beta_k = 2^{-k}, sigma = 0.5
  static ModelSpec nonlinear_link(int p);    // y = sin(beta'x) + sigma eps

  static ModelSpec by_name(const std::string& name, int p);

  double link(double t) const;
  // Unnormalized joint density of (x, y) on the truncation box.
  double joint_density(const Eigen::VectorXd& x, double y) const;
  void validate() const;
};

struct Sample {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

// i.i.d. draws by rejection onto the truncation box; deterministic per
// seed. Throws DataError when the acceptance rate drops below 1%.
Sample generate(const ModelSpec& model, long n, std::uint64_t seed);

// Ground truth by tensor quadrature on the exact truncated density; the
// independent brute-force oracle for all acceptance targets.
class ModelOracle {
public:
  explicit ModelOracle(const ModelSpec& model, int order = 48);

  // T_ij = E[ E[X_i|Y] E[X_j|Y] ]  (1-based indices).
  double t_entry(int i, int j) const;
  // Asymptotic variance C_ij = Var(H1(f, X_i, X_j, Y)).
  double c_entry(int i, int j) const;
  Eigen::VectorXd mean_x() const { return mean_x_; }
  Eigen::MatrixXd t_matrix() const;
  Eigen::MatrixXd cov_matrix() const;

private:
  int p_ = 0;
  int order_ = 0;
  // Per y-node slice moments of the joint density.
  Eigen::VectorXd wy_, s0_;
  Eigen::MatrixXd s1_;              // p x order
  std::vector<Eigen::MatrixXd> s2_; // per y-node p x p second moments
  double z_ = 1.0;                  // total mass
  Eigen::VectorXd mean_x_;
};

Eigen::MatrixXd oracle_cov(const ModelSpec& model, int order = 48);

struct StudyRecord {
  long n = 0;
  int rep = 0;
  double t_hat = 0.0;
  double oracle = 0.0;
  double sq_err = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool covered = false;
};

struct StudyResult {
  std::vector<long> n_grid;
  int reps = 0;
  std::vector<double> mse_per_n;
  std::vector<double> coverage_per_n;
  double slope = 0.0;  // least-squares slope of log MSE on log n
  std::vector<StudyRecord> records;
  std::uint64_t seed = 0;
};

// Replicated pair estimation across a sample-size grid. Replication r of
// grid point g uses the derived seed derive_seed(seed, g * reps + r).
StudyResult rate_study(const ModelSpec& model, int i, int j,
                       const std::vector<long>& n_grid, int reps,
                       const EstimatorConfig& cfg, std::uint64_t seed);

// Fraction of replications whose CI covers the oracle T_ij.
StudyResult coverage_study(const ModelSpec& model, int i, int j, long n,
                           int reps, double delta, const EstimatorConfig& cfg,
                           std::uint64_t seed);

struct HoeffdingResult {
  double cov_estimate = 0.0;
  double cov_se = 0.0;
  double u_mean = 0.0;
  double u_se = 0.0;
  double linear_mean = 0.0;
  double linear_se = 0.0;
  int reps = 0;
};

// Splits the series U-statistic into its degenerate U-part and linear
// part against the true density (computed by quadrature) and reports
// their empirical covariance across replications.
HoeffdingResult hoeffding_diagnostic(const ModelSpec& model, long n, int reps,
                                     const EstimatorConfig& cfg,
                                     std::uint64_t seed);

std::string study_csv(const StudyResult& result);
std::string study_summary_json(const StudyResult& result,
                               const std::string& command);

}  // namespace condcov
