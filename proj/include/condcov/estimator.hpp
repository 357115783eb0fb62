#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "condcov/basis.hpp"
#include "condcov/density.hpp"
#include "condcov/pilot.hpp"

namespace condcov {

// Knobs of the two-stage estimator. `delta` is the CI miscoverage level
// (0.05 gives 95% intervals).
struct EstimatorConfig {
  double delta = 0.05;
  int quad_order = 24;
  SizeRule size_rule{};
  BandwidthRule bandwidth{};
  ClipConfig clip{};
  double cube_margin = 0.05;
  // Optional fixed per-column bounds (p+1 columns: the x's then y), row 0
  // holding lows and row 1 highs. When absent each pair estimates on the
  // data range widened by cube_margin.
  std::optional<Eigen::MatrixXd> bounds;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct PairEstimate {
  int i = 0;  // 1-based, i <= j after canonicalization
  int j = 0;
  double t_hat = 0.0;
  double c_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  long n1 = 0;
  long n2 = 0;
  int basis_size = 0;
  bool small_sample = false;
};

struct MatrixEstimate {
  Eigen::MatrixXd t_matrix;
  Eigen::MatrixXd mean_outer;
  Eigen::MatrixXd cov_matrix;
  Eigen::VectorXd vech_values;
  Eigen::MatrixXd vech_cov;
  Eigen::VectorXd eigenvalues;      // descending, clipped at zero
  Eigen::VectorXd eigenvalues_raw;  // descending, unclipped
  Eigen::MatrixXd eigenvectors;     // orthonormal columns
  bool psd_clipped = false;
  std::vector<PairEstimate> per_pair;  // in vech slot order
  std::uint64_t seed = 0;
};

// Entry estimate for coordinates i, j (1-based). The pair is estimated on
// its own data-driven cube mapped to the unit cube; the result and its
// variance are mapped back to the original scale.
PairEstimate estimate_pair(const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& y, int i, int j,
                           const EstimatorConfig& cfg);

MatrixEstimate estimate_matrix(const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y,
                               const EstimatorConfig& cfg);

// Unbiased sample variance of H1(field, row) over the subsample.
double asymptotic_variance(const TriDensityField& field, const TriSample& d2);

// Half-vectorization: stacks the lower-triangular columns.
Eigen::VectorXd vech(const Eigen::MatrixXd& mat, double sym_tol = 1e-9);
Eigen::MatrixXd unvech(const Eigen::VectorXd& v);

// Unbiased covariance of per-row influence vectors (rows of `influence`).
Eigen::MatrixXd vech_covariance(const Eigen::MatrixXd& influence);

struct EdrDirections {
  Eigen::VectorXd eigenvalues;  // descending
  Eigen::MatrixXd eigenvectors; // columns, first nonzero component positive
};

EdrDirections edr_directions(const Eigen::MatrixXd& cov_matrix, int k);

// Result serialization used by the CLI and the bindings.
std::string to_json(const MatrixEstimate& est, const EstimatorConfig& cfg);

}  // namespace condcov
