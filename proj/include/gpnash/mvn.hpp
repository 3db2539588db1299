#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>

namespace gpnash {

/// Mean/covariance pair describing a multivariate normal. The covariance is
/// symmetrized on construction and must be PSD up to jitter repair.
struct GaussianSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  GaussianSpec(Eigen::VectorXd mu, Eigen::MatrixXd cov);

  Eigen::Index dim() const { return mean.size(); }
};

struct CdfResult {
  double value;
  double error_estimate;
};

class InvalidInputError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
class UnsupportedSizeError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Lower Cholesky factor of a symmetric matrix, escalating diagonal jitter
/// from 1e-10*trace/q by factors of 10 up to 1e-6*trace/q. Throws
/// NumericalError when that fails.
Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& sym,
                                  double* jitter_used = nullptr);

/// Like jittered_cholesky but falls back to an eigendecomposition with
/// negative eigenvalues clipped to zero; the returned factor A satisfies
/// A*A^T ~= sym but is not triangular in the fallback path.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& sym);

/// P(Z <= 0) for Z ~ N(mean, covariance), by Genz quasi-Monte-Carlo with
/// variable reordering and a randomized Richtmyer rule. Deterministic for a
/// fixed seed; error_estimate is three sample standard errors over the
/// random shifts. Supports dimensions up to max_dim (default 1000).
CdfResult mvn_cdf_at_zero(const GaussianSpec& spec, double accuracy = 1e-3,
                          std::uint64_t seed = 20090527u, int max_dim = 1000);

/// count i.i.d. draws (rows) from the spec, reproducible by seed.
Eigen::MatrixXd mvn_sample(const GaussianSpec& spec, int count,
                           std::uint64_t seed);

}  // namespace gpnash
