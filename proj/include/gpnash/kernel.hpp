#pragma once

#include <Eigen/Dense>
#include <string>

namespace gpnash {

enum class KernelFamily { SquaredExponential, Matern52, Matern32 };

KernelFamily kernel_family_from_string(const std::string& name);
std::string to_string(KernelFamily family);

/// Stationary kernel with per-dimension lengthscales; k(x,x) == variance.
struct Kernel {
  KernelFamily family = KernelFamily::Matern52;
  Eigen::VectorXd lengthscales;
  double variance = 1.0;

  double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

  /// Cross-covariance of two point sets (rows are points).
  Eigen::MatrixXd cross(const Eigen::MatrixXd& a,
                        const Eigen::MatrixXd& b) const;

  /// Symmetric covariance of one point set.
  Eigen::MatrixXd symmetric(const Eigen::MatrixXd& a) const;

 private:
  double from_r2(double r2) const;
};

}  // namespace gpnash
