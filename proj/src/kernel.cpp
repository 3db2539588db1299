#include "gpnash/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace gpnash {

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "squared-exponential" || name == "gaussian")
    return KernelFamily::SquaredExponential;
  if (name == "matern-5/2" || name == "matern52") return KernelFamily::Matern52;
  if (name == "matern-3/2" || name == "matern32") return KernelFamily::Matern32;
  throw std::invalid_argument("unknown kernel family: " + name);
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SquaredExponential:
      return "squared-exponential";
    case KernelFamily::Matern52:
      return "matern-5/2";
    case KernelFamily::Matern32:
      return "matern-3/2";
  }
  return "?";
}

double Kernel::from_r2(double r2) const {
  switch (family) {
    case KernelFamily::SquaredExponential:
      return variance * std::exp(-0.5 * r2);
    case KernelFamily::Matern52: {
      const double r = std::sqrt(5.0 * r2);
      return variance * (1.0 + r + r * r / 3.0) * std::exp(-r);
    }
    case KernelFamily::Matern32: {
      const double r = std::sqrt(3.0 * r2);
      return variance * (1.0 + r) * std::exp(-r);
    }
  }
  return 0.0;
}

double Kernel::operator()(const Eigen::VectorXd& a,
                          const Eigen::VectorXd& b) const {
  double r2 = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double d = (a(k) - b(k)) / lengthscales(k);
    r2 += d * d;
  }
  return from_r2(r2);
}

Eigen::MatrixXd Kernel::cross(const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd as = a.array().rowwise() /
                       lengthscales.transpose().array();
  Eigen::MatrixXd bs = b.array().rowwise() /
                       lengthscales.transpose().array();
  Eigen::VectorXd an = as.rowwise().squaredNorm();
  Eigen::VectorXd bn = bs.rowwise().squaredNorm();
  Eigen::MatrixXd r2 = (-2.0 * as * bs.transpose()).colwise() + an;
  r2.rowwise() += bn.transpose();
  Eigen::MatrixXd out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      out(i, j) = from_r2(std::max(r2(i, j), 0.0));
  return out;
}

Eigen::MatrixXd Kernel::symmetric(const Eigen::MatrixXd& a) const {
  Eigen::MatrixXd out = cross(a, a);
  out = 0.5 * (out + out.transpose().eval());
  out.diagonal().setConstant(variance);
  return out;
}

}  // namespace gpnash
