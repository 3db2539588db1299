#include "gpnash/mvn.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <vector>

#include "gpnash/math.hpp"

namespace gpnash {

namespace {

constexpr double kSymTol = 1e-10;

// first primes, for the Richtmyer sqrt-prime lattice generators
const int kPrimes[] = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,
    53,  59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113,
    127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197,
    199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281};

double nth_sqrt_prime_frac(int k) {
  if (k < static_cast<int>(std::size(kPrimes))) {
    double s = std::sqrt(static_cast<double>(kPrimes[k]));
    return s - std::floor(s);
  }
  // beyond the table, fall back to a low-discrepancy-ish irrational
  double s = std::sqrt(static_cast<double>(283 + 6 * (k - 59)));
  return s - std::floor(s);
}

}  // namespace

GaussianSpec::GaussianSpec(Eigen::VectorXd mu, Eigen::MatrixXd cov)
    : mean(std::move(mu)), covariance(std::move(cov)) {
  if (covariance.rows() != covariance.cols())
    throw InvalidInputError("GaussianSpec: covariance must be square");
  if (mean.size() != covariance.rows())
    throw InvalidInputError("GaussianSpec: mean/covariance dimension mismatch");
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  const double asym =
      (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymTol * scale) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "GaussianSpec: covariance not symmetric (max asymmetry "
                  "%.3e, tolerance %.3e)",
                  asym, kSymTol * scale);
    throw InvalidInputError(buf);
  }
  covariance = 0.5 * (covariance + covariance.transpose().eval());
}

Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& sym,
                                  double* jitter_used) {
  const Eigen::Index q = sym.rows();
  const double scale = std::max(sym.trace() / static_cast<double>(q), 0.0);
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    Eigen::MatrixXd work = sym;
    if (jitter > 0.0) work.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = jitter;
      return llt.matrixL();
    }
    jitter = (jitter == 0.0) ? 1e-10 * std::max(scale, 1e-300) : jitter * 10.0;
    if (jitter > 1e-6 * std::max(scale, 1e-300) * 1.01) break;
  }
  throw NumericalError("jittered_cholesky: matrix not PSD after jitter repair");
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& sym) {
  try {
    return jittered_cholesky(sym);
  } catch (const NumericalError&) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success)
      throw NumericalError("psd_factor: eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
  }
}

Eigen::MatrixXd mvn_sample(const GaussianSpec& spec, int count,
                           std::uint64_t seed) {
  if (count <= 0) throw InvalidInputError("mvn_sample: count must be positive");
  const Eigen::Index q = spec.dim();
  Eigen::MatrixXd factor = psd_factor(spec.covariance);
  Rng rng(seed);
  Eigen::MatrixXd z(count, q);
  for (int r = 0; r < count; ++r)
    for (Eigen::Index c = 0; c < q; ++c) z(r, c) = rng.normal();
  Eigen::MatrixXd out = z * factor.transpose();
  out.rowwise() += spec.mean.transpose();
  return out;
}

namespace {

// Reordering Cholesky for the Genz algorithm: at each step pick the
// remaining variable with the smallest conditional probability, using the
// truncated-normal expectation of the previous coordinates.
struct GenzFactor {
  Eigen::MatrixXd L;
  Eigen::VectorXd b;      // upper limits, reordered
  std::vector<bool> dgn;  // dimensions that became deterministic
  bool infeasible = false;
};

GenzFactor genz_reorder(Eigen::MatrixXd sig, Eigen::VectorXd b) {
  const Eigen::Index q = b.size();
  GenzFactor out;
  out.L = Eigen::MatrixXd::Zero(q, q);
  out.dgn.assign(q, false);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(q);
  const double eps = 1e-12 * std::max(1.0, sig.diagonal().maxCoeff());
  for (Eigen::Index i = 0; i < q; ++i) {
    // pick the index with minimal conditional Phi
    Eigen::Index best = i;
    double best_ratio = INFINITY;
    for (Eigen::Index j = i; j < q; ++j) {
      double d = sig(j, j);
      double num = b(j);
      for (Eigen::Index k = 0; k < i; ++k) {
        d -= out.L(j, k) * out.L(j, k);
        num -= out.L(j, k) * y(k);
      }
      double ratio =
          (d <= eps) ? (num >= 0 ? INFINITY : -INFINITY) : num / std::sqrt(d);
      if (ratio < best_ratio) {
        best_ratio = ratio;
        best = j;
      }
    }
    if (best != i) {
      sig.row(i).swap(sig.row(best));
      sig.col(i).swap(sig.col(best));
      std::swap(b(i), b(best));
      out.L.row(i).swap(out.L.row(best));
    }
    double d = sig(i, i);
    double num = b(i);
    for (Eigen::Index k = 0; k < i; ++k) {
      d -= out.L(i, k) * out.L(i, k);
      num -= out.L(i, k) * y(k);
    }
    if (d <= eps) {
      // deterministic coordinate: constraint is certain or impossible
      if (num < 0) {
        out.infeasible = true;
        out.b = b;
        return out;
      }
      out.dgn[i] = true;
      out.L(i, i) = 0.0;
      y(i) = 0.0;
      continue;
    }
    const double lii = std::sqrt(d);
    out.L(i, i) = lii;
    for (Eigen::Index r = i + 1; r < q; ++r) {
      double v = sig(r, i);
      for (Eigen::Index k = 0; k < i; ++k) v -= out.L(r, k) * out.L(i, k);
      out.L(r, i) = v / lii;
    }
    const double e = num / lii;
    const double phi_e = norm_cdf(e);
    y(i) = (phi_e > 1e-300) ? -norm_pdf(e) / phi_e : -std::abs(e);
  }
  out.b = b;
  return out;
}

double genz_integrand(const GenzFactor& g, const double* w) {
  const Eigen::Index q = g.b.size();
  double p = 1.0;
  double z[1024];
  Eigen::Index wi = 0;
  for (Eigen::Index i = 0; i < q; ++i) {
    if (g.dgn[i]) {
      z[i] = 0.0;
      continue;
    }
    double num = g.b(i);
    for (Eigen::Index k = 0; k < i; ++k) num -= g.L(i, k) * z[k];
    const double e = norm_cdf(num / g.L(i, i));
    p *= e;
    if (p <= 0.0) return 0.0;
    if (i + 1 < q) {
      double u = e * w[wi++];
      u = std::min(std::max(u, 1e-16), 1.0 - 1e-16);
      z[i] = norm_quantile(u);
    }
  }
  return p;
}

}  // namespace

CdfResult mvn_cdf_at_zero(const GaussianSpec& spec, double accuracy,
                          std::uint64_t seed, int max_dim) {
  const Eigen::Index q = spec.dim();
  if (q < 1) throw InvalidInputError("mvn_cdf_at_zero: empty spec");
  if (q > max_dim)
    throw UnsupportedSizeError("mvn_cdf_at_zero: dimension exceeds maximum");
  if (accuracy <= 0.0)
    throw InvalidInputError("mvn_cdf_at_zero: accuracy must be positive");

  Eigen::VectorXd b = -spec.mean;
  if (q == 1) {
    const double v = spec.covariance(0, 0);
    double p;
    if (v <= 1e-300)
      p = (b(0) >= 0.0) ? 1.0 : 0.0;
    else
      p = norm_cdf(b(0) / std::sqrt(v));
    return {p, 0.0};
  }

  // jitter like the sampler does, so near-degenerate posteriors behave
  Eigen::MatrixXd sig = spec.covariance;
  const double scale =
      std::max(sig.trace() / static_cast<double>(q), 0.0);
  sig.diagonal().array() += 1e-12 * std::max(scale, 1e-300);

  GenzFactor g = genz_reorder(std::move(sig), std::move(b));
  if (g.infeasible) return {0.0, 0.0};

  const int nshift = 12;
  const Eigen::Index nw = q - 1;
  std::vector<double> gen(nw);
  for (Eigen::Index k = 0; k < nw; ++k)
    gen[k] = nth_sqrt_prime_frac(static_cast<int>(k));

  Rng rng(seed);
  std::vector<std::vector<double>> shift(nshift, std::vector<double>(nw));
  for (auto& s : shift)
    for (auto& v : s) v = rng.uniform();

  std::vector<double> sum(nshift, 0.0);
  std::vector<double> w(nw);
  long long n_per_shift = 0;
  const long long batch = std::max<long long>(64, 8 * q);
  const long long max_per_shift =
      std::max<long long>(2000, 2000000 / (nshift * std::max<Eigen::Index>(q, 1)));

  double value = 0.0, err = INFINITY;
  while (n_per_shift < max_per_shift) {
    for (long long j = n_per_shift; j < n_per_shift + batch; ++j) {
      const double jj = static_cast<double>(j + 1);
      for (int s = 0; s < nshift; ++s) {
        for (Eigen::Index k = 0; k < nw; ++k) {
          double t = jj * gen[k] + shift[s][k];
          t -= std::floor(t);
          w[k] = std::abs(2.0 * t - 1.0);  // baker transform
        }
        sum[s] += genz_integrand(g, w.data());
      }
    }
    n_per_shift += batch;
    double mean = 0.0;
    for (int s = 0; s < nshift; ++s) mean += sum[s] / n_per_shift;
    mean /= nshift;
    double var = 0.0;
    for (int s = 0; s < nshift; ++s) {
      const double d = sum[s] / n_per_shift - mean;
      var += d * d;
    }
    var /= (nshift - 1);
    value = mean;
    err = 3.0 * std::sqrt(var / nshift);
    if (err <= accuracy) break;
  }
  value = std::min(std::max(value, 0.0), 1.0);
  return {value, err};
}

}  // namespace gpnash
