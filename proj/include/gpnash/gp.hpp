#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "gpnash/kernel.hpp"
#include "gpnash/mvn.hpp"
#include "vendor_json_fwd.hpp"

namespace gpnash {

class IllConditionedError : public NumericalError {
  using NumericalError::NumericalError;
};
class DegenerateUpdateError : public NumericalError {
  using NumericalError::NumericalError;
};

struct FitConfig {
  int restarts = 10;
  int max_iters = 250;
  std::uint64_t seed = 42;
  std::optional<Kernel> warm_start;  // extra multistart point, scaled units
};

/// One fitted GP surrogate with noisy observations. Inputs are rescaled to
/// [0,1]^n and outputs standardized internally; the public surface speaks
/// raw units throughout.
class GpModel {
 public:
  /// Maximum-likelihood fit. Pass noise_vars of size 0 to estimate a
  /// homoskedastic noise variance jointly with the hyperparameters;
  /// otherwise the per-observation values are held fixed.
  static GpModel fit(const Eigen::MatrixXd& inputs,
                     const Eigen::VectorXd& outputs,
                     const Eigen::VectorXd& noise_vars, KernelFamily family,
                     const FitConfig& cfg = {});

  /// Construct with hand-set hyperparameters in raw units (no internal
  /// rescaling); mostly for tests and oracles.
  static GpModel with_hyperparameters(const Eigen::MatrixXd& inputs,
                                      const Eigen::VectorXd& outputs,
                                      const Eigen::VectorXd& noise_vars,
                                      const Kernel& kernel);

  void predict(const Eigen::MatrixXd& points, Eigen::VectorXd& mean,
               Eigen::VectorXd& variance) const;
  Eigen::MatrixXd predict_cov(const Eigen::MatrixXd& points_a,
                              const Eigen::MatrixXd& points_b) const;

  /// Log marginal likelihood of the observations in raw units.
  double log_marginal_likelihood() const;

  const Eigen::MatrixXd& inputs() const { return inputs_raw_; }
  const Eigen::VectorXd& outputs() const { return outputs_raw_; }
  const Eigen::VectorXd& noise_vars() const { return noise_raw_; }
  const Kernel& kernel() const { return kernel_; }
  /// Homoskedastic noise estimate in raw units (0 when noise was fixed).
  double estimated_noise_var() const { return est_noise_raw_; }
  /// Kernel variance in raw output units.
  double prior_variance() const {
    return kernel_.variance * out_scale_ * out_scale_;
  }
  Eigen::Index input_dim() const { return inputs_raw_.cols(); }

  nlohmann::json to_json() const;
  static GpModel from_json(const nlohmann::json& j);

 private:
  GpModel() = default;
  void factorize();
  Eigen::MatrixXd scale_points(const Eigen::MatrixXd& pts) const;

  Eigen::MatrixXd inputs_raw_;
  Eigen::VectorXd outputs_raw_;
  Eigen::VectorXd noise_raw_;
  Eigen::VectorXd in_shift_, in_span_;
  double out_mean_ = 0.0, out_scale_ = 1.0;
  Kernel kernel_;           // in scaled units
  Eigen::VectorXd noise_s_; // scaled noise variances incl. estimated part
  double est_noise_raw_ = 0.0;
  Eigen::MatrixXd inputs_s_;
  Eigen::VectorXd f_s_;
  Eigen::MatrixXd chol_;    // lower factor of K
  Eigen::VectorXd alpha_;   // K^{-1} f
};

/// Independent per-objective surrogates sharing one design.
struct MultiGp {
  std::vector<GpModel> models;
  int objectives() const { return static_cast<int>(models.size()); }
};

/// Predictive distribution of a noisy observation vector at one point,
/// diagonal across objectives.
GaussianSpec observation_dist(const MultiGp& multi, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& obs_noise_vars);

/// Joint posterior draws of all objectives over a fixed point set.
struct PathEnsemble {
  Eigen::MatrixXd sim_coords;              // N_sim x d
  std::vector<long long> sim_indices;      // grid flat indices (caller-owned)
  std::vector<Eigen::MatrixXd> draws;      // per objective, M x N_sim
  std::vector<Eigen::MatrixXd> cov_factor; // per objective, posterior cov factor
  std::vector<Eigen::VectorXd> post_mean;  // per objective, on sim_coords
  std::uint64_t seed = 0;

  int num_draws() const {
    return draws.empty() ? 0 : static_cast<int>(draws[0].rows());
  }
  int num_points() const { return static_cast<int>(sim_coords.rows()); }
  int num_objectives() const { return static_cast<int>(draws.size()); }
};

PathEnsemble simulate_paths(const MultiGp& multi,
                            const Eigen::MatrixXd& sim_coords, int num_draws,
                            std::uint64_t seed, int max_sim = 4096);

/// Precomputed pieces of the fast ensemble update at one site x: the kriging
/// weights lambda and each path's (noise-augmented) value at x. Reusable
/// across many hypothetical observations F at the same x.
struct FoxyOperator {
  std::vector<Eigen::VectorXd> lambda;     // per objective, N_sim
  std::vector<Eigen::VectorXd> value_at_x; // per objective, length M
  Eigen::VectorXd mu_x;                    // predictive mean at x
  Eigen::VectorXd obs_var;                 // sigma^2(x) + tau^2 per objective
  bool degenerate_all = false;             // all objectives already known at x
};

FoxyOperator make_foxy_operator(const PathEnsemble& ensemble,
                                const MultiGp& multi, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& obs_noise_vars,
                                std::uint64_t noise_seed);

/// Draws-only update with a prebuilt operator: writes base draws shifted by
/// the per-path residuals into `draws` (post_mean/cov_factor untouched).
/// Cheap enough for the K-fold inner loop of the SUR criterion.
void foxy_apply_draws(const FoxyOperator& op, const PathEnsemble& base,
                      const Eigen::VectorXd& f_new,
                      std::vector<Eigen::MatrixXd>& draws);

/// Conditions the ensemble on one additional observation F(x_new) = f_new.
PathEnsemble foxy_update(const PathEnsemble& ensemble, const MultiGp& multi,
                         const Eigen::VectorXd& x_new,
                         const Eigen::VectorXd& f_new,
                         const Eigen::VectorXd& obs_noise_vars,
                         std::uint64_t noise_seed = 0);

}  // namespace gpnash
