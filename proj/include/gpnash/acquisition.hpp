#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "gpnash/game.hpp"
#include "gpnash/gp.hpp"

namespace gpnash {

struct AcquisitionConfig {
  int M = 20;            // posterior draws behind Gamma-hat
  int K = 20;            // hypothetical observation draws for the SUR average
  int R = 512;           // MC samples for the sampled P_i branch
  int cdf_switch = 20;   // exact CDF while m_i - 1 <= cdf_switch
  long long N_sim = 0;   // simulation subset size, 0 = full grid
  long long N_cand = 0;  // candidate subset size, 0 = full grid
  double cdf_accuracy = 1e-3;
  Eigen::VectorXd obs_noise_vars;  // per objective; empty = noise-free
  std::uint64_t seed = 20090527;
};

/// Target objective vector and surrounding box in objective space, used by
/// the cheap subset scores.
struct EquilibriumTarget {
  Eigen::VectorXd T_E;
  Eigen::VectorXd T_L, T_U;
};

/// P_i for every own action on the slice of `player` through base_index:
/// entry k is the posterior probability that action k minimizes objective i
/// with the opponents fixed. Exact CDF when m_i - 1 <= cdf_switch, otherwise
/// one shared R-sample batch for the whole slice (seeded per slice, so all
/// candidates on the slice see the same batch).
Eigen::VectorXd player_slice_probs(const MultiGp& multi,
                                   const StrategyGrid& grid, int player,
                                   long long base_index,
                                   const AcquisitionConfig& cfg);

/// P_E(x) = prod_i P_i(x).
double prob_equilibrium(const MultiGp& multi, const StrategyGrid& grid,
                        long long x_index, const AcquisitionConfig& cfg);

/// P_E for every grid point, computed slice-by-slice (each slice's batch or
/// CDF evaluations are shared across its points).
Eigen::VectorXd prob_equilibrium_all(const MultiGp& multi,
                                     const StrategyGrid& grid,
                                     const AcquisitionConfig& cfg);

/// det of the p x p sample covariance (n-1 denominator) of the equilibrium
/// value points; 0 with fewer than two points.
double gamma_hat(const std::vector<Eigen::VectorXd>& nash_points);

/// Gamma-hat of a draw set over a factorial simulation grid: per draw, the
/// equilibrium values are extracted (multiple equilibria contribute their
/// componentwise mean; draws without an equilibrium are dropped).
/// no_ne_fraction (optional) receives the dropped fraction.
double gamma_of_draws(const std::vector<Eigen::MatrixXd>& draws,
                      const StrategyGrid& sim_grid,
                      double* no_ne_fraction = nullptr);

/// SUR criterion J-hat(x): average Gamma-hat over K hypothetical
/// observations at x applied to the shared base ensemble via the fast
/// update. The K standard-normal draws depend on the seed only, so
/// candidates compared under one seed share common random numbers.
/// per_draw (optional) receives the K individual Gamma-hat values.
double sur_criterion(const MultiGp& multi, const PathEnsemble& ensemble,
                     const StrategyGrid& sim_grid, const Eigen::VectorXd& x,
                     const AcquisitionConfig& cfg, std::uint64_t seed,
                     std::vector<double>* per_draw = nullptr);

/// C_target = prod_i phi((T_Ei - mu_i(x)) / sigma_i(x)).
double score_target(const MultiGp& multi, const StrategyGrid& grid,
                    long long x_index, const Eigen::VectorXd& T_E);

/// C_box = prod_i P(T_Li <= Y_i(x) <= T_Ui), clipped at 0.
double score_box(const MultiGp& multi, const StrategyGrid& grid,
                 long long x_index, const Eigen::VectorXd& T_L,
                 const Eigen::VectorXd& T_U);

/// Factorial sub-grid selection: per-player marginal scores (mean point
/// score over all profiles containing the action), then per player a
/// ceil(target_size^(1/p))-sized subset drawn without replacement with
/// probabilities proportional to the marginals; the top-marginal action is
/// always included. target_size >= N returns the full grid's subsets.
std::vector<std::vector<int>> select_subset(const StrategyGrid& grid,
                                            const Eigen::VectorXd& scores,
                                            long long target_size,
                                            std::uint64_t seed);

}  // namespace gpnash
