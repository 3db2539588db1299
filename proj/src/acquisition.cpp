#include "gpnash/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpnash/math.hpp"

namespace gpnash {

namespace {

Eigen::VectorXd noise_or_zero(const AcquisitionConfig& cfg, int p) {
  if (cfg.obs_noise_vars.size() == 0) return Eigen::VectorXd::Zero(p);
  if (static_cast<int>(cfg.obs_noise_vars.size()) != p)
    throw InvalidInputError("obs_noise_vars size must match objective count");
  return cfg.obs_noise_vars;
}

// Posterior of objective `player` over one own-action slice.
void slice_posterior(const MultiGp& multi, const StrategyGrid& grid,
                     int player, const std::vector<long long>& slice,
                     Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
  const Eigen::MatrixXd pts = grid.points(slice);
  Eigen::VectorXd var;
  multi.models[player].predict(pts, mu, var);
  cov = multi.models[player].predict_cov(pts, pts);
  cov = (0.5 * (cov + cov.transpose())).eval();  // round-off repair
}

// P(action l minimizes) through the exact CDF of the (m-1)-dim difference
// vector Z_j = Y(x^l) - Y(x^j).
double exact_min_prob(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov,
                      int l, double accuracy) {
  const int m = static_cast<int>(mu.size());
  if (m == 1) return 1.0;
  Eigen::VectorXd zmu(m - 1);
  Eigen::MatrixXd zcov(m - 1, m - 1);
  int a = 0;
  for (int j = 0; j < m; ++j) {
    if (j == l) continue;
    zmu(a) = mu(l) - mu(j);
    int b = 0;
    for (int k = 0; k < m; ++k) {
      if (k == l) continue;
      zcov(a, b) = cov(l, l) + cov(j, k) - cov(l, j) - cov(l, k);
      ++b;
    }
    ++a;
  }
  // the four-term assembly rounds differently across the diagonal when the
  // posterior covariance scale dwarfs the difference scale; symmetrize
  zcov = (0.5 * (zcov + zcov.transpose())).eval();
  return mvn_cdf_at_zero(GaussianSpec(zmu, zcov), accuracy).value;
}

std::uint64_t slice_seed(const AcquisitionConfig& cfg, int player,
                         long long slice_root) {
  return derive_seed(cfg.seed, 0xacu + static_cast<std::uint64_t>(player),
                     static_cast<std::uint64_t>(slice_root));
}

Eigen::VectorXd slice_probs_impl(const MultiGp& multi,
                                 const StrategyGrid& grid, int player,
                                 const std::vector<long long>& slice,
                                 const AcquisitionConfig& cfg) {
  const int m = static_cast<int>(slice.size());
  if (m == 1) return Eigen::VectorXd::Ones(1);
  Eigen::VectorXd mu;
  Eigen::MatrixXd cov;
  slice_posterior(multi, grid, player, slice, mu, cov);
  Eigen::VectorXd probs(m);
  if (m - 1 <= cfg.cdf_switch) {
    for (int l = 0; l < m; ++l)
      probs(l) = exact_min_prob(mu, cov, l, cfg.cdf_accuracy);
  } else {
    // one shared sample batch for the whole slice
    const Eigen::MatrixXd batch = mvn_sample(
        GaussianSpec(mu, cov), cfg.R, slice_seed(cfg, player, slice[0]));
    probs.setZero();
    for (int r = 0; r < cfg.R; ++r) {
      int arg = 0;
      batch.row(r).minCoeff(&arg);
      probs(arg) += 1.0;
    }
    probs /= cfg.R;
  }
  return probs;
}

}  // namespace

Eigen::VectorXd player_slice_probs(const MultiGp& multi,
                                   const StrategyGrid& grid, int player,
                                   long long base_index,
                                   const AcquisitionConfig& cfg) {
  const auto slice = grid.own_action_slice(player, base_index);
  return slice_probs_impl(multi, grid, player, slice, cfg);
}

double prob_equilibrium(const MultiGp& multi, const StrategyGrid& grid,
                        long long x_index, const AcquisitionConfig& cfg) {
  const auto tuple = grid.tuple_of(x_index);
  double pe = 1.0;
  for (int i = 0; i < grid.players() && pe > 0.0; ++i) {
    const auto slice = grid.own_action_slice(i, x_index);
    const int m = static_cast<int>(slice.size());
    if (m == 1) continue;
    if (m - 1 <= cfg.cdf_switch) {
      Eigen::VectorXd mu;
      Eigen::MatrixXd cov;
      slice_posterior(multi, grid, i, slice, mu, cov);
      pe *= exact_min_prob(mu, cov, tuple[i], cfg.cdf_accuracy);
    } else {
      pe *= slice_probs_impl(multi, grid, i, slice, cfg)(tuple[i]);
    }
  }
  return pe;
}

Eigen::VectorXd prob_equilibrium_all(const MultiGp& multi,
                                     const StrategyGrid& grid,
                                     const AcquisitionConfig& cfg) {
  Eigen::VectorXd pe = Eigen::VectorXd::Ones(grid.size());
  for (int i = 0; i < grid.players(); ++i) {
    const long long m = grid.num_actions(i);
    const long long profiles = grid.size() / m;
    // slice roots: all flats whose own action index is zero
    for (long long op = 0; op < profiles; ++op) {
      // reconstruct the root from the opponent profile id via the stride
      long long stride = 1;
      for (int j = grid.players() - 1; j > i; --j) stride *= grid.num_actions(j);
      const long long root = (op / stride) * (stride * m) + op % stride;
      const auto slice = grid.own_action_slice(i, root);
      const Eigen::VectorXd probs = slice_probs_impl(multi, grid, i, slice, cfg);
      for (long long k = 0; k < m; ++k) pe(slice[k]) *= probs(k);
    }
  }
  return pe;
}

double gamma_hat(const std::vector<Eigen::VectorXd>& nash_points) {
  const int n = static_cast<int>(nash_points.size());
  if (n < 2) return 0.0;
  const int p = static_cast<int>(nash_points[0].size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  for (const auto& z : nash_points) mean += z;
  mean /= n;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
  for (const auto& z : nash_points) {
    const Eigen::VectorXd d = z - mean;
    cov += d * d.transpose();
  }
  cov /= (n - 1);
  return cov.determinant();
}

double gamma_of_draws(const std::vector<Eigen::MatrixXd>& draws,
                      const StrategyGrid& sim_grid, double* no_ne_fraction) {
  const int p = static_cast<int>(draws.size());
  const int m_draws = static_cast<int>(draws[0].rows());
  const long long n = sim_grid.size();
  NashExtractor extractor(sim_grid);
  Eigen::MatrixXd values(n, p);
  std::vector<long long> indices;
  std::vector<Eigen::VectorXd> points;
  points.reserve(static_cast<std::size_t>(m_draws));
  int empty = 0;
  for (int j = 0; j < m_draws; ++j) {
    for (int i = 0; i < p; ++i) values.col(i) = draws[i].row(j).transpose();
    extractor.extract(values, indices);
    if (indices.empty()) {
      ++empty;
      continue;
    }
    Eigen::VectorXd rep = Eigen::VectorXd::Zero(p);
    for (long long f : indices) rep += values.row(f).transpose();
    points.push_back(rep / static_cast<double>(indices.size()));
  }
  if (no_ne_fraction)
    *no_ne_fraction = static_cast<double>(empty) / m_draws;
  return gamma_hat(points);
}

double sur_criterion(const MultiGp& multi, const PathEnsemble& ensemble,
                     const StrategyGrid& sim_grid, const Eigen::VectorXd& x,
                     const AcquisitionConfig& cfg, std::uint64_t seed,
                     std::vector<double>* per_draw) {
  const int p = ensemble.num_objectives();
  const Eigen::VectorXd noise = noise_or_zero(cfg, p);
  const FoxyOperator op =
      make_foxy_operator(ensemble, multi, x, noise, derive_seed(seed, 0x5e));
  if (op.degenerate_all) {
    // conditioning on known information leaves the ensemble untouched
    const double base = gamma_of_draws(ensemble.draws, sim_grid);
    if (per_draw) per_draw->assign(static_cast<std::size_t>(cfg.K), base);
    return base;
  }
  // common random numbers: the K standard-normal vectors depend on the
  // seed only, so all candidates scored under one seed share them
  Rng zrng(derive_seed(seed, 0xccu));
  Eigen::MatrixXd z(cfg.K, p);
  for (int k = 0; k < cfg.K; ++k)
    for (int i = 0; i < p; ++i) z(k, i) = zrng.normal();

  if (per_draw) per_draw->clear();
  std::vector<Eigen::MatrixXd> updated;
  double acc = 0.0;
  for (int k = 0; k < cfg.K; ++k) {
    Eigen::VectorXd f(p);
    for (int i = 0; i < p; ++i)
      f(i) = op.mu_x(i) + std::sqrt(std::max(op.obs_var(i), 0.0)) * z(k, i);
    foxy_apply_draws(op, ensemble, f, updated);
    const double g = gamma_of_draws(updated, sim_grid);
    acc += g;
    if (per_draw) per_draw->push_back(g);
  }
  return acc / cfg.K;
}

double score_target(const MultiGp& multi, const StrategyGrid& grid,
                    long long x_index, const Eigen::VectorXd& T_E) {
  const Eigen::MatrixXd pt = grid.point(x_index).transpose();
  double score = 1.0;
  for (int i = 0; i < multi.objectives(); ++i) {
    Eigen::VectorXd mu, var;
    multi.models[i].predict(pt, mu, var);
    const double sd = std::max(std::sqrt(std::max(var(0), 0.0)), 1e-12);
    score *= norm_pdf((T_E(i) - mu(0)) / sd);
  }
  return score;
}

double score_box(const MultiGp& multi, const StrategyGrid& grid,
                 long long x_index, const Eigen::VectorXd& T_L,
                 const Eigen::VectorXd& T_U) {
  if (((T_U - T_L).array() < 0.0).any())
    throw InvalidInputError("score_box: empty box");
  const Eigen::MatrixXd pt = grid.point(x_index).transpose();
  double score = 1.0;
  for (int i = 0; i < multi.objectives(); ++i) {
    Eigen::VectorXd mu, var;
    multi.models[i].predict(pt, mu, var);
    const double sd = std::max(std::sqrt(std::max(var(0), 0.0)), 1e-12);
    const double term =
        norm_cdf((T_U(i) - mu(0)) / sd) - norm_cdf((T_L(i) - mu(0)) / sd);
    score *= std::max(term, 0.0);
  }
  return score;
}

std::vector<std::vector<int>> select_subset(const StrategyGrid& grid,
                                            const Eigen::VectorXd& scores,
                                            long long target_size,
                                            std::uint64_t seed) {
  const int p = grid.players();
  if (scores.size() != grid.size())
    throw InvalidInputError("select_subset: one score per grid point required");
  if (!scores.allFinite() || (scores.array() < 0.0).any())
    throw InvalidInputError("select_subset: scores must be finite and >= 0");
  if (scores.maxCoeff() <= 0.0)
    throw InvalidInputError("select_subset: scores must not be all zero");

  std::vector<std::vector<int>> subsets(p);
  if (target_size >= grid.size()) {
    for (int i = 0; i < p; ++i) {
      subsets[i].resize(grid.num_actions(i));
      std::iota(subsets[i].begin(), subsets[i].end(), 0);
    }
    return subsets;
  }

  // marginal score per action: mean over all profiles containing it
  std::vector<Eigen::VectorXd> marginal(p);
  for (int i = 0; i < p; ++i)
    marginal[i] = Eigen::VectorXd::Zero(grid.num_actions(i));
  std::vector<int> tuple;
  for (long long f = 0; f < grid.size(); ++f) {
    tuple = grid.tuple_of(f);
    for (int i = 0; i < p; ++i) marginal[i](tuple[i]) += scores(f);
  }

  const int want = static_cast<int>(
      std::ceil(std::pow(static_cast<double>(target_size), 1.0 / p)));
  Rng rng(derive_seed(seed, 0x5bu));
  for (int i = 0; i < p; ++i) {
    const int m = grid.num_actions(i);
    const int n_i = std::min(want, m);
    Eigen::VectorXd w = marginal[i];
    std::vector<int> chosen;
    int top = 0;
    w.maxCoeff(&top);
    chosen.push_back(top);
    w(top) = 0.0;
    while (static_cast<int>(chosen.size()) < n_i) {
      const double total = w.sum();
      int pick = -1;
      if (total <= 0.0) {
        // remaining mass exhausted: uniform among the leftovers
        std::vector<int> rest;
        for (int k = 0; k < m; ++k)
          if (std::find(chosen.begin(), chosen.end(), k) == chosen.end())
            rest.push_back(k);
        pick = rest[static_cast<std::size_t>(rng.next_u64() % rest.size())];
      } else {
        double u = rng.uniform() * total;
        for (int k = 0; k < m; ++k) {
          if (w(k) <= 0.0) continue;
          u -= w(k);
          if (u <= 0.0) {
            pick = k;
            break;
          }
        }
        if (pick < 0)
          for (int k = m - 1; k >= 0; --k)
            if (w(k) > 0.0) {
              pick = k;
              break;
            }
      }
      chosen.push_back(pick);
      w(pick) = 0.0;
    }
    std::sort(chosen.begin(), chosen.end());
    subsets[i] = std::move(chosen);
  }
  return subsets;
}

}  // namespace gpnash
