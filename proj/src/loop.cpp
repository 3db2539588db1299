#include "gpnash/loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>
#include <set>

#include "gpnash/math.hpp"

namespace gpnash {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::vector<double>> mat_to_rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> v(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    v[i].assign(m.row(i).begin(), m.row(i).end());
  return v;
}

Eigen::MatrixXd rows_to_mat(const nlohmann::json& v) {
  Eigen::MatrixXd out(v.size(), v.empty() ? 0 : v[0].size());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index k = 0; k < out.cols(); ++k)
      out(i, k) = v[i][k].get<double>();
  return out;
}

std::vector<double> vec_to_list(const Eigen::VectorXd& x) {
  return std::vector<double>(x.begin(), x.end());
}

Eigen::VectorXd list_to_vec(const nlohmann::json& v) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = v[i].get<double>();
  return out;
}

nlohmann::json record_to_json(const IterationRecord& r, bool include_timing) {
  nlohmann::json j;
  j["iteration"] = r.iteration;
  j["chosen_index"] = r.chosen_index;
  j["observed"] = vec_to_list(r.observed);
  j["repetitions"] = r.repetitions;
  j["best_pe_index"] = r.best_pe_index;
  j["best_pe"] = r.best_pe;
  j["criterion"] = r.criterion;
  j["no_ne_fraction"] = r.no_ne_fraction;
  if (include_timing) j["wall_time_s"] = r.wall_time_s;
  return j;
}

IterationRecord record_from_json(const nlohmann::json& j) {
  IterationRecord r;
  r.iteration = j.at("iteration").get<int>();
  r.chosen_index = j.at("chosen_index").get<long long>();
  r.observed = list_to_vec(j.at("observed"));
  r.repetitions = j.at("repetitions").get<int>();
  r.best_pe_index = j.at("best_pe_index").get<long long>();
  r.best_pe = j.at("best_pe").get<double>();
  r.criterion = j.at("criterion").get<double>();
  r.no_ne_fraction = j.at("no_ne_fraction").get<double>();
  if (j.contains("wall_time_s")) r.wall_time_s = j["wall_time_s"].get<double>();
  return r;
}

// Per-player squared distance table between a rescaled point and the
// rescaled action rows; used by the nearest-grid-point mapping.
long long nearest_flat(const StrategyGrid& grid, const Eigen::VectorXd& u,
                       const Eigen::MatrixXd& bounds) {
  std::vector<int> tuple(grid.players());
  int off = 0;
  for (int i = 0; i < grid.players(); ++i) {
    const Eigen::MatrixXd& acts = grid.actions(i);
    const int bd = grid.block_dim(i);
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int a = 0; a < acts.rows(); ++a) {
      double d2 = 0.0;
      for (int c = 0; c < bd; ++c) {
        const double lo = bounds(off + c, 0), hi = bounds(off + c, 1);
        const double span = hi > lo ? hi - lo : 1.0;
        const double diff = (acts(a, c) - lo) / span - u(off + c);
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        arg = a;
      }
    }
    tuple[i] = arg;
    off += bd;
  }
  return grid.flat_of(tuple);
}

double min_pairwise_sq(const Eigen::MatrixXd& x) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < x.rows(); ++a)
    for (Eigen::Index b = a + 1; b < x.rows(); ++b)
      best = std::min(best, (x.row(a) - x.row(b)).squaredNorm());
  return best;
}

struct LoopState {
  std::vector<long long> design;
  Eigen::MatrixXd obs;   // n x p replicate means
  Eigen::MatrixXd tau2;  // n x p replicate-mean variances (0 if noise-free)
  std::vector<IterationRecord> iters;
  Eigen::VectorXd box_lo, box_hi;
  int consecutive_no_ne = 0;
  long long eval_count = 0;
};

Checkpoint to_checkpoint(const LoopState& st) {
  Checkpoint c;
  c.design = st.design;
  c.observations = st.obs;
  c.obs_noise_vars = st.tau2;
  c.iterations = st.iters;
  c.box_lo = st.box_lo;
  c.box_hi = st.box_hi;
  c.consecutive_no_ne = st.consecutive_no_ne;
  c.eval_count = st.eval_count;
  return c;
}

// Evaluates the problem at x; for noisy problems the replicate stream is
// keyed by the point's position in the design, so a resumed run redraws
// exactly the same noise.
Eigen::VectorXd evaluate_point(const GameProblem& problem,
                               const Eigen::VectorXd& x, int reps,
                               std::uint64_t seed, std::size_t position,
                               Eigen::VectorXd& tau2_out,
                               long long& eval_count) {
  const int p = problem.players();
  tau2_out = Eigen::VectorXd::Zero(p);
  if (!problem.noisy()) {
    ++eval_count;
    return problem.evaluate(x);
  }
  const int r = std::max(1, reps);
  Rng rng(derive_seed(seed, 0xe1u, position));
  Eigen::MatrixXd f(r, p);
  for (int k = 0; k < r; ++k) f.row(k) = problem.evaluate_noisy(x, rng);
  eval_count += r;
  const Eigen::VectorXd mean = f.colwise().mean();
  if (r >= 2) {
    for (int i = 0; i < p; ++i) {
      const double ss = (f.col(i).array() - mean(i)).square().sum();
      tau2_out(i) = ss / (r - 1) / r;  // variance of the replicate mean
    }
  }
  return mean;
}

MultiGp refit(const LoopState& st, const StrategyGrid& grid,
              const GameProblem& problem, const RunConfig& cfg) {
  const int p = problem.players();
  const Eigen::MatrixXd x = grid.points(st.design);
  const bool estimate_noise =
      problem.noisy() && cfg.repetitions_per_point < 2;
  MultiGp multi;
  for (int i = 0; i < p; ++i) {
    FitConfig fc;
    fc.restarts = cfg.fit_restarts;
    fc.seed = derive_seed(cfg.seed, 0xf1u,
                          st.design.size() * 31ull + static_cast<unsigned>(i));
    Eigen::VectorXd noise =
        estimate_noise ? Eigen::VectorXd() : Eigen::VectorXd(st.tau2.col(i));
    multi.models.push_back(GpModel::fit(x, st.obs.col(i), noise,
                                        cfg.kernel_family, fc));
  }
  return multi;
}

Eigen::VectorXd acquisition_noise(const MultiGp& multi,
                                  const LoopState& st,
                                  const GameProblem& problem,
                                  const RunConfig& cfg) {
  if (!problem.noisy()) return Eigen::VectorXd();
  const int p = problem.players();
  Eigen::VectorXd v(p);
  for (int i = 0; i < p; ++i) {
    v(i) = cfg.repetitions_per_point < 2
               ? multi.models[i].estimated_noise_var()
               : st.tau2.col(i).mean();
  }
  return v;
}

// Adds the tuple's per-player actions to the subsets (kept sorted unique).
void force_actions(std::vector<std::vector<int>>& subsets,
                   const std::vector<int>& tuple) {
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    auto& s = subsets[i];
    const auto it = std::lower_bound(s.begin(), s.end(), tuple[i]);
    if (it == s.end() || *it != tuple[i]) s.insert(it, tuple[i]);
  }
}

}  // namespace

std::string to_string(AcquisitionMode mode) {
  return mode == AcquisitionMode::kProbEquilibrium ? "pe" : "sur";
}

AcquisitionMode acquisition_mode_from_string(const std::string& s) {
  if (s == "pe" || s == "prob-equilibrium")
    return AcquisitionMode::kProbEquilibrium;
  if (s == "sur") return AcquisitionMode::kSur;
  throw InvalidInputError("unknown acquisition mode: " + s);
}

std::vector<long long> initial_design(const StrategyGrid& grid, int n0,
                                      std::uint64_t seed) {
  const long long n = grid.size();
  if (n0 < 1 || n0 > n)
    throw InvalidInputError("initial_design: need 1 <= n0 <= grid size");
  std::vector<long long> out;
  if (n0 == n) {
    out.resize(n);
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  Rng rng(derive_seed(seed, 0x1du));
  const int d = grid.dim();
  const Eigen::MatrixXd bounds = grid.bounds();

  // best-of-many maximin Latin hypercube
  Eigen::MatrixXd best_x;
  double best = -1.0;
  for (int t = 0; t < 50; ++t) {
    const Eigen::MatrixXd x = latin_hypercube(n0, d, rng);
    const double score = n0 > 1 ? min_pairwise_sq(x) : 1.0;
    if (score > best) {
      best = score;
      best_x = x;
    }
  }

  std::set<long long> used;
  for (int r = 0; r < n0; ++r) {
    long long flat = nearest_flat(grid, best_x.row(r), bounds);
    int attempts = 0;
    while (used.count(flat) && attempts++ < 1000) {
      Eigen::VectorXd u(d);
      for (int c = 0; c < d; ++c) u(c) = rng.uniform();
      flat = nearest_flat(grid, u, bounds);
    }
    if (used.count(flat))  // deterministic fallback: first unused index
      for (flat = 0; used.count(flat); ++flat) {
      }
    used.insert(flat);
    out.push_back(flat);
  }
  return out;
}

bool should_stop(AcquisitionMode mode, double best_pe, double min_j,
                 double stop_eps) {
  if (stop_eps <= 0.0) return false;
  if (mode == AcquisitionMode::kProbEquilibrium)
    return best_pe >= 1.0 - stop_eps;
  return min_j <= stop_eps;
}

nlohmann::json RunLog::to_json(bool include_timing) const {
  nlohmann::json j;
  j["design"] = design;
  j["observations"] = mat_to_rows(observations);
  j["iterations"] = nlohmann::json::array();
  for (const auto& r : iterations)
    j["iterations"].push_back(record_to_json(r, include_timing));
  j["final_index"] = final_index;
  j["final_values"] = vec_to_list(final_values);
  j["eval_count"] = eval_count;
  j["stopped_early"] = stopped_early;
  j["no_ne_warning"] = no_ne_warning;
  return j;
}

void write_runlog_jsonl(std::ostream& os, const RunLog& log,
                        bool include_timing) {
  for (const auto& r : log.iterations)
    os << record_to_json(r, include_timing).dump() << "\n";
  nlohmann::json j;
  j["design"] = log.design;
  j["observations"] = mat_to_rows(log.observations);
  j["final_index"] = log.final_index;
  j["final_values"] = vec_to_list(log.final_values);
  j["eval_count"] = log.eval_count;
  j["stopped_early"] = log.stopped_early;
  j["no_ne_warning"] = log.no_ne_warning;
  os << j.dump() << "\n";
}

nlohmann::json Checkpoint::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["design"] = design;
  j["observations"] = mat_to_rows(observations);
  j["obs_noise_vars"] = mat_to_rows(obs_noise_vars);
  j["iterations"] = nlohmann::json::array();
  for (const auto& r : iterations)
    j["iterations"].push_back(record_to_json(r, /*include_timing=*/false));
  j["box_lo"] = vec_to_list(box_lo);
  j["box_hi"] = vec_to_list(box_hi);
  j["consecutive_no_ne"] = consecutive_no_ne;
  j["eval_count"] = eval_count;
  return j;
}

Checkpoint Checkpoint::from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw InvalidInputError("Checkpoint: unknown serialization version");
  Checkpoint c;
  c.design = j.at("design").get<std::vector<long long>>();
  c.observations = rows_to_mat(j.at("observations"));
  c.obs_noise_vars = rows_to_mat(j.at("obs_noise_vars"));
  for (const auto& r : j.at("iterations"))
    c.iterations.push_back(record_from_json(r));
  c.box_lo = list_to_vec(j.at("box_lo"));
  c.box_hi = list_to_vec(j.at("box_hi"));
  c.consecutive_no_ne = j.at("consecutive_no_ne").get<int>();
  c.eval_count = j.at("eval_count").get<long long>();
  return c;
}

RunLog run(const GameProblem& problem, const StrategyGrid& grid,
           const RunConfig& cfg, const Checkpoint* resume,
           const CheckpointSink& sink) {
  const int p = problem.players();
  if (grid.players() != p)
    throw InvalidInputError("run: grid and problem disagree on player count");
  if (grid.dim() != problem.dim())
    throw InvalidInputError("run: grid and problem disagree on dimension");
  if (cfg.n0 < 2 || cfg.n0 >= cfg.n_max)
    throw InvalidInputError("run: need 2 <= n0 < n_max");
  const long long n_grid = grid.size();
  if (cfg.n0 > n_grid) throw InvalidInputError("run: n0 exceeds grid size");

  LoopState st;
  st.obs.resize(0, p);
  st.tau2.resize(0, p);
  if (resume) {
    st.design = resume->design;
    st.obs = resume->observations;
    st.tau2 = resume->obs_noise_vars;
    st.iters = resume->iterations;
    st.box_lo = resume->box_lo;
    st.box_hi = resume->box_hi;
    st.consecutive_no_ne = resume->consecutive_no_ne;
    st.eval_count = resume->eval_count;
  }

  auto append_evaluation = [&](long long flat) {
    const std::size_t pos = st.design.size();
    Eigen::VectorXd tau2;
    const Eigen::VectorXd f =
        evaluate_point(problem, grid.point(flat), cfg.repetitions_per_point,
                       cfg.seed, pos, tau2, st.eval_count);
    st.design.push_back(flat);
    st.obs.conservativeResize(st.obs.rows() + 1, p);
    st.obs.row(st.obs.rows() - 1) = f;
    st.tau2.conservativeResize(st.tau2.rows() + 1, p);
    st.tau2.row(st.tau2.rows() - 1) = tau2;
  };

  // initial design (resumes mid-design if interrupted there)
  {
    const auto init =
        initial_design(grid, cfg.n0, derive_seed(cfg.seed, 0xd0u));
    while (st.design.size() < init.size()) {
      append_evaluation(init[st.design.size()]);
      if (sink) sink(to_checkpoint(st));
    }
  }

  RunLog log;
  const bool noise_free = !problem.noisy();
  NashExtractor grid_extractor(grid);
  const Eigen::MatrixXd grid_points = grid.all_points();
  std::vector<long long> last_cand;  // grid flat indices
  bool stopped_early = false;
  bool no_ne_warning = st.consecutive_no_ne >= 3;

  while (static_cast<long long>(st.design.size()) < cfg.n_max) {
    const auto t0 = Clock::now();
    const int iter = static_cast<int>(st.iters.size());
    const MultiGp multi = refit(st, grid, problem, cfg);

    AcquisitionConfig acq = cfg.acq;
    acq.seed = derive_seed(cfg.seed, 0xa1u, iter);
    acq.obs_noise_vars = acquisition_noise(multi, st, problem, cfg);

    // posterior-mean tensor and its equilibria
    Eigen::MatrixXd mu_all(n_grid, p);
    std::vector<Eigen::VectorXd> mu_i(p), sd_i(p);
    for (int i = 0; i < p; ++i) {
      Eigen::VectorXd mu, var;
      multi.models[i].predict(grid_points, mu, var);
      mu_i[i] = mu;
      sd_i[i] = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-12);
      mu_all.col(i) = mu;
    }
    std::vector<long long> mean_ne;
    grid_extractor.extract(mu_all, mean_ne);

    // simulation-subset scores: target score around the posterior-mean
    // equilibrium values until simulated equilibria provide a box
    Eigen::VectorXd scores(n_grid);
    {
      if (st.box_lo.size() > 0) {
        for (long long f = 0; f < n_grid; ++f) {
          double s = 1.0;
          for (int i = 0; i < p; ++i)
            s *= std::max(
                norm_cdf((st.box_hi(i) - mu_i[i](f)) / sd_i[i](f)) -
                    norm_cdf((st.box_lo(i) - mu_i[i](f)) / sd_i[i](f)),
                0.0);
          scores(f) = s;
        }
      } else if (!mean_ne.empty()) {
        Eigen::VectorXd t_e = Eigen::VectorXd::Zero(p);
        for (long long f : mean_ne) t_e += mu_all.row(f).transpose();
        t_e /= static_cast<double>(mean_ne.size());
        for (long long f = 0; f < n_grid; ++f) {
          double s = 1.0;
          for (int i = 0; i < p; ++i)
            s *= norm_pdf((t_e(i) - mu_i[i](f)) / sd_i[i](f));
          scores(f) = s;
        }
      } else {
        scores.setOnes();
      }
      if (scores.maxCoeff() <= 0.0) scores.setOnes();
    }

    const long long n_sim_target = acq.N_sim > 0 ? acq.N_sim : n_grid;
    auto subsets =
        select_subset(grid, scores, n_sim_target,
                      derive_seed(cfg.seed, 0x51u, iter));
    // The simulation subgrid must keep every region the data already speaks
    // for: without the evaluated actions a collapsed draw ensemble cannot be
    // contradicted and the uncertainty criterion goes to zero spuriously.
    // Force the posterior-mean equilibrium, then evaluated points newest
    // first, capping each player's subset at twice its sampled size so the
    // factorial subgrid stays bounded for many-player games.
    if (!mean_ne.empty()) force_actions(subsets, grid.tuple_of(mean_ne[0]));
    {
      std::vector<std::size_t> caps(subsets.size());
      for (std::size_t i = 0; i < subsets.size(); ++i)
        caps[i] = 2 * subsets[i].size();
      const long long sim_cap =
          std::min<long long>(4 * std::max<long long>(n_sim_target, 1), 4096);
      auto product = [&]() {
        long long n = 1;
        for (const auto& s : subsets) n *= static_cast<long long>(s.size());
        return n;
      };
      for (auto it = st.design.rbegin(); it != st.design.rend(); ++it) {
        const std::vector<int> tup = grid.tuple_of(*it);
        for (std::size_t i = 0; i < subsets.size(); ++i) {
          auto& s = subsets[i];
          const auto at = std::lower_bound(s.begin(), s.end(), tup[i]);
          if (at != s.end() && *at == tup[i]) continue;
          if (s.size() >= caps[i]) continue;
          if (product() / static_cast<long long>(s.size()) *
                  static_cast<long long>(s.size() + 1) >
              sim_cap)
            continue;
          s.insert(at, tup[i]);
        }
      }
    }
    std::vector<long long> parent;
    const StrategyGrid simgrid = grid.subgrid(subsets, &parent);

    const PathEnsemble ens =
        simulate_paths(multi, simgrid.all_points(), acq.M,
                       derive_seed(cfg.seed, 0xb2u, iter));

    // per-draw equilibria: Gamma-hat representatives and the value box
    NashExtractor extractor(simgrid);
    std::vector<Eigen::VectorXd> reps;
    Eigen::VectorXd lo, hi;
    int empty_draws = 0;
    {
      Eigen::MatrixXd draw_vals(simgrid.size(), p);
      std::vector<long long> ne_idx;
      for (int m = 0; m < ens.num_draws(); ++m) {
        for (int i = 0; i < p; ++i)
          draw_vals.col(i) = ens.draws[i].row(m).transpose();
        extractor.extract(draw_vals, ne_idx);
        if (ne_idx.empty()) {
          ++empty_draws;
          continue;
        }
        Eigen::VectorXd mean_val = Eigen::VectorXd::Zero(p);
        for (long long f : ne_idx) {
          const Eigen::VectorXd v = draw_vals.row(f).transpose();
          mean_val += v;
          if (lo.size() == 0) {
            lo = v;
            hi = v;
          } else {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
          }
        }
        reps.push_back(mean_val / static_cast<double>(ne_idx.size()));
      }
    }
    const double no_ne_frac =
        static_cast<double>(empty_draws) / std::max(1, ens.num_draws());
    const double gamma_base = gamma_hat(reps);
    if (reps.empty()) {
      ++st.consecutive_no_ne;
    } else {
      st.consecutive_no_ne = 0;
      st.box_lo = lo;
      st.box_hi = hi;
    }
    if (st.consecutive_no_ne >= 3) no_ne_warning = true;

    // candidate subset by the probability-of-equilibrium score
    const Eigen::VectorXd pe = prob_equilibrium_all(multi, simgrid, acq);
    Eigen::VectorXd pe_scores = pe;
    if (pe_scores.maxCoeff() <= 0.0) pe_scores.setOnes();
    const long long n_cand_target = acq.N_cand > 0 ? acq.N_cand : simgrid.size();
    const auto cand_subsets =
        select_subset(simgrid, pe_scores, n_cand_target,
                      derive_seed(cfg.seed, 0x52u, iter));
    std::vector<long long> cand_sim;  // flats into simgrid
    simgrid.subgrid(cand_subsets, &cand_sim);
    last_cand.clear();
    for (long long f : cand_sim) last_cand.push_back(parent[f]);

    // best candidate by P_E, and the point to evaluate next
    const std::set<long long> evaluated(st.design.begin(), st.design.end());
    double best_pe = -1.0;
    long long best_pe_flat = -1;
    long long chosen = -1;
    double chosen_score = -1.0;
    double min_j = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cand_sim.size(); ++c) {
      const double v = pe(cand_sim[c]);
      if (v > best_pe) {
        best_pe = v;
        best_pe_flat = last_cand[c];
      }
    }
    if (cfg.mode == AcquisitionMode::kSur) {
      const std::uint64_t sur_seed = derive_seed(cfg.seed, 0xc3u, iter);
      for (std::size_t c = 0; c < cand_sim.size(); ++c) {
        if (noise_free && evaluated.count(last_cand[c])) continue;
        const double j = sur_criterion(multi, ens, simgrid,
                                       grid.point(last_cand[c]), acq, sur_seed);
        min_j = std::min(min_j, j);
        if (chosen < 0 || j < chosen_score) {
          chosen = last_cand[c];
          chosen_score = j;
        }
      }
    } else {
      for (std::size_t c = 0; c < cand_sim.size(); ++c) {
        if (noise_free && evaluated.count(last_cand[c])) continue;
        const double v = pe(cand_sim[c]);
        if (chosen < 0 || v > chosen_score) {
          chosen = last_cand[c];
          chosen_score = v;
        }
      }
    }

    IterationRecord rec;
    rec.iteration = iter;
    rec.repetitions = problem.noisy() ? std::max(1, cfg.repetitions_per_point) : 1;
    rec.best_pe_index = best_pe_flat;
    rec.best_pe = best_pe;
    rec.criterion = cfg.mode == AcquisitionMode::kSur ? min_j : gamma_base;
    rec.no_ne_fraction = no_ne_frac;
    rec.observed = Eigen::VectorXd();

    if (should_stop(cfg.mode, best_pe, min_j, cfg.stop_eps) || chosen < 0) {
      stopped_early = should_stop(cfg.mode, best_pe, min_j, cfg.stop_eps);
      rec.wall_time_s = seconds_since(t0);
      st.iters.push_back(rec);
      break;
    }

    rec.chosen_index = chosen;
    append_evaluation(chosen);
    rec.observed = st.obs.row(st.obs.rows() - 1).transpose();
    rec.wall_time_s = seconds_since(t0);
    st.iters.push_back(rec);
    if (sink) sink(to_checkpoint(st));
  }

  // final estimate: the candidate maximizing P_E under the final posterior
  const MultiGp multi = refit(st, grid, problem, cfg);
  AcquisitionConfig acq = cfg.acq;
  acq.seed = derive_seed(cfg.seed, 0xfdu);
  acq.obs_noise_vars = acquisition_noise(multi, st, problem, cfg);
  if (last_cand.empty()) {
    // resumed after the last evaluation: fall back to the whole grid
    last_cand.resize(n_grid);
    std::iota(last_cand.begin(), last_cand.end(), 0);
  }
  double best = -1.0;
  long long final_flat = last_cand.front();
  for (long long f : last_cand) {
    const double v = prob_equilibrium(multi, grid, f, acq);
    if (v > best) {
      best = v;
      final_flat = f;
    }
  }
  Eigen::VectorXd final_values(p);
  const Eigen::MatrixXd pt = grid.point(final_flat).transpose();
  for (int i = 0; i < p; ++i) {
    Eigen::VectorXd mu, var;
    multi.models[i].predict(pt, mu, var);
    final_values(i) = mu(0);
  }

  log.design = st.design;
  log.observations = st.obs;
  log.iterations = st.iters;
  log.final_index = final_flat;
  log.final_values = final_values;
  log.eval_count = st.eval_count;
  log.stopped_early = stopped_early;
  log.no_ne_warning = no_ne_warning;
  return log;
}

}  // namespace gpnash
