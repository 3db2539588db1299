#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "gpnash/acquisition.hpp"
#include "gpnash/problems.hpp"
#include "vendor_json_fwd.hpp"

namespace gpnash {

enum class AcquisitionMode { kProbEquilibrium, kSur };
std::string to_string(AcquisitionMode mode);
AcquisitionMode acquisition_mode_from_string(const std::string& s);

struct RunConfig {
  int n0 = 6;      // initial design size (must be < n_max and >= 2)
  int n_max = 30;  // total distinct-point evaluation budget
  AcquisitionMode mode = AcquisitionMode::kProbEquilibrium;
  AcquisitionConfig acq;  // N_sim/N_cand = 0 means the full grid
  double stop_eps = 0.0;  // 0 disables early stopping
  std::uint64_t seed = 1;
  int repetitions_per_point = 1;  // > 1 only meaningful for noisy problems
  KernelFamily kernel_family = KernelFamily::Matern52;
  int fit_restarts = 6;
};

struct IterationRecord {
  int iteration = 0;
  long long chosen_index = -1;  // -1 when the loop stopped before evaluating
  Eigen::VectorXd observed;     // replicate mean at the chosen point
  int repetitions = 1;
  long long best_pe_index = -1;  // best candidate by P_E (grid flat index)
  double best_pe = 0.0;
  double criterion = 0.0;  // Gamma-hat of the base ensemble, or min J-hat
  double no_ne_fraction = 0.0;
  double wall_time_s = 0.0;  // excluded from the canonical serialization
};

struct RunLog {
  std::vector<long long> design;  // evaluated grid indices, in order
  Eigen::MatrixXd observations;   // design.size() x p replicate means
  std::vector<IterationRecord> iterations;
  long long final_index = -1;
  Eigen::VectorXd final_values;  // posterior mean at the final estimate
  long long eval_count = 0;      // black-box calls including repetitions
  bool stopped_early = false;
  bool no_ne_warning = false;

  /// Canonical form: deterministic given config and seed. Wall times are
  /// opt-in so the determinism contract stays byte-exact.
  nlohmann::json to_json(bool include_timing = false) const;
};

/// One JSON object per line: the iteration records, then a summary line.
void write_runlog_jsonl(std::ostream& os, const RunLog& log,
                        bool include_timing = true);

/// Everything run() needs to continue a partial run exactly: all
/// per-iteration randomness is derived from (seed, iteration), so no
/// generator state is stored.
struct Checkpoint {
  std::vector<long long> design;
  Eigen::MatrixXd observations;     // n x p replicate means
  Eigen::MatrixXd obs_noise_vars;   // n x p tau-hat^2 (empty if noise-free)
  std::vector<IterationRecord> iterations;
  Eigen::VectorXd box_lo, box_hi;   // simulated-equilibrium value box
  int consecutive_no_ne = 0;
  long long eval_count = 0;

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
};

using CheckpointSink = std::function<void(const Checkpoint&)>;

/// Maximin Latin hypercube mapped to the nearest grid points (rescaled
/// coordinates), de-duplicated; n0 = N returns the whole grid.
std::vector<long long> initial_design(const StrategyGrid& grid, int n0,
                                      std::uint64_t seed);

/// Early-stopping rule: probability mode stops at max P_E >= 1 - eps, SUR
/// mode at min J-hat <= eps; eps = 0 never stops early.
bool should_stop(AcquisitionMode mode, double best_pe, double min_j,
                 double stop_eps);

/// The sequential-design loop. Pass `resume` to continue from a checkpoint;
/// `sink`, when set, receives a checkpoint after every evaluation.
RunLog run(const GameProblem& problem, const StrategyGrid& grid,
           const RunConfig& cfg, const Checkpoint* resume = nullptr,
           const CheckpointSink& sink = {});

}  // namespace gpnash
