#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gpnash/game.hpp"
#include "gpnash/math.hpp"
#include "vendor_json_fwd.hpp"

namespace gpnash {

/// A p-player game on a continuous box; the cost vector is evaluated
/// jointly. noise_sd empty means noise-free and deterministic.
struct GameProblem {
  std::string name;
  std::vector<int> block_dims;
  Eigen::MatrixXd bounds;  // d x 2
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> evaluate;
  Eigen::VectorXd noise_sd;  // per objective, size 0 = noiseless
  Eigen::VectorXd known_ne;  // size 0 when unknown

  int players() const { return static_cast<int>(block_dims.size()); }
  int dim() const { return static_cast<int>(bounds.rows()); }
  bool noisy() const { return noise_sd.size() > 0; }

  /// One noisy replicate f = y + eps, eps_i ~ N(0, noise_sd_i^2).
  Eigen::VectorXd evaluate_noisy(const Eigen::VectorXd& x, Rng& rng) const;
};

Eigen::Vector2d p1_evaluate(double x1, double x2);
GameProblem make_p1();

struct DifferentialGameSpec {
  double T = 4.0;
  int steps = 40;
  Eigen::Vector2d v0 = Eigen::Vector2d::Zero();
  Eigen::Vector2d z0 = Eigen::Vector2d(0.0, 0.5);
  std::vector<Eigen::Vector2d> targets;  // one per player
  Eigen::VectorXd thetas;                // one per player
  int kappa = 1;                         // spline coefficients per coordinate

  int players() const { return static_cast<int>(targets.size()); }
  int dim() const { return 2 * kappa * players(); }
};

/// The paper-style configuration: 4 players, targets on the corners of
/// [-1,1]^2, thetas (0.25, 0, 0.5, 0).
DifferentialGameSpec default_diffgame_spec(int kappa = 1);

Eigen::VectorXd diffgame_evaluate(const DifferentialGameSpec& spec,
                                  const Eigen::VectorXd& x);
/// Final state z(T) under the same discretization as diffgame_evaluate.
Eigen::Vector2d diffgame_final_state(const DifferentialGameSpec& spec,
                                     const Eigen::VectorXd& x);
GameProblem make_diffgame(const DifferentialGameSpec& spec);

/// Random quadratic game y_i = 0.5 x_i'A_i x_i + x_i'B_i x_{-i} + c_i'x_i
/// with SPD A_i and weak coupling, so the NE exists, is unique, and solves a
/// stacked linear system (stored in known_ne).
GameProblem quadratic_game(int p, const std::vector<int>& block_dims,
                           std::uint64_t seed, double noise_sd = 0.0);

/// Latin hypercube design in [0,1]^dim, n rows.
Eigen::MatrixXd latin_hypercube(int n, int dim, Rng& rng);

enum class GridScheme { kRegular, kLhdPerPlayer };

/// Marginal per-player grids over the problem's box. Regular scheme needs
/// each count to be a perfect d_i-th power; LHD draws one design per player
/// block. The joint grid stays lazy (index arithmetic only).
StrategyGrid build_factorial_grid(const GameProblem& problem,
                                  const std::vector<int>& per_player_counts,
                                  GridScheme scheme, std::uint64_t seed,
                                  long long max_size = 10'000'000);

/// Wraps an external executable speaking the line protocol: one evaluation
/// per line, "x_1 ... x_d" on its stdin, "y_1 ... y_p" on its stdout.
class ExternalProblem {
 public:
  ExternalProblem(const std::string& command, int dim, int players);
  ~ExternalProblem();
  ExternalProblem(const ExternalProblem&) = delete;
  ExternalProblem& operator=(const ExternalProblem&) = delete;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int dim_, players_;
};

std::vector<std::string> problem_names();
/// Builds a registered problem from its name and a JSON parameter object.
GameProblem make_problem(const std::string& name, const nlohmann::json& params);

}  // namespace gpnash
