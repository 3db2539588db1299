#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <vector>

#include "gpnash/mvn.hpp"

namespace gpnash {

/// Full-factorial discrete strategy space X = X_1 x ... x X_p. Only the
/// per-player action lists are stored; the N = prod(m_i) joint strategies
/// exist through index arithmetic.
class StrategyGrid {
 public:
  explicit StrategyGrid(std::vector<Eigen::MatrixXd> per_player_actions,
                        long long max_size = 10'000'000);

  int players() const { return static_cast<int>(actions_.size()); }
  long long size() const { return size_; }
  int num_actions(int player) const {
    return static_cast<int>(actions_[player].rows());
  }
  int dim() const { return dim_; }
  int block_dim(int player) const {
    return static_cast<int>(actions_[player].cols());
  }
  const Eigen::MatrixXd& actions(int player) const { return actions_[player]; }

  std::vector<int> tuple_of(long long flat) const;
  long long flat_of(const std::vector<int>& tuple) const;

  Eigen::VectorXd point(long long flat) const;
  Eigen::MatrixXd points(const std::vector<long long>& flats) const;
  Eigen::MatrixXd all_points() const;

  /// Flat indices of the player's whole action slice with the opponents
  /// fixed as in base; entry k corresponds to own action k.
  std::vector<long long> own_action_slice(int player, long long base) const;

  /// Factorial sub-grid from per-player action index subsets; parent_flat
  /// receives, for each sub-grid flat index, the flat index in this grid.
  StrategyGrid subgrid(const std::vector<std::vector<int>>& action_subsets,
                       std::vector<long long>* parent_flat = nullptr) const;

  /// Componentwise bounds over the grid coordinates, d x 2.
  Eigen::MatrixXd bounds() const;

 private:
  std::vector<Eigen::MatrixXd> actions_;
  std::vector<long long> strides_;
  long long size_ = 1;
  int dim_ = 0;
};

/// Objective values over a complete grid; +inf is a legal sentinel for
/// "never a best response", NaN is rejected.
struct PayoffTensor {
  StrategyGrid grid;
  Eigen::MatrixXd values;  // N x p

  PayoffTensor(StrategyGrid g, Eigen::MatrixXd v);
};

struct NashOutcome {
  std::vector<long long> indices;  // ascending
  Eigen::MatrixXd values;          // one row per index

  bool empty() const { return indices.empty(); }
};

/// Reusable workspace for repeated extraction on tensors of the same shape.
class NashExtractor {
 public:
  explicit NashExtractor(const StrategyGrid& grid);

  /// All pure Nash equilibria of the values matrix (N x p) over the grid
  /// this extractor was built for. Ties survive, so several equilibria can
  /// be reported.
  void extract(const Eigen::MatrixXd& values,
               std::vector<long long>& indices_out);

 private:
  std::vector<long long> strides_;
  std::vector<int> counts_;
  long long size_;
  std::vector<unsigned char> ok_;  // scratch: still-a-candidate flags
};

NashOutcome nash_extract(const PayoffTensor& tensor);

/// All minimizing own-action indices of one player's slice; the player's
/// own entry of opponents_index is ignored.
std::vector<int> best_response(const PayoffTensor& tensor, int player,
                               const std::vector<int>& opponents_index);

struct FixedPointConfig {
  double alpha = 0.5;      // relaxation in (0,1)
  int k_max = 200;
  double tol = 1e-4;       // outer stopping threshold on |x_{k+1}-x_k|
  int inner_iters = 3;     // per player per outer step (hard cap 50)
  double fd_step_rel = 1e-6;  // central-difference step, relative to box width
  int line_search_max = 25;
};

struct FixedPointResult {
  Eigen::VectorXd x;
  long long eval_count = 0;
  bool converged = false;
};

/// Relaxed best-response fixed-point iteration with per-player inner
/// minimization by projected finite-difference gradient descent.
FixedPointResult fixed_point_solve(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& objective,
    const Eigen::MatrixXd& bounds, const std::vector<int>& block_dims,
    const Eigen::VectorXd& x0, const FixedPointConfig& cfg = {});

/// CSV debugging format: flat index, action tuple, p objective values.
void write_tensor_csv(std::ostream& os, const PayoffTensor& tensor);
Eigen::MatrixXd read_tensor_values_csv(std::istream& is,
                                       const StrategyGrid& grid);

}  // namespace gpnash
