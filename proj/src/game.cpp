#include "gpnash/game.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace gpnash {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

StrategyGrid::StrategyGrid(std::vector<Eigen::MatrixXd> per_player_actions,
                           long long max_size)
    : actions_(std::move(per_player_actions)) {
  if (actions_.empty()) throw InvalidInputError("grid needs at least 1 player");
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    const auto& a = actions_[i];
    if (a.rows() < 1 || a.cols() < 1)
      throw InvalidInputError("empty action list for player " +
                              std::to_string(i));
    if (!a.allFinite())
      throw InvalidInputError("non-finite action coordinate for player " +
                              std::to_string(i));
    for (Eigen::Index r = 0; r + 1 < a.rows(); ++r)
      for (Eigen::Index s = r + 1; s < a.rows(); ++s)
        if ((a.row(r) - a.row(s)).cwiseAbs().maxCoeff() == 0.0)
          throw InvalidInputError("duplicate actions for player " +
                                  std::to_string(i));
    dim_ += static_cast<int>(a.cols());
    if (size_ > max_size / a.rows())
      throw InvalidInputError("grid size exceeds limit of " +
                              std::to_string(max_size));
    size_ *= a.rows();
  }
  // Row-major flat index: last player's action varies fastest.
  strides_.assign(actions_.size(), 1);
  for (int i = static_cast<int>(actions_.size()) - 2; i >= 0; --i)
    strides_[i] = strides_[i + 1] * actions_[i + 1].rows();
}

std::vector<int> StrategyGrid::tuple_of(long long flat) const {
  if (flat < 0 || flat >= size_)
    throw InvalidInputError("flat index out of range");
  std::vector<int> tuple(actions_.size());
  for (std::size_t i = 0; i < actions_.size(); ++i)
    tuple[i] = static_cast<int>((flat / strides_[i]) % actions_[i].rows());
  return tuple;
}

long long StrategyGrid::flat_of(const std::vector<int>& tuple) const {
  if (tuple.size() != actions_.size())
    throw InvalidInputError("tuple size does not match player count");
  long long flat = 0;
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    if (tuple[i] < 0 || tuple[i] >= actions_[i].rows())
      throw InvalidInputError("action index out of range for player " +
                              std::to_string(i));
    flat += tuple[i] * strides_[i];
  }
  return flat;
}

Eigen::VectorXd StrategyGrid::point(long long flat) const {
  const std::vector<int> tuple = tuple_of(flat);
  Eigen::VectorXd x(dim_);
  int at = 0;
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    const int di = static_cast<int>(actions_[i].cols());
    x.segment(at, di) = actions_[i].row(tuple[i]);
    at += di;
  }
  return x;
}

Eigen::MatrixXd StrategyGrid::points(
    const std::vector<long long>& flats) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(flats.size()), dim_);
  for (std::size_t r = 0; r < flats.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = point(flats[r]);
  return out;
}

Eigen::MatrixXd StrategyGrid::all_points() const {
  Eigen::MatrixXd out(size_, dim_);
  for (long long f = 0; f < size_; ++f) out.row(f) = point(f);
  return out;
}

std::vector<long long> StrategyGrid::own_action_slice(int player,
                                                      long long base) const {
  if (player < 0 || player >= players())
    throw InvalidInputError("player index out of range");
  if (base < 0 || base >= size_)
    throw InvalidInputError("flat index out of range");
  const long long stride = strides_[player];
  const long long m = actions_[player].rows();
  const long long root = base - ((base / stride) % m) * stride;
  std::vector<long long> slice(static_cast<std::size_t>(m));
  for (long long k = 0; k < m; ++k) slice[k] = root + k * stride;
  return slice;
}

StrategyGrid StrategyGrid::subgrid(
    const std::vector<std::vector<int>>& action_subsets,
    std::vector<long long>* parent_flat) const {
  if (action_subsets.size() != actions_.size())
    throw InvalidInputError("subset list size does not match player count");
  std::vector<Eigen::MatrixXd> sub_actions(actions_.size());
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    const auto& sel = action_subsets[i];
    if (sel.empty())
      throw InvalidInputError("empty action subset for player " +
                              std::to_string(i));
    Eigen::MatrixXd a(sel.size(), actions_[i].cols());
    for (std::size_t r = 0; r < sel.size(); ++r) {
      if (sel[r] < 0 || sel[r] >= actions_[i].rows())
        throw InvalidInputError("subset action index out of range for player " +
                                std::to_string(i));
      a.row(static_cast<Eigen::Index>(r)) = actions_[i].row(sel[r]);
    }
    sub_actions[i] = std::move(a);
  }
  StrategyGrid sub(std::move(sub_actions));
  if (parent_flat) {
    parent_flat->resize(static_cast<std::size_t>(sub.size()));
    for (long long f = 0; f < sub.size(); ++f) {
      std::vector<int> tuple = sub.tuple_of(f);
      for (std::size_t i = 0; i < tuple.size(); ++i)
        tuple[i] = action_subsets[i][tuple[i]];
      (*parent_flat)[static_cast<std::size_t>(f)] = flat_of(tuple);
    }
  }
  return sub;
}

Eigen::MatrixXd StrategyGrid::bounds() const {
  Eigen::MatrixXd b(dim_, 2);
  int at = 0;
  for (const auto& a : actions_) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      b(at, 0) = a.col(c).minCoeff();
      b(at, 1) = a.col(c).maxCoeff();
      ++at;
    }
  }
  return b;
}

PayoffTensor::PayoffTensor(StrategyGrid g, Eigen::MatrixXd v)
    : grid(std::move(g)), values(std::move(v)) {
  if (values.rows() != grid.size())
    throw InvalidInputError("tensor rows must equal grid size");
  if (values.cols() < 1) throw InvalidInputError("tensor needs >= 1 objective");
  if (values.array().isNaN().any())
    throw InvalidInputError("NaN entries are not allowed in a payoff tensor");
}

NashExtractor::NashExtractor(const StrategyGrid& grid)
    : size_(grid.size()) {
  const int p = grid.players();
  strides_.resize(p);
  counts_.resize(p);
  long long stride = 1;
  for (int i = p - 1; i >= 0; --i) {
    strides_[i] = stride;
    counts_[i] = grid.num_actions(i);
    stride *= counts_[i];
  }
}

void NashExtractor::extract(const Eigen::MatrixXd& values,
                            std::vector<long long>& indices_out) {
  if (values.rows() != size_)
    throw InvalidInputError("value rows must equal grid size");
  ok_.assign(static_cast<std::size_t>(size_), 1);
  const int p = static_cast<int>(strides_.size());
  for (int i = 0; i < p; ++i) {
    const long long stride = strides_[i];
    const long long m = counts_[i];
    const long long profiles = size_ / m;
    for (long long op = 0; op < profiles; ++op) {
      const long long root = (op / stride) * (stride * m) + op % stride;
      double mn = kInf;
      for (long long k = 0; k < m; ++k) {
        const double v = values(root + k * stride, i);
        if (v < mn) mn = v;
      }
      // All-infinite slices yield no minimizer: the whole profile drops out.
      for (long long k = 0; k < m; ++k) {
        const long long f = root + k * stride;
        if (!(std::isfinite(mn) && values(f, i) == mn)) ok_[f] = 0;
      }
    }
  }
  indices_out.clear();
  for (long long f = 0; f < size_; ++f)
    if (ok_[static_cast<std::size_t>(f)]) indices_out.push_back(f);
}

NashOutcome nash_extract(const PayoffTensor& tensor) {
  NashExtractor extractor(tensor.grid);
  NashOutcome out;
  extractor.extract(tensor.values, out.indices);
  out.values.resize(static_cast<Eigen::Index>(out.indices.size()),
                    tensor.values.cols());
  for (std::size_t r = 0; r < out.indices.size(); ++r)
    out.values.row(static_cast<Eigen::Index>(r)) =
        tensor.values.row(out.indices[r]);
  return out;
}

std::vector<int> best_response(const PayoffTensor& tensor, int player,
                               const std::vector<int>& opponents_index) {
  const auto slice =
      tensor.grid.own_action_slice(player, tensor.grid.flat_of(opponents_index));
  double mn = kInf;
  for (long long f : slice) mn = std::min(mn, tensor.values(f, player));
  std::vector<int> out;
  if (!std::isfinite(mn)) return out;
  for (std::size_t k = 0; k < slice.size(); ++k)
    if (tensor.values(slice[k], player) == mn) out.push_back(static_cast<int>(k));
  return out;
}

namespace {

Eigen::VectorXd clamp_to_box(const Eigen::VectorXd& x,
                             const Eigen::MatrixXd& bounds) {
  return x.cwiseMax(bounds.col(0)).cwiseMin(bounds.col(1));
}

}  // namespace

FixedPointResult fixed_point_solve(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& objective,
    const Eigen::MatrixXd& bounds, const std::vector<int>& block_dims,
    const Eigen::VectorXd& x0, const FixedPointConfig& cfg) {
  const int p = static_cast<int>(block_dims.size());
  const int d = static_cast<int>(x0.size());
  {
    int total = 0;
    for (int di : block_dims) {
      if (di < 1) throw InvalidInputError("block dimension must be positive");
      total += di;
    }
    if (total != d || bounds.rows() != d || bounds.cols() != 2)
      throw InvalidInputError("inconsistent dimensions in fixed_point_solve");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
      throw InvalidInputError("relaxation factor must lie in (0,1)");
  }

  FixedPointResult res;
  res.x = clamp_to_box(x0, bounds);

  const Eigen::VectorXd width = bounds.col(1) - bounds.col(0);
  auto eval = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = objective(x);
    ++res.eval_count;
    if (y.size() != p || !y.allFinite()) {
      std::ostringstream msg;
      msg << "objective returned a non-finite or mis-sized value at x = ["
          << x.transpose() << "]";
      throw NumericalError(msg.str());
    }
    return y;
  };

  for (int k = 0; k < cfg.k_max; ++k) {
    Eigen::VectorXd z = res.x;
    int at = 0;
    for (int i = 0; i < p; ++i) {
      const int di = block_dims[i];
      // Minimize y_i over this player's block with the others frozen at x^(k).
      Eigen::VectorXd xi = res.x.segment(at, di);
      Eigen::VectorXd probe = res.x;
      auto fi = [&](const Eigen::VectorXd& v) {
        probe.segment(at, di) = v;
        return eval(probe)(i);
      };
      double fcur = fi(xi);
      double step = 0.25;
      for (int t = 0; t < cfg.inner_iters; ++t) {
        Eigen::VectorXd grad(di);
        for (int c = 0; c < di; ++c) {
          const double h = cfg.fd_step_rel * std::max(width(at + c), 1.0);
          Eigen::VectorXd vp = xi, vm = xi;
          vp(c) = std::min(xi(c) + h, bounds(at + c, 1));
          vm(c) = std::max(xi(c) - h, bounds(at + c, 0));
          const double denom = vp(c) - vm(c);
          grad(c) = denom > 0.0 ? (fi(vp) - fi(vm)) / denom : 0.0;
        }
        const double gnorm = grad.norm();
        if (gnorm < 1e-12) break;
        const Eigen::VectorXd dir =
            grad.cwiseProduct(width.segment(at, di)) / gnorm;
        bool improved = false;
        double s = step;
        for (int ls = 0; ls < cfg.line_search_max; ++ls) {
          Eigen::VectorXd trial =
              (xi - s * dir)
                  .cwiseMax(bounds.col(0).segment(at, di))
                  .cwiseMin(bounds.col(1).segment(at, di));
          if ((trial - xi).norm() == 0.0) break;  // clamped to a standstill
          const double ftrial = fi(trial);
          if (ftrial < fcur) {
            if ((trial - xi).norm() < 1e-10) {
              xi = trial;
              fcur = ftrial;
              break;
            }
            xi = trial;
            fcur = ftrial;
            improved = true;
            break;
          }
          s *= 0.5;
        }
        if (!improved) break;
        step = std::min(1.0, 2.0 * s);
      }
      z.segment(at, di) = xi;
      at += di;
    }
    const Eigen::VectorXd next =
        clamp_to_box(cfg.alpha * z + (1.0 - cfg.alpha) * res.x, bounds);
    const double move = (next - res.x).norm();
    res.x = next;
    if (move <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

void write_tensor_csv(std::ostream& os, const PayoffTensor& tensor) {
  const auto& g = tensor.grid;
  os << "flat";
  for (int i = 0; i < g.players(); ++i) os << ",k" << i;
  for (Eigen::Index j = 0; j < tensor.values.cols(); ++j) os << ",y" << j;
  os << "\n";
  os.precision(17);
  for (long long f = 0; f < g.size(); ++f) {
    os << f;
    for (int k : g.tuple_of(f)) os << "," << k;
    for (Eigen::Index j = 0; j < tensor.values.cols(); ++j)
      os << "," << tensor.values(f, j);
    os << "\n";
  }
}

Eigen::MatrixXd read_tensor_values_csv(std::istream& is,
                                       const StrategyGrid& grid) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInputError("empty tensor CSV");
  const int p = grid.players();
  int cols = 1;
  for (char c : line)
    if (c == ',') ++cols;
  const int num_obj = cols - 1 - p;
  if (num_obj < 1) throw InvalidInputError("tensor CSV header too short");
  Eigen::MatrixXd values(grid.size(), num_obj);
  values.setConstant(std::numeric_limits<double>::quiet_NaN());
  long long seen = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    if (!std::getline(ls, cell, ',')) continue;
    const long long flat = std::stoll(cell);
    if (flat < 0 || flat >= grid.size())
      throw InvalidInputError("flat index out of range in tensor CSV");
    for (int i = 0; i < p; ++i) std::getline(ls, cell, ',');
    for (int j = 0; j < num_obj; ++j) {
      if (!std::getline(ls, cell, ','))
        throw InvalidInputError("short row in tensor CSV");
      values(flat, j) = std::stod(cell);
    }
    ++seen;
  }
  if (seen != grid.size() || values.array().isNaN().any())
    throw InvalidInputError("tensor CSV does not cover the grid exactly");
  return values;
}

}  // namespace gpnash
