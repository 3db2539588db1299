#include "gpnash/problems.hpp"

#include <fcntl.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>

namespace gpnash {

Eigen::VectorXd GameProblem::evaluate_noisy(const Eigen::VectorXd& x,
                                            Rng& rng) const {
  Eigen::VectorXd y = evaluate(x);
  for (Eigen::Index i = 0; i < noise_sd.size() && i < y.size(); ++i)
    y(i) += noise_sd(i) * rng.normal();
  return y;
}

Eigen::Vector2d p1_evaluate(double x1, double x2) {
  constexpr double tol = 1e-9;
  if (x1 < -5.0 - tol || x1 > 10.0 + tol || x2 < -tol || x2 > 15.0 + tol)
    throw InvalidInputError("p1 input outside [-5,10] x [0,15]");
  const double pi = std::numbers::pi;
  const double quad = x2 - 5.1 * std::pow(x1 / (2.0 * pi), 2);
  const double cosine = (1.0 - 1.0 / (8.0 * pi)) * std::cos(x1) + 1.0;
  const double y1 = std::pow(quad + 5.0 / pi * x1 - 6.0, 2) + 10.0 * cosine;
  const double radicand = (10.5 - x1) * (x1 + 5.5) * (x2 + 0.5);
  if (radicand < 0.0)
    throw NumericalError("p1: negative radicand at x1=" + std::to_string(x1) +
                         ", x2=" + std::to_string(x2));
  const double y2 =
      -std::sqrt(radicand) - std::pow(quad - 6.0, 2) / 30.0 - cosine / 3.0;
  return {y1, y2};
}

GameProblem make_p1() {
  GameProblem p;
  p.name = "p1";
  p.block_dims = {1, 1};
  p.bounds.resize(2, 2);
  p.bounds << -5.0, 10.0, 0.0, 15.0;
  p.evaluate = [](const Eigen::VectorXd& x) {
    if (x.size() != 2) throw InvalidInputError("p1 expects 2 coordinates");
    return Eigen::VectorXd(p1_evaluate(x(0), x(1)));
  };
  p.known_ne.resize(2);
  p.known_ne << -3.786, 15.0;
  return p;
}

DifferentialGameSpec default_diffgame_spec(int kappa) {
  DifferentialGameSpec spec;
  spec.kappa = kappa;
  spec.targets = {Eigen::Vector2d(1, 1), Eigen::Vector2d(-1, 1),
                  Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, -1)};
  spec.thetas.resize(4);
  spec.thetas << 0.25, 0.0, 0.5, 0.0;
  return spec;
}

namespace {

// Bernstein basis of degree kappa-1 on [0,1]: kappa polynomials, reducing to
// the constant for kappa=1 and the linear hat pair for kappa=2.
double bernstein(int k, int kappa, double s) {
  const int deg = kappa - 1;
  double binom = 1.0;
  for (int j = 0; j < k; ++j) binom = binom * (deg - j) / (j + 1);
  return binom * std::pow(s, k) * std::pow(1.0 - s, deg - k);
}

}  // namespace

namespace {

Eigen::Vector2d diffgame_integrate(const DifferentialGameSpec& spec,
                                   const Eigen::VectorXd& x,
                                   Eigen::VectorXd& l2) {
  const int p = spec.players();
  const int kp = spec.kappa;
  if (spec.steps < 1 || kp < 1 || p < 1 ||
      static_cast<int>(x.size()) != spec.dim() ||
      spec.thetas.size() != p)
    throw InvalidInputError("inconsistent differential game configuration");

  const double dt = spec.T / spec.steps;
  Eigen::Vector2d z = spec.z0;
  l2 = Eigen::VectorXd::Zero(p);
  for (int step = 0; step < spec.steps; ++step) {
    // Controls and influence weights sampled at the interval midpoint: the
    // step stays explicit (the rhs does not depend on z) while the implied
    // quadrature is second order, so coarse time grids remain usable.
    const double t = (step + 0.5) * dt;
    const double s = t / spec.T;
    Eigen::Vector2d dz = spec.v0;
    for (int i = 0; i < p; ++i) {
      Eigen::Vector2d xi = Eigen::Vector2d::Zero();
      for (int k = 0; k < kp; ++k) {
        const double b = bernstein(k, kp, s);
        xi(0) += x(2 * kp * i + k) * b;
        xi(1) += x(2 * kp * i + kp + k) * b;
      }
      dz += std::exp(-spec.thetas(i) * t) * xi;
      l2(i) += dt * xi.squaredNorm();
    }
    z += dt * dz;
  }
  return z;
}

}  // namespace

Eigen::VectorXd diffgame_evaluate(const DifferentialGameSpec& spec,
                                  const Eigen::VectorXd& x) {
  Eigen::VectorXd l2;
  const Eigen::Vector2d z = diffgame_integrate(spec, x, l2);
  const int p = spec.players();
  Eigen::VectorXd y(p);
  for (int i = 0; i < p; ++i)
    y(i) = 0.5 * (z - spec.targets[i]).squaredNorm() + 0.5 * l2(i);
  return y;
}

Eigen::Vector2d diffgame_final_state(const DifferentialGameSpec& spec,
                                     const Eigen::VectorXd& x) {
  Eigen::VectorXd l2;
  return diffgame_integrate(spec, x, l2);
}

GameProblem make_diffgame(const DifferentialGameSpec& spec) {
  GameProblem p;
  p.name = "diffgame";
  p.block_dims.assign(spec.players(), 2 * spec.kappa);
  p.bounds.resize(spec.dim(), 2);
  p.bounds.col(0).setConstant(-6.0);
  p.bounds.col(1).setConstant(6.0);
  p.evaluate = [spec](const Eigen::VectorXd& x) {
    return diffgame_evaluate(spec, x);
  };
  return p;
}

GameProblem quadratic_game(int p, const std::vector<int>& block_dims,
                           std::uint64_t seed, double noise_sd) {
  if (p < 1 || static_cast<int>(block_dims.size()) != p)
    throw InvalidInputError("quadratic_game: bad player/block configuration");
  int d = 0;
  for (int di : block_dims) {
    if (di < 1) throw InvalidInputError("quadratic_game: bad block dimension");
    d += di;
  }

  for (int attempt = 0; attempt < 8; ++attempt) {
    Rng rng(derive_seed(seed, 0x7a, attempt));
    std::vector<Eigen::MatrixXd> A(p), B(p);
    std::vector<Eigen::VectorXd> c(p);
    std::vector<int> offset(p);
    int at = 0;
    for (int i = 0; i < p; ++i) {
      offset[i] = at;
      const int di = block_dims[i];
      Eigen::MatrixXd g(di, di);
      for (int r = 0; r < di; ++r)
        for (int s = 0; s < di; ++s) g(r, s) = rng.normal();
      A[i] = g * g.transpose() + di * Eigen::MatrixXd::Identity(di, di);
      B[i].resize(di, d - di);
      for (int r = 0; r < di; ++r)
        for (int s = 0; s < d - di; ++s) B[i](r, s) = 0.2 * rng.normal();
      c[i].resize(di);
      for (int r = 0; r < di; ++r) c[i](r) = rng.normal();
      at += di;
    }

    // Stacked first-order conditions: A_i x_i + B_i x_{-i} = -c_i.
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd rhs(d);
    for (int i = 0; i < p; ++i) {
      const int di = block_dims[i];
      M.block(offset[i], offset[i], di, di) = A[i];
      int col = 0;
      for (int j = 0; j < p; ++j) {
        if (j == i) continue;
        const int dj = block_dims[j];
        M.block(offset[i], offset[j], di, dj) = B[i].middleCols(col, dj);
        col += dj;
      }
      rhs.segment(offset[i], di) = -c[i];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible()) continue;
    Eigen::VectorXd ne = lu.solve(rhs);
    if ((M * ne - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) continue;
    if (ne.cwiseAbs().maxCoeff() > 4.0) continue;  // keep NE well inside box

    GameProblem prob;
    prob.name = "quadratic";
    prob.block_dims = block_dims;
    prob.bounds.resize(d, 2);
    prob.bounds.col(0).setConstant(-5.0);
    prob.bounds.col(1).setConstant(5.0);
    prob.known_ne = ne;
    if (noise_sd > 0.0) {
      prob.noise_sd.resize(p);
      // heteroskedastic across objectives
      for (int i = 0; i < p; ++i) prob.noise_sd(i) = noise_sd * (1.0 + 0.25 * i);
    }
    prob.evaluate = [A, B, c, block_dims, offset, p, d](
                        const Eigen::VectorXd& x) {
      if (static_cast<int>(x.size()) != d)
        throw InvalidInputError("quadratic_game: wrong input dimension");
      Eigen::VectorXd y(p);
      for (int i = 0; i < p; ++i) {
        const int di = block_dims[i];
        const Eigen::VectorXd xi = x.segment(offset[i], di);
        Eigen::VectorXd opp(d - di);
        int col = 0;
        for (int j = 0; j < p; ++j) {
          if (j == i) continue;
          opp.segment(col, block_dims[j]) = x.segment(offset[j], block_dims[j]);
          col += block_dims[j];
        }
        y(i) = 0.5 * xi.dot(A[i] * xi) + xi.dot(B[i] * opp) + c[i].dot(xi);
      }
      return y;
    };
    return prob;
  }
  throw NumericalError("quadratic_game: could not generate a solvable instance");
}

Eigen::MatrixXd latin_hypercube(int n, int dim, Rng& rng) {
  if (n < 1 || dim < 1) throw InvalidInputError("latin_hypercube: bad shape");
  Eigen::MatrixXd out(n, dim);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int c = 0; c < dim; ++c) {
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    shuffle(perm, rng);
    for (int i = 0; i < n; ++i)
      out(i, c) = (perm[static_cast<std::size_t>(i)] + rng.uniform()) / n;
  }
  return out;
}

StrategyGrid build_factorial_grid(const GameProblem& problem,
                                  const std::vector<int>& per_player_counts,
                                  GridScheme scheme, std::uint64_t seed,
                                  long long max_size) {
  const int p = problem.players();
  if (static_cast<int>(per_player_counts.size()) != p)
    throw InvalidInputError("per-player counts must match the player count");
  std::vector<Eigen::MatrixXd> actions(p);
  int at = 0;
  for (int i = 0; i < p; ++i) {
    const int di = problem.block_dims[i];
    const int mi = per_player_counts[i];
    if (mi < 1) throw InvalidInputError("action count must be positive");
    const Eigen::MatrixXd box = problem.bounds.middleRows(at, di);
    if (scheme == GridScheme::kRegular) {
      // evenly spaced marginals, cross product within the block
      const int m = static_cast<int>(std::lround(std::pow(mi, 1.0 / di)));
      long long check = 1;
      for (int c = 0; c < di; ++c) check *= m;
      if (check != mi)
        throw InvalidInputError(
            "regular scheme needs a perfect per-block power of actions");
      Eigen::MatrixXd a(mi, di);
      for (int r = 0; r < mi; ++r) {
        int rem = r;
        for (int c = di - 1; c >= 0; --c) {
          const int k = rem % m;
          rem /= m;
          a(r, c) = m == 1 ? 0.5 * (box(c, 0) + box(c, 1))
                           : box(c, 0) + (box(c, 1) - box(c, 0)) * k / (m - 1);
        }
      }
      actions[i] = std::move(a);
    } else {
      Rng rng(derive_seed(seed, 0x9d, static_cast<std::uint64_t>(i)));
      Eigen::MatrixXd u = latin_hypercube(mi, di, rng);
      Eigen::MatrixXd a(mi, di);
      for (int c = 0; c < di; ++c)
        a.col(c) = box(c, 0) + (box(c, 1) - box(c, 0)) * u.col(c).array();
      actions[i] = std::move(a);
    }
    at += di;
  }
  return StrategyGrid(std::move(actions), max_size);
}

struct ExternalProblem::Impl {
  pid_t pid = -1;
  FILE* to_child = nullptr;
  FILE* from_child = nullptr;
};

ExternalProblem::ExternalProblem(const std::string& command, int dim,
                                 int players)
    : impl_(new Impl), dim_(dim), players_(players) {
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
    throw NumericalError("external problem: pipe failed");
  const pid_t pid = fork();
  if (pid < 0) throw NumericalError("external problem: fork failed");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  impl_->pid = pid;
  impl_->to_child = fdopen(in_pipe[1], "w");
  impl_->from_child = fdopen(out_pipe[0], "r");
  if (!impl_->to_child || !impl_->from_child)
    throw NumericalError("external problem: fdopen failed");
}

ExternalProblem::~ExternalProblem() {
  if (impl_->to_child) fclose(impl_->to_child);
  if (impl_->from_child) fclose(impl_->from_child);
  if (impl_->pid > 0) waitpid(impl_->pid, nullptr, 0);
}

Eigen::VectorXd ExternalProblem::operator()(const Eigen::VectorXd& x) {
  if (static_cast<int>(x.size()) != dim_)
    throw InvalidInputError("external problem: wrong input dimension");
  std::ostringstream line;
  line.precision(17);
  for (int i = 0; i < dim_; ++i) line << (i ? " " : "") << x(i);
  line << "\n";
  const std::string out = line.str();
  if (fputs(out.c_str(), impl_->to_child) == EOF || fflush(impl_->to_child))
    throw NumericalError("external problem: write failed (child exited?)");
  char buf[4096];
  if (!fgets(buf, sizeof buf, impl_->from_child))
    throw NumericalError("external problem: no response from child");
  std::istringstream is(buf);
  Eigen::VectorXd y(players_);
  for (int i = 0; i < players_; ++i)
    if (!(is >> y(i)))
      throw NumericalError("external problem: malformed response line");
  return y;
}

std::vector<std::string> problem_names() {
  return {"p1", "diffgame", "quadratic"};
}

GameProblem make_problem(const std::string& name,
                         const nlohmann::json& params) {
  if (name == "p1") return make_p1();
  if (name == "diffgame") {
    DifferentialGameSpec spec =
        default_diffgame_spec(params.value("kappa", 1));
    if (params.contains("steps")) spec.steps = params.at("steps").get<int>();
    return make_diffgame(spec);
  }
  if (name == "quadratic") {
    const int p = params.value("players", 2);
    std::vector<int> blocks =
        params.value("block_dims", std::vector<int>(p, 2));
    return quadratic_game(p, blocks, params.value("seed", 1ULL),
                          params.value("noise_sd", 0.0));
  }
  throw InvalidInputError("unknown problem: " + name);
}

}  // namespace gpnash
