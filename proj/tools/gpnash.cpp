// Command-line front end: run experiments, replicate the benchmark tables,
// and emit JSONL/CSV logs and plot-ready data.

#include <CLI11.hpp>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gpnash/loop.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gpnash;

namespace {

// schema violation: reported with exit code 2
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& item : obj.items())
    if (!allowed.count(item.key()))
      throw SchemaError(where + ": unknown key \"" + item.key() + "\"");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Experiment {
  json problem_params;  // everything but "name"
  std::string problem_name;
  std::vector<int> grid_counts;
  GridScheme grid_scheme = GridScheme::kRegular;
  std::uint64_t grid_seed = 0;
  RunConfig run;
  FixedPointConfig baseline;
  int baseline_starts = 5;
  int replicates = 1;
  std::string out_dir = "out";
};

RunConfig parse_run(const json& r) {
  reject_unknown_keys(
      r,
      {"n0", "n_max", "mode", "stop_eps", "seed", "repetitions_per_point",
       "kernel", "fit_restarts", "M", "K", "R", "cdf_switch", "N_sim",
       "N_cand", "cdf_accuracy"},
      "run");
  RunConfig cfg;
  cfg.n0 = r.value("n0", cfg.n0);
  cfg.n_max = r.value("n_max", cfg.n_max);
  if (r.contains("mode"))
    cfg.mode = acquisition_mode_from_string(r.at("mode").get<std::string>());
  cfg.stop_eps = r.value("stop_eps", cfg.stop_eps);
  cfg.seed = r.value("seed", cfg.seed);
  cfg.repetitions_per_point =
      r.value("repetitions_per_point", cfg.repetitions_per_point);
  if (r.contains("kernel"))
    cfg.kernel_family =
        kernel_family_from_string(r.at("kernel").get<std::string>());
  cfg.fit_restarts = r.value("fit_restarts", cfg.fit_restarts);
  cfg.acq.M = r.value("M", cfg.acq.M);
  cfg.acq.K = r.value("K", cfg.acq.K);
  cfg.acq.R = r.value("R", cfg.acq.R);
  cfg.acq.cdf_switch = r.value("cdf_switch", cfg.acq.cdf_switch);
  cfg.acq.N_sim = r.value("N_sim", cfg.acq.N_sim);
  cfg.acq.N_cand = r.value("N_cand", cfg.acq.N_cand);
  cfg.acq.cdf_accuracy = r.value("cdf_accuracy", cfg.acq.cdf_accuracy);
  return cfg;
}

Experiment parse_experiment(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw SchemaError("cannot open experiment file: " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("experiment file is not valid JSON: ") +
                      e.what());
  }
  reject_unknown_keys(
      j, {"problem", "grid", "run", "baseline", "replicates", "out_dir"},
      "experiment");
  Experiment ex;

  const json& prob = j.at("problem");
  if (!prob.contains("name"))
    throw SchemaError("problem: missing required key \"name\"");
  ex.problem_name = prob.at("name").get<std::string>();
  ex.problem_params = prob;
  ex.problem_params.erase("name");
  reject_unknown_keys(
      ex.problem_params,
      {"kappa", "steps", "players", "block_dims", "seed", "noise_sd"},
      "problem");

  const json& grid = j.at("grid");
  reject_unknown_keys(grid, {"counts", "scheme", "seed"}, "grid");
  ex.grid_counts = grid.at("counts").get<std::vector<int>>();
  const std::string scheme = grid.value("scheme", std::string("regular"));
  if (scheme == "regular")
    ex.grid_scheme = GridScheme::kRegular;
  else if (scheme == "lhd")
    ex.grid_scheme = GridScheme::kLhdPerPlayer;
  else
    throw SchemaError("grid.scheme: expected \"regular\" or \"lhd\", got \"" +
                      scheme + "\"");
  ex.grid_seed = grid.value("seed", 0ULL);

  if (j.contains("run")) ex.run = parse_run(j.at("run"));
  if (j.contains("baseline")) {
    const json& b = j.at("baseline");
    reject_unknown_keys(
        b, {"starts", "alpha", "k_max", "tol", "inner_iters"}, "baseline");
    ex.baseline_starts = b.value("starts", ex.baseline_starts);
    ex.baseline.alpha = b.value("alpha", ex.baseline.alpha);
    ex.baseline.k_max = b.value("k_max", ex.baseline.k_max);
    ex.baseline.tol = b.value("tol", ex.baseline.tol);
    ex.baseline.inner_iters = b.value("inner_iters", ex.baseline.inner_iters);
  }
  ex.replicates = j.value("replicates", 1);
  if (ex.replicates < 1) throw SchemaError("replicates: must be >= 1");
  ex.out_dir = j.value("out_dir", ex.out_dir);
  return ex;
}

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> mode;
  int jobs = 1;
  bool quiet = false;
};

// precedence: command-line flag > environment variable > experiment file
void apply_overrides(Experiment& ex, const CommonFlags& flags) {
  if (const char* s = std::getenv("GPNASH_SEED"))
    ex.run.seed = std::strtoull(s, nullptr, 10);
  if (const char* s = std::getenv("GPNASH_OUT")) ex.out_dir = s;
  if (flags.seed) ex.run.seed = *flags.seed;
  if (flags.out) ex.out_dir = *flags.out;
  if (flags.mode) ex.run.mode = acquisition_mode_from_string(*flags.mode);
}

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    os << content;
  }
  fs::rename(tmp, path);
}

struct ReplicateResult {
  int replicate = 0;
  RunLog log;
};

// one sequential-design run; resumes from the on-disk checkpoint if present
ReplicateResult run_replicate(const GameProblem& problem,
                              const StrategyGrid& grid, const Experiment& ex,
                              int r) {
  RunConfig cfg = ex.run;
  cfg.seed = ex.replicates == 1
                 ? cfg.seed
                 : derive_seed(cfg.seed, 0x5eu, static_cast<unsigned>(r));
  const fs::path ckpt_path =
      fs::path(ex.out_dir) / ("run_r" + std::to_string(r) + ".ckpt.json");

  Checkpoint resume;
  bool have_resume = false;
  if (fs::exists(ckpt_path)) {
    std::ifstream is(ckpt_path);
    resume = Checkpoint::from_json(json::parse(is));
    have_resume = true;
  }
  const CheckpointSink sink = [&](const Checkpoint& c) {
    write_atomic(ckpt_path, c.to_json().dump());
  };
  ReplicateResult out;
  out.replicate = r;
  out.log = run(problem, grid, cfg, have_resume ? &resume : nullptr, sink);

  std::ostringstream os;
  write_runlog_jsonl(os, out.log);
  write_atomic(fs::path(ex.out_dir) / ("run_r" + std::to_string(r) + ".jsonl"),
               os.str());
  return out;
}

void write_solve_outputs(const Experiment& ex, const GameProblem& problem,
                         const StrategyGrid& grid,
                         const std::vector<ReplicateResult>& results) {
  const int p = problem.players();
  const int d = problem.dim();
  std::ostringstream summary;
  summary << "replicate,evaluations,stopped_early,no_ne_warning,final_index";
  for (int c = 0; c < d; ++c) summary << ",x_" << (c + 1);
  for (int i = 0; i < p; ++i) summary << ",y_" << (i + 1);
  summary << "\n";
  std::ostringstream plot;
  plot << "replicate,iteration,eval_count,chosen_index,best_pe,criterion";
  for (int i = 0; i < p; ++i) plot << ",y_" << (i + 1);
  plot << "\n";

  for (const auto& res : results) {
    const RunLog& log = res.log;
    summary << res.replicate << "," << log.eval_count << ","
            << (log.stopped_early ? 1 : 0) << ","
            << (log.no_ne_warning ? 1 : 0) << "," << log.final_index;
    const Eigen::VectorXd x = grid.point(log.final_index);
    for (int c = 0; c < d; ++c) summary << "," << fmt(x(c));
    for (int i = 0; i < p; ++i) summary << "," << fmt(log.final_values(i));
    summary << "\n";

    long long evals = 0;
    std::size_t row = 0;
    const int reps =
        problem.noisy() ? std::max(1, ex.run.repetitions_per_point) : 1;
    evals = static_cast<long long>(ex.run.n0) * reps;
    for (const auto& rec : log.iterations) {
      if (rec.chosen_index >= 0) evals += reps;
      plot << res.replicate << "," << rec.iteration << "," << evals << ","
           << rec.chosen_index << "," << fmt(rec.best_pe) << ","
           << fmt(rec.criterion);
      for (int i = 0; i < p; ++i)
        plot << ","
             << (rec.observed.size() == p ? fmt(rec.observed(i)) : "");
      plot << "\n";
      ++row;
    }
  }
  write_atomic(fs::path(ex.out_dir) / "summary.csv", summary.str());
  write_atomic(fs::path(ex.out_dir) / "convergence.csv", plot.str());
}

std::vector<ReplicateResult> run_replicates(const GameProblem& problem,
                                            const StrategyGrid& grid,
                                            const Experiment& ex, int jobs,
                                            bool quiet) {
  std::vector<ReplicateResult> results(ex.replicates);
  std::atomic<int> next{0};
  std::mutex io;
  auto worker = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= ex.replicates) return;
      results[r] = run_replicate(problem, grid, ex, r);
      if (!quiet) {
        std::lock_guard<std::mutex> lock(io);
        std::cerr << "replicate " << r << ": " << results[r].log.eval_count
                  << " evaluations, final index "
                  << results[r].log.final_index << "\n";
      }
    }
  };
  const int n_threads = std::max(1, std::min(jobs, ex.replicates));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

int cmd_solve(const std::string& file, const CommonFlags& flags) {
  Experiment ex = parse_experiment(file);
  apply_overrides(ex, flags);
  const GameProblem problem = make_problem(ex.problem_name, ex.problem_params);
  const StrategyGrid grid = build_factorial_grid(
      problem, ex.grid_counts, ex.grid_scheme, ex.grid_seed);
  fs::create_directories(ex.out_dir);
  const auto results =
      run_replicates(problem, grid, ex, flags.jobs, flags.quiet);
  write_solve_outputs(ex, problem, grid, results);
  if (!flags.quiet)
    std::cerr << "wrote " << ex.out_dir << "/summary.csv and "
              << ex.out_dir << "/convergence.csv\n";
  return 0;
}

// Flags a terminal point that is not an equilibrium of the discretized
// game: snap to the nearest grid point and evaluate each player's whole
// own-action slice through it; the point is flagged when some player's own
// action is not a slice minimizer (within a small relative tolerance).
bool flag_non_equilibrium(const GameProblem& problem, const StrategyGrid& grid,
                          const Eigen::VectorXd& x, long long* evals_used) {
  std::vector<int> tuple(grid.players());
  int off = 0;
  for (int i = 0; i < grid.players(); ++i) {
    const Eigen::MatrixXd& acts = grid.actions(i);
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < acts.rows(); ++a) {
      const double d =
          (acts.row(a).transpose() -
           x.segment(off, grid.block_dim(i))).squaredNorm();
      if (d < best) {
        best = d;
        tuple[i] = a;
      }
    }
    off += grid.block_dim(i);
  }
  const long long base = grid.flat_of(tuple);
  for (int i = 0; i < grid.players(); ++i) {
    const auto slice = grid.own_action_slice(i, base);
    Eigen::VectorXd vals(slice.size());
    for (std::size_t a = 0; a < slice.size(); ++a) {
      vals(a) = problem.evaluate(grid.point(slice[a]))(i);
      if (evals_used) ++*evals_used;
    }
    const double own = vals(tuple[i]);
    const double min = vals.minCoeff();
    if (own > min + 1e-6 * (1.0 + std::abs(min))) return true;
  }
  return false;
}

int cmd_baseline(const std::string& file, const CommonFlags& flags) {
  Experiment ex = parse_experiment(file);
  apply_overrides(ex, flags);
  const GameProblem problem = make_problem(ex.problem_name, ex.problem_params);
  const StrategyGrid grid = build_factorial_grid(
      problem, ex.grid_counts, ex.grid_scheme, ex.grid_seed);
  fs::create_directories(ex.out_dir);
  const int d = problem.dim();
  const int p = problem.players();

  Rng rng(derive_seed(ex.run.seed, 0xba5eu));
  const Eigen::MatrixXd u = latin_hypercube(ex.baseline_starts, d, rng);
  std::ostringstream summary;
  summary << "start,converged,evaluations,flagged_non_ne";
  for (int c = 0; c < d; ++c) summary << ",x_" << (c + 1);
  for (int i = 0; i < p; ++i) summary << ",y_" << (i + 1);
  summary << "\n";

  for (int s = 0; s < ex.baseline_starts; ++s) {
    Eigen::VectorXd x0(d);
    for (int c = 0; c < d; ++c)
      x0(c) = problem.bounds(c, 0) +
              u(s, c) * (problem.bounds(c, 1) - problem.bounds(c, 0));
    const FixedPointResult res =
        fixed_point_solve(problem.evaluate, problem.bounds,
                          problem.block_dims, x0, ex.baseline);
    long long flag_evals = 0;
    const bool flagged =
        flag_non_equilibrium(problem, grid, res.x, &flag_evals);
    const Eigen::VectorXd y = problem.evaluate(res.x);
    summary << s << "," << (res.converged ? 1 : 0) << "," << res.eval_count
            << "," << (flagged ? 1 : 0);
    for (int c = 0; c < d; ++c) summary << "," << fmt(res.x(c));
    for (int i = 0; i < p; ++i) summary << "," << fmt(y(i));
    summary << "\n";
    if (!flags.quiet)
      std::cerr << "start " << s << ": converged=" << res.converged
                << " evaluations=" << res.eval_count
                << " flagged=" << flagged << "\n";
  }
  write_atomic(fs::path(ex.out_dir) / "baseline.csv", summary.str());
  if (!flags.quiet)
    std::cerr << "wrote " << ex.out_dir << "/baseline.csv\n";
  return 0;
}

Experiment table_experiment(int table, double scale) {
  Experiment ex;
  if (table == 1) {
    const int m = std::max(
        5, static_cast<int>(std::lround(31.0 * std::sqrt(scale))));
    ex.problem_name = "p1";
    ex.problem_params = json::object();
    ex.grid_counts = {m, m};
    ex.grid_scheme = GridScheme::kRegular;
    ex.run.n0 = 6;
    ex.run.n_max = 30;
    ex.run.stop_eps = 0.05;
    ex.run.acq.N_sim = 100;
    ex.run.acq.N_cand = 50;
    ex.replicates = 5;
    ex.baseline_starts = 5;
  } else {
    const int m = std::max(
        3, static_cast<int>(std::lround(17.0 * std::sqrt(scale))));
    ex.problem_name = "diffgame";
    ex.problem_params = json::object();
    ex.grid_counts = {m, m, m, m};
    ex.grid_scheme = GridScheme::kLhdPerPlayer;
    ex.grid_seed = 1;
    ex.run.n0 = 40;
    ex.run.n_max = 120;
    ex.run.stop_eps = 0.05;
    ex.run.acq.N_sim = 256;
    ex.run.acq.N_cand = 32;
    ex.replicates = 3;
    ex.baseline_starts = 3;
  }
  return ex;
}

int cmd_table(int table, double scale, const CommonFlags& flags) {
  if (table != 1 && table != 2) {
    std::cerr << "unknown table id: " << table << " (expected 1 or 2)\n";
    return 2;
  }
  const bool full = std::abs(scale - 1.0) < 1e-12;
  if (table == 2 && full)
    std::cerr << "note: table 2 at full scale evaluates a 17^4 grid and may "
                 "run for hours\n";
  Experiment base = table_experiment(table, scale);
  apply_overrides(base, flags);
  const GameProblem problem =
      make_problem(base.problem_name, base.problem_params);
  const StrategyGrid grid = build_factorial_grid(
      problem, base.grid_counts, base.grid_scheme, base.grid_seed);
  fs::create_directories(base.out_dir);

  struct Row {
    std::string name;
    long long lo = 0, hi = 0;
    std::string published;
  };
  std::vector<Row> rows;

  for (const AcquisitionMode mode :
       {AcquisitionMode::kProbEquilibrium, AcquisitionMode::kSur}) {
    Experiment ex = base;
    ex.run.mode = mode;
    if (mode == AcquisitionMode::kSur)
      ex.run.stop_eps = table == 1 ? 1e-6 : 1e-8;
    ex.out_dir =
        (fs::path(base.out_dir) / ("table_" + to_string(mode))).string();
    fs::create_directories(ex.out_dir);
    const auto results =
        run_replicates(problem, grid, ex, flags.jobs, flags.quiet);
    write_solve_outputs(ex, problem, grid, results);
    Row row;
    row.name = to_string(mode);
    row.lo = row.hi = results[0].log.eval_count;
    for (const auto& r : results) {
      row.lo = std::min(row.lo, r.log.eval_count);
      row.hi = std::max(row.hi, r.log.eval_count);
    }
    if (full)
      row.published = table == 1
                          ? (mode == AcquisitionMode::kSur ? "8-14" : "9-10")
                          : (mode == AcquisitionMode::kSur ? "81-88" : "83-95");
    rows.push_back(row);
  }

  // fixed-point baseline
  {
    Rng rng(derive_seed(base.run.seed, 0xba5eu));
    const Eigen::MatrixXd u =
        latin_hypercube(base.baseline_starts, problem.dim(), rng);
    Row row;
    row.name = "fixed-point";
    bool first = true;
    for (int s = 0; s < base.baseline_starts; ++s) {
      Eigen::VectorXd x0(problem.dim());
      for (int c = 0; c < problem.dim(); ++c)
        x0(c) = problem.bounds(c, 0) +
                u(s, c) * (problem.bounds(c, 1) - problem.bounds(c, 0));
      const FixedPointResult res = fixed_point_solve(
          problem.evaluate, problem.bounds, problem.block_dims, x0);
      if (first) {
        row.lo = row.hi = res.eval_count;
        first = false;
      }
      row.lo = std::min(row.lo, res.eval_count);
      row.hi = std::max(row.hi, res.eval_count);
    }
    if (full && table == 1) row.published = "200-1000";
    rows.push_back(row);
  }

  std::cout << "table " << table << " (scale " << scale
            << "): evaluations per run\n";
  for (const auto& row : rows) {
    std::cout << "  " << row.name << ": obtained " << row.lo << "-" << row.hi;
    if (!row.published.empty())
      std::cout << " (published " << row.published << ")";
    std::cout << "\n";
  }
  return 0;
}

int cmd_problems() {
  for (const auto& name : problem_names()) std::cout << name << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nash-equilibrium search on discretized games with "
               "Gaussian-process surrogates"};
  app.require_subcommand(1);
  CommonFlags flags;

  std::string solve_file, baseline_file;
  auto* solve = app.add_subcommand("solve", "run the sequential design loop");
  solve->add_option("experiment", solve_file, "experiment JSON file")
      ->required();
  auto* baseline =
      app.add_subcommand("baseline", "run the fixed-point baseline");
  baseline->add_option("experiment", baseline_file, "experiment JSON file")
      ->required();
  int table_id = 0;
  double budget_scale = 1.0;
  auto* table =
      app.add_subcommand("table", "replicate a benchmark table at a scale");
  table->add_option("id", table_id, "table id (1 or 2)")->required();
  table->add_option("--budget-scale", budget_scale,
                    "scale factor for the grid size");
  auto* problems =
      app.add_subcommand("problems", "list the registered problems");

  for (auto* sub : {solve, baseline, table}) {
    sub->add_option_function<std::uint64_t>(
        "--seed", [&flags](std::uint64_t v) { flags.seed = v; },
        "override the run seed");
    sub->add_option_function<std::string>(
        "--out", [&flags](const std::string& v) { flags.out = v; },
        "override the output directory");
    sub->add_option("--jobs", flags.jobs, "parallel replicates");
    sub->add_flag("--quiet", flags.quiet, "suppress progress output");
  }
  solve->add_option_function<std::string>(
      "--mode", [&flags](const std::string& v) { flags.mode = v; },
      "acquisition mode: pe or sur");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*solve) return cmd_solve(solve_file, flags);
    if (*baseline) return cmd_baseline(baseline_file, flags);
    if (*table) return cmd_table(table_id, budget_scale, flags);
    if (*problems) return cmd_problems();
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
