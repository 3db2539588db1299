// Python bindings for the main operations: MVN primitives, GP surrogates,
// equilibrium extraction, acquisition values, and the sequential loop.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "gpnash/loop.hpp"

namespace py = pybind11;
using namespace gpnash;

namespace {

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& obj) {
  const std::string dumped =
      py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return nlohmann::json::parse(dumped);
}

RunConfig run_config_from_kwargs(const py::dict& kw) {
  RunConfig cfg;
  for (const auto& item : kw) {
    const std::string key = py::str(item.first);
    const py::handle v = item.second;
    if (key == "n0")
      cfg.n0 = v.cast<int>();
    else if (key == "n_max")
      cfg.n_max = v.cast<int>();
    else if (key == "mode")
      cfg.mode = acquisition_mode_from_string(v.cast<std::string>());
    else if (key == "stop_eps")
      cfg.stop_eps = v.cast<double>();
    else if (key == "seed")
      cfg.seed = v.cast<std::uint64_t>();
    else if (key == "repetitions_per_point")
      cfg.repetitions_per_point = v.cast<int>();
    else if (key == "kernel")
      cfg.kernel_family = kernel_family_from_string(v.cast<std::string>());
    else if (key == "fit_restarts")
      cfg.fit_restarts = v.cast<int>();
    else if (key == "M")
      cfg.acq.M = v.cast<int>();
    else if (key == "K")
      cfg.acq.K = v.cast<int>();
    else if (key == "R")
      cfg.acq.R = v.cast<int>();
    else if (key == "cdf_switch")
      cfg.acq.cdf_switch = v.cast<int>();
    else if (key == "N_sim")
      cfg.acq.N_sim = v.cast<long long>();
    else if (key == "N_cand")
      cfg.acq.N_cand = v.cast<long long>();
    else if (key == "cdf_accuracy")
      cfg.acq.cdf_accuracy = v.cast<double>();
    else
      throw InvalidInputError("run: unknown option \"" + key + "\"");
  }
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Nash-equilibrium search on discretized games with "
            "Gaussian-process surrogates";

  py::register_exception<InvalidInputError>(m, "InvalidInputError",
                                            PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError",
                                         PyExc_ArithmeticError);

  m.def(
      "mvn_cdf_at_zero",
      [](const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
         double accuracy) {
        const CdfResult r =
            mvn_cdf_at_zero(GaussianSpec(mean, cov), accuracy);
        return py::make_tuple(r.value, r.error_estimate);
      },
      py::arg("mean"), py::arg("cov"), py::arg("accuracy") = 1e-3,
      "P(Z <= 0) for Z ~ N(mean, cov), with an error estimate");

  m.def(
      "mvn_sample",
      [](const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int count,
         std::uint64_t seed) {
        return mvn_sample(GaussianSpec(mean, cov), count, seed);
      },
      py::arg("mean"), py::arg("cov"), py::arg("count"), py::arg("seed"));

  py::class_<GpModel>(m, "GpModel")
      .def_static(
          "fit",
          [](const Eigen::MatrixXd& inputs, const Eigen::VectorXd& outputs,
             const Eigen::VectorXd& noise_vars, const std::string& family,
             int restarts, std::uint64_t seed) {
            FitConfig cfg;
            cfg.restarts = restarts;
            cfg.seed = seed;
            return GpModel::fit(inputs, outputs, noise_vars,
                                kernel_family_from_string(family), cfg);
          },
          py::arg("inputs"), py::arg("outputs"),
          py::arg("noise_vars") = Eigen::VectorXd(),
          py::arg("family") = "matern52", py::arg("restarts") = 10,
          py::arg("seed") = 42)
      .def("predict",
           [](const GpModel& model, const Eigen::MatrixXd& points) {
             Eigen::VectorXd mu, var;
             model.predict(points, mu, var);
             return py::make_tuple(mu, var);
           })
      .def("predict_cov", &GpModel::predict_cov)
      .def("log_marginal_likelihood", &GpModel::log_marginal_likelihood)
      .def_property_readonly("lengthscales",
                             [](const GpModel& model) {
                               return model.kernel().lengthscales;
                             })
      .def_property_readonly("variance", [](const GpModel& model) {
        return model.kernel().variance;
      });

  py::class_<StrategyGrid>(m, "StrategyGrid")
      .def(py::init<std::vector<Eigen::MatrixXd>>(),
           py::arg("per_player_actions"))
      .def_property_readonly("size", &StrategyGrid::size)
      .def_property_readonly("players", &StrategyGrid::players)
      .def_property_readonly("dim", &StrategyGrid::dim)
      .def("point", &StrategyGrid::point)
      .def("all_points", &StrategyGrid::all_points)
      .def("tuple_of", &StrategyGrid::tuple_of)
      .def("flat_of", &StrategyGrid::flat_of)
      .def("bounds", &StrategyGrid::bounds);

  m.def(
      "nash_extract",
      [](const StrategyGrid& grid, const Eigen::MatrixXd& values) {
        const NashOutcome out = nash_extract(PayoffTensor(grid, values));
        return py::make_tuple(out.indices, out.values);
      },
      py::arg("grid"), py::arg("values"),
      "all pure equilibria of a payoff tensor: (indices, values)");

  m.def(
      "fixed_point_solve",
      [](const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
         const Eigen::MatrixXd& bounds, const std::vector<int>& block_dims,
         const Eigen::VectorXd& x0, double alpha, int k_max, double tol,
         int inner_iters) {
        FixedPointConfig cfg;
        cfg.alpha = alpha;
        cfg.k_max = k_max;
        cfg.tol = tol;
        cfg.inner_iters = inner_iters;
        const FixedPointResult r =
            fixed_point_solve(f, bounds, block_dims, x0, cfg);
        return py::make_tuple(r.x, r.eval_count, r.converged);
      },
      py::arg("objective"), py::arg("bounds"), py::arg("block_dims"),
      py::arg("x0"), py::arg("alpha") = 0.5, py::arg("k_max") = 200,
      py::arg("tol") = 1e-4, py::arg("inner_iters") = 3);

  py::class_<GameProblem>(m, "GameProblem")
      .def_property_readonly("name",
                             [](const GameProblem& p) { return p.name; })
      .def_property_readonly(
          "block_dims", [](const GameProblem& p) { return p.block_dims; })
      .def_property_readonly("bounds",
                             [](const GameProblem& p) { return p.bounds; })
      .def_property_readonly("known_ne",
                             [](const GameProblem& p) { return p.known_ne; })
      .def_property_readonly("noisy", &GameProblem::noisy)
      .def("evaluate", [](const GameProblem& p, const Eigen::VectorXd& x) {
        return p.evaluate(x);
      });

  m.def("problem_names", &problem_names);
  m.def(
      "make_problem",
      [](const std::string& name, const py::dict& params) {
        return make_problem(name, py_to_json(params));
      },
      py::arg("name"), py::arg("params") = py::dict());

  m.def(
      "build_factorial_grid",
      [](const GameProblem& problem, const std::vector<int>& counts,
         const std::string& scheme, std::uint64_t seed) {
        const GridScheme s = scheme == "regular" ? GridScheme::kRegular
                            : scheme == "lhd"
                                ? GridScheme::kLhdPerPlayer
                                : throw InvalidInputError(
                                      "scheme must be regular or lhd");
        return build_factorial_grid(problem, counts, s, seed);
      },
      py::arg("problem"), py::arg("counts"), py::arg("scheme") = "regular",
      py::arg("seed") = 0);

  m.def(
      "prob_equilibrium",
      [](const std::vector<GpModel>& models, const StrategyGrid& grid,
         long long index, std::uint64_t seed) {
        MultiGp multi;
        multi.models = models;
        AcquisitionConfig cfg;
        cfg.seed = seed;
        return prob_equilibrium(multi, grid, index, cfg);
      },
      py::arg("models"), py::arg("grid"), py::arg("index"),
      py::arg("seed") = 20090527);

  m.def(
      "prob_equilibrium_all",
      [](const std::vector<GpModel>& models, const StrategyGrid& grid,
         std::uint64_t seed) {
        MultiGp multi;
        multi.models = models;
        AcquisitionConfig cfg;
        cfg.seed = seed;
        return prob_equilibrium_all(multi, grid, cfg);
      },
      py::arg("models"), py::arg("grid"), py::arg("seed") = 20090527);

  m.def("gamma_hat", &gamma_hat, py::arg("nash_points"));

  m.def(
      "initial_design",
      [](const StrategyGrid& grid, int n0, std::uint64_t seed) {
        return initial_design(grid, n0, seed);
      },
      py::arg("grid"), py::arg("n0"), py::arg("seed"));

  m.def(
      "run",
      [](const GameProblem& problem, const StrategyGrid& grid,
         const py::kwargs& kwargs) {
        const RunConfig cfg = run_config_from_kwargs(kwargs);
        const RunLog log = run(problem, grid, cfg);
        return json_to_py(log.to_json(/*include_timing=*/false));
      },
      py::arg("problem"), py::arg("grid"),
      "sequential-design loop; returns the run log as a dict");
}
