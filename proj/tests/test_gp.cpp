#include "gpnash/gp.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "doctest.h"
#include "gpnash/math.hpp"

using namespace gpnash;

namespace {

Eigen::MatrixXd col(std::initializer_list<double> xs) {
  Eigen::MatrixXd m(xs.size(), 1);
  int i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(xs.size());
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("noise-free fit interpolates two points") {
  Eigen::MatrixXd x = col({0.0, 1.0});
  Eigen::VectorXd y = vec({-1.0, 2.0});
  GpModel m = GpModel::fit(x, y, Eigen::VectorXd::Zero(2),
                           KernelFamily::Matern52);
  Eigen::VectorXd mu, var;
  m.predict(x, mu, var);
  double scale = y.cwiseAbs().maxCoeff();
  CHECK(std::abs(mu(0) - y(0)) < 1e-8 * scale);
  CHECK(std::abs(mu(1) - y(1)) < 1e-8 * scale);
}

TEST_CASE("fit recovers sin on held-out points") {
  const int n = 8;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 2 * M_PI * i / (n - 1.0);
    y(i) = std::sin(x(i, 0));
  }
  GpModel m =
      GpModel::fit(x, y, Eigen::VectorXd::Zero(n), KernelFamily::Matern52);
  Eigen::MatrixXd xt(100, 1);
  for (int i = 0; i < 100; ++i) xt(i, 0) = 2 * M_PI * (i + 0.5) / 100.0;
  Eigen::VectorXd mu, var;
  m.predict(xt, mu, var);
  for (int i = 0; i < 100; ++i)
    CHECK(std::abs(mu(i) - std::sin(xt(i, 0))) < 0.05);
}

TEST_CASE("constant outputs stay constant") {
  Eigen::MatrixXd x = col({0.0, 0.5, 1.0});
  Eigen::VectorXd y = Eigen::VectorXd::Constant(3, 4.2);
  GpModel m =
      GpModel::fit(x, y, Eigen::VectorXd::Zero(3), KernelFamily::Matern52);
  Eigen::VectorXd mu, var;
  m.predict(col({0.25, 0.6, 0.9}), mu, var);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(mu(i) - 4.2) < 1e-6);
}

TEST_CASE("predict at and far from data, fixed hyperparameters") {
  Kernel k{KernelFamily::SquaredExponential, Eigen::VectorXd::Constant(1, 1.0),
           2.5};
  Eigen::MatrixXd x = col({0.0, 1.0, 2.0});
  Eigen::VectorXd y = vec({0.3, -0.7, 0.2});
  GpModel m = GpModel::with_hyperparameters(x, y, Eigen::VectorXd::Zero(3), k);

  Eigen::VectorXd mu, var;
  m.predict(x, mu, var);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(mu(i) - y(i)) < 1e-8);
    CHECK(var(i) < 1e-8);
  }
  m.predict(col({50.0}), mu, var);
  CHECK(std::abs(mu(0)) < 1e-6);
  CHECK(std::abs(var(0) - 2.5) < 1e-6);
}

TEST_CASE("predict matches a naive dense oracle") {
  Kernel k{KernelFamily::SquaredExponential, Eigen::VectorXd::Constant(1, 0.7),
           1.3};
  Eigen::MatrixXd x = col({0.1, 0.9, 1.7});
  Eigen::VectorXd y = vec({1.0, -0.5, 0.25});
  Eigen::VectorXd tau = vec({0.01, 0.02, 0.0});
  GpModel m = GpModel::with_hyperparameters(x, y, tau, k);

  // independent route: explicit K inversion with the same formulas
  Eigen::MatrixXd kk(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      kk(i, j) = k(x.row(i).transpose(), x.row(j).transpose());
  kk.diagonal() += tau;
  kk.diagonal().array() += 1e-10 * k.variance;  // matches model jitter
  Eigen::MatrixXd kinv = kk.inverse();

  Eigen::MatrixXd xt = col({-0.3, 0.4, 1.2, 2.4});
  Eigen::VectorXd mu, var;
  m.predict(xt, mu, var);
  for (int t = 0; t < 4; ++t) {
    Eigen::VectorXd kv(3);
    for (int i = 0; i < 3; ++i)
      kv(i) = k(xt.row(t).transpose(), x.row(i).transpose());
    CHECK(std::abs(mu(t) - kv.dot(kinv * y)) < 1e-8);
    CHECK(std::abs(var(t) - (k.variance - kv.dot(kinv * kv))) < 1e-8);
  }
}

TEST_CASE("predict_cov basics and oracle") {
  Kernel k{KernelFamily::Matern52, Eigen::VectorXd::Constant(1, 0.8), 2.0};
  Eigen::MatrixXd x = col({0.0, 1.0});
  Eigen::VectorXd y = vec({0.5, -0.5});
  GpModel m = GpModel::with_hyperparameters(x, y, Eigen::VectorXd::Zero(2), k);

  CHECK(std::abs(m.predict_cov(col({0.0}), col({0.0}))(0, 0)) < 1e-8);

  Eigen::MatrixXd far = col({100.0, 200.0});
  Eigen::MatrixXd c = m.predict_cov(far, far);
  CHECK(std::abs(c(0, 0) - 2.0) < 1e-6);
  CHECK(std::abs(c(1, 1) - 2.0) < 1e-6);
  CHECK(std::abs(c(0, 1)) < 1e-6);

  // random 4-point case against explicit inversion
  Eigen::MatrixXd xt = col({-0.4, 0.3, 0.6, 1.5});
  Eigen::MatrixXd kk(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      kk(i, j) = k(x.row(i).transpose(), x.row(j).transpose());
  kk.diagonal().array() += 1e-10 * k.variance;
  Eigen::MatrixXd kinv = kk.inverse();
  Eigen::MatrixXd kxa(2, 4), kaa(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j)
      kxa(i, j) = k(x.row(i).transpose(), xt.row(j).transpose());
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      kaa(i, j) = k(xt.row(i).transpose(), xt.row(j).transpose());
  Eigen::MatrixXd oracle = kaa - kxa.transpose() * kinv * kxa;
  CHECK((m.predict_cov(xt, xt) - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("predict and predict_cov diagonal agree") {
  Rng rng(3);
  Eigen::MatrixXd x(6, 2);
  Eigen::VectorXd y(6);
  for (int i = 0; i < 6; ++i) {
    x(i, 0) = rng.uniform();
    x(i, 1) = rng.uniform();
    y(i) = rng.normal();
  }
  GpModel m =
      GpModel::fit(x, y, Eigen::VectorXd::Zero(6), KernelFamily::Matern52);
  Eigen::MatrixXd xt(5, 2);
  for (int i = 0; i < 5; ++i) {
    xt(i, 0) = rng.uniform();
    xt(i, 1) = rng.uniform();
  }
  Eigen::VectorXd mu, var;
  m.predict(xt, mu, var);
  Eigen::MatrixXd c = m.predict_cov(xt, xt);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(var(i) - c(i, i)) < 1e-10);
}

TEST_CASE("observation_dist composes predict and noise") {
  Eigen::MatrixXd x = col({0.0, 1.0, 2.0});
  Eigen::VectorXd y1 = vec({1.0, 2.0, 0.5});
  Eigen::VectorXd y2 = vec({-1.0, 0.0, 1.0});
  MultiGp multi;
  multi.models.push_back(
      GpModel::fit(x, y1, Eigen::VectorXd::Zero(3), KernelFamily::Matern52));
  multi.models.push_back(
      GpModel::fit(x, y2, Eigen::VectorXd::Zero(3), KernelFamily::Matern52));

  // noise-free at a training point: delta at the observations
  GaussianSpec at = observation_dist(multi, vec({1.0}), vec({0.0, 0.0}));
  CHECK(std::abs(at.mean(0) - 2.0) < 1e-6);
  CHECK(std::abs(at.mean(1) - 0.0) < 1e-6);
  CHECK(at.covariance.cwiseAbs().maxCoeff() < 1e-6);

  GaussianSpec noisy = observation_dist(multi, vec({0.5}), vec({1.0, 1.0}));
  CHECK(noisy.covariance(0, 0) >= 1.0);
  CHECK(noisy.covariance(1, 1) >= 1.0);
  CHECK(noisy.covariance(0, 1) == 0.0);

  // single-objective consistency with predict + tau^2
  Eigen::VectorXd mu, var;
  multi.models[0].predict(col({0.5}), mu, var);
  GaussianSpec one = observation_dist({{multi.models[0]}}, vec({0.5}),
                                      vec({0.3}));
  CHECK(std::abs(one.mean(0) - mu(0)) < 1e-12);
  CHECK(std::abs(one.covariance(0, 0) - (var(0) + 0.3)) < 1e-12);
}

namespace {

// fixed raw-unit hyperparameters so refit oracles can reuse the same kernel
MultiGp small_multi(Eigen::MatrixXd* xout = nullptr) {
  Eigen::MatrixXd x = col({0.0, 0.35, 0.8});
  Eigen::VectorXd y1 = vec({0.2, -0.4, 0.9});
  Eigen::VectorXd y2 = vec({1.0, 0.3, -0.2});
  Kernel k{KernelFamily::Matern52, Eigen::VectorXd::Constant(1, 0.3), 1.0};
  MultiGp multi;
  multi.models.push_back(
      GpModel::with_hyperparameters(x, y1, Eigen::VectorXd::Zero(3), k));
  multi.models.push_back(
      GpModel::with_hyperparameters(x, y2, Eigen::VectorXd::Zero(3), k));
  if (xout) *xout = x;
  return multi;
}

}  // namespace

TEST_CASE("simulate_paths honors observations, moments and seed") {
  Eigen::MatrixXd x;
  MultiGp multi = small_multi(&x);
  Eigen::MatrixXd sim(4, 1);
  sim << 0.0, 0.35, 0.8, 0.55;

  PathEnsemble e = simulate_paths(multi, sim, 2000, 77);
  // draws at noise-free training points reproduce the observations
  for (int i = 0; i < 2; ++i)
    for (int t = 0; t < 3; ++t) {
      double obs = multi.models[i].outputs()(t);
      CHECK((e.draws[i].col(t).array() - obs).abs().maxCoeff() < 1e-4);
    }
  // moments at the unobserved point match predict within 3 standard errors
  for (int i = 0; i < 2; ++i) {
    Eigen::VectorXd mu, var;
    multi.models[i].predict(sim.bottomRows(1), mu, var);
    const auto colv = e.draws[i].col(3);
    double mean = colv.mean();
    double sd = std::sqrt((colv.array() - mean).square().sum() / 1999.0);
    CHECK(std::abs(mean - mu(0)) < 3.0 * sd / std::sqrt(2000.0) + 1e-12);
    double sample_var = sd * sd;
    double var_se = sample_var * std::sqrt(2.0 / 1999.0);
    CHECK(std::abs(sample_var - var(0)) < 3.0 * var_se + 1e-12);
  }
  PathEnsemble e2 = simulate_paths(multi, sim, 2000, 77);
  CHECK(e.draws[0] == e2.draws[0]);
  CHECK(e.draws[1] == e2.draws[1]);
}

TEST_CASE("foxy self-consistency and exact conditioning") {
  MultiGp multi = small_multi();
  Eigen::MatrixXd sim(3, 1);
  sim << 0.2, 0.55, 0.9;
  PathEnsemble e = simulate_paths(multi, sim, 50, 5);
  Eigen::VectorXd x_new = vec({0.55});
  Eigen::VectorXd zero_noise = vec({0.0, 0.0});

  // updating with a draw's own value leaves that draw unchanged
  int j = 7;
  Eigen::VectorXd f_self(2);
  f_self << e.draws[0](j, 1), e.draws[1](j, 1);
  PathEnsemble u = foxy_update(e, multi, x_new, f_self, zero_noise);
  CHECK((u.draws[0].row(j) - e.draws[0].row(j)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((u.draws[1].row(j) - e.draws[1].row(j)).cwiseAbs().maxCoeff() < 1e-10);

  // zero-noise conditioning pins every draw at the site
  Eigen::VectorXd f_new = vec({0.123, -0.456});
  PathEnsemble u2 = foxy_update(e, multi, x_new, f_new, zero_noise);
  CHECK((u2.draws[0].col(1).array() - 0.123).abs().maxCoeff() < 1e-8);
  CHECK((u2.draws[1].col(1).array() + 0.456).abs().maxCoeff() < 1e-8);
}

TEST_CASE("foxy against a refit-and-resimulate oracle") {
  Eigen::MatrixXd x;
  MultiGp multi = small_multi(&x);
  Eigen::MatrixXd sim(4, 1);
  sim << 0.1, 0.45, 0.7, 0.95;
  const int m_draws = 2000;
  PathEnsemble e = simulate_paths(multi, sim, m_draws, 9);
  Eigen::VectorXd x_new = vec({0.45});
  Eigen::VectorXd f_new = vec({0.05, 0.6});
  PathEnsemble u = foxy_update(e, multi, x_new, f_new, vec({0.0, 0.0}));

  // oracle: append the observation and refit with the same hyperparameters
  MultiGp refit;
  for (int i = 0; i < 2; ++i) {
    Eigen::MatrixXd x2(4, 1);
    x2 << x, x_new.transpose();
    Eigen::VectorXd y2(4);
    y2 << multi.models[i].outputs(), f_new(i);
    refit.models.push_back(GpModel::with_hyperparameters(
        x2, y2, Eigen::VectorXd::Zero(4), multi.models[i].kernel()));
  }
  PathEnsemble fresh = simulate_paths(refit, sim, m_draws, 10);
  for (int i = 0; i < 2; ++i)
    for (int t = 0; t < 4; ++t) {
      double mu_u = u.draws[i].col(t).mean();
      double mu_f = fresh.draws[i].col(t).mean();
      double sd = std::sqrt(
          (fresh.draws[i].col(t).array() - mu_f).square().sum() /
          (m_draws - 1.0));
      double se = sd / std::sqrt(static_cast<double>(m_draws));
      CHECK(std::abs(mu_u - mu_f) < 3.0 * std::sqrt(2.0) * se + 1e-9);
    }
}

TEST_CASE("foxy distributional exactness (KS at a probe point)") {
  Eigen::MatrixXd x;
  MultiGp multi = small_multi(&x);
  Eigen::MatrixXd sim(3, 1);
  sim << 0.15, 0.5, 0.9;
  Eigen::VectorXd x_new = vec({0.5});
  Eigen::VectorXd f_new = vec({0.1, 0.2});
  Eigen::VectorXd tau = vec({0.04, 0.04});

  // exact conditioned distribution at the probe point (index 2)
  MultiGp refit;
  for (int i = 0; i < 2; ++i) {
    Eigen::MatrixXd x2(4, 1);
    x2 << x, x_new.transpose();
    Eigen::VectorXd y2(4);
    y2 << multi.models[i].outputs(), f_new(i);
    Eigen::VectorXd tv(4);
    tv << 0.0, 0.0, 0.0, tau(i);
    refit.models.push_back(GpModel::with_hyperparameters(
        x2, y2, tv, multi.models[i].kernel()));
  }
  Eigen::VectorXd mu_ref, var_ref;
  refit.models[0].predict(sim.bottomRows(1), mu_ref, var_ref);

  const int m_draws = 2000;
  const double ks_crit = 1.6276 / std::sqrt(static_cast<double>(m_draws));
  int rejections = 0;
  for (int rep = 0; rep < 100; ++rep) {
    PathEnsemble e = simulate_paths(multi, sim, m_draws, 100 + rep);
    PathEnsemble u = foxy_update(e, multi, x_new, f_new, tau, 17 + rep);
    std::vector<double> vals(u.draws[0].col(2).begin(),
                             u.draws[0].col(2).end());
    std::sort(vals.begin(), vals.end());
    double ks = 0.0;
    for (int i = 0; i < m_draws; ++i) {
      double cdf =
          norm_cdf((vals[i] - mu_ref(0)) / std::sqrt(var_ref(0)));
      ks = std::max(ks, std::abs(cdf - (i + 1.0) / m_draws));
      ks = std::max(ks, std::abs(cdf - i * 1.0 / m_draws));
    }
    if (ks > ks_crit) ++rejections;
  }
  CHECK(rejections <= 5);
}

TEST_CASE("adding an observation never inflates posterior variance") {
  Rng rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    int dim = 1 + rep % 2;
    int n = 5;
    Eigen::MatrixXd x(n, dim);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < dim; ++k) x(i, k) = rng.uniform();
      y(i) = rng.normal();
    }
    Kernel kern{KernelFamily::Matern52,
                Eigen::VectorXd::Constant(dim, 0.4), 1.0};
    GpModel before =
        GpModel::with_hyperparameters(x, y, Eigen::VectorXd::Zero(n), kern);
    Eigen::MatrixXd x2(n + 1, dim);
    Eigen::VectorXd y2(n + 1);
    x2.topRows(n) = x;
    y2.head(n) = y;
    for (int k = 0; k < dim; ++k) x2(n, k) = rng.uniform();
    y2(n) = rng.normal();
    GpModel after = GpModel::with_hyperparameters(
        x2, y2, Eigen::VectorXd::Zero(n + 1), kern);
    Eigen::MatrixXd grid(20, dim);
    for (int i = 0; i < 20; ++i)
      for (int k = 0; k < dim; ++k) grid(i, k) = rng.uniform();
    Eigen::VectorXd mu_b, var_b, mu_a, var_a;
    before.predict(grid, mu_b, var_b);
    after.predict(grid, mu_a, var_a);
    for (int i = 0; i < 20; ++i) CHECK(var_a(i) <= var_b(i) + 1e-8);
  }
}

TEST_CASE("fitted likelihood beats random hyperparameters") {
  Rng rng(8);
  Eigen::MatrixXd x(12, 1);
  Eigen::VectorXd y(12);
  for (int i = 0; i < 12; ++i) {
    x(i, 0) = i / 11.0;
    y(i) = std::sin(6 * x(i, 0)) + 0.1 * rng.normal();
  }
  GpModel fit = GpModel::fit(x, y, Eigen::VectorXd::Constant(12, 0.01),
                             KernelFamily::Matern52);
  double best = fit.log_marginal_likelihood();
  for (int rep = 0; rep < 10; ++rep) {
    Kernel k{KernelFamily::Matern52,
             Eigen::VectorXd::Constant(1, std::exp(rng.normal())),
             std::exp(rng.normal())};
    GpModel other = GpModel::with_hyperparameters(
        x, y, Eigen::VectorXd::Constant(12, 0.01), k);
    CHECK(best >= other.log_marginal_likelihood() - 1e-9);
  }
}

TEST_CASE("model JSON round trip") {
  Eigen::MatrixXd x = col({0.0, 0.4, 1.0});
  Eigen::VectorXd y = vec({2.0, 5.0, 3.0});
  GpModel m = GpModel::fit(x, y, Eigen::VectorXd::Zero(3),
                           KernelFamily::Matern32);
  GpModel m2 = GpModel::from_json(m.to_json());
  Eigen::MatrixXd xt = col({0.2, 0.7});
  Eigen::VectorXd mu1, var1, mu2, var2;
  m.predict(xt, mu1, var1);
  m2.predict(xt, mu2, var2);
  CHECK((mu1 - mu2).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((var1 - var2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("degenerate foxy update is rejected") {
  MultiGp multi = small_multi();
  Eigen::MatrixXd sim(2, 1);
  sim << 0.0, 0.35;  // both already observed, noise-free
  PathEnsemble e = simulate_paths(multi, sim, 10, 3);
  CHECK_THROWS_AS(foxy_update(e, multi, vec({0.0}), vec({0.2, 1.0}),
                              vec({0.0, 0.0})),
                  DegenerateUpdateError);
}
