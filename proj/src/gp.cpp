#include "gpnash/gp.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "gpnash/detail/optim.hpp"
#include "gpnash/math.hpp"

namespace gpnash {

namespace {

constexpr double kBaseJitter = 1e-10;

// parameter box in log space (scaled units)
constexpr double kLogLenLo = -5.3, kLogLenHi = 3.9;     // ~[5e-3, 50]
constexpr double kLogVarLo = -9.2, kLogVarHi = 9.2;     // ~[1e-4, 1e4]
constexpr double kLogNoiseLo = -20.7, kLogNoiseHi = 4.6;  // ~[1e-9, 1e2]

double clamp_pen(double& v, double lo, double hi, double* pen) {
  if (v < lo) {
    *pen += (lo - v) * (lo - v);
    v = lo;
  } else if (v > hi) {
    *pen += (v - hi) * (v - hi);
    v = hi;
  }
  return v;
}

}  // namespace

Eigen::MatrixXd GpModel::scale_points(const Eigen::MatrixXd& pts) const {
  if (pts.cols() != inputs_raw_.cols())
    throw InvalidInputError("GpModel: point dimension mismatch");
  Eigen::MatrixXd out = pts;
  out.rowwise() -= in_shift_.transpose();
  out.array().rowwise() /= in_span_.transpose().array();
  return out;
}

void GpModel::factorize() {
  const Eigen::Index n = inputs_s_.rows();
  Eigen::MatrixXd k = kernel_.symmetric(inputs_s_);
  k.diagonal() += noise_s_;
  double jitter = kBaseJitter * kernel_.variance;
  for (int attempt = 0;; ++attempt) {
    Eigen::MatrixXd work = k;
    work.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      chol_ = llt.matrixL();
      alpha_ = llt.solve(f_s_);
      return;
    }
    jitter *= 10.0;
    if (attempt >= 5) break;
  }
  // name the closest pair of inputs in the failure message
  Eigen::Index bi = 0, bj = 1;
  double best = INFINITY;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double d = (inputs_s_.row(i) - inputs_s_.row(j)).norm();
      if (d < best) {
        best = d;
        bi = i;
        bj = j;
      }
    }
  std::ostringstream msg;
  msg << "GpModel: covariance ill-conditioned after jitter escalation; "
      << "closest inputs are rows " << bi << " and " << bj
      << " (scaled distance " << best << ")";
  throw IllConditionedError(msg.str());
}

GpModel GpModel::with_hyperparameters(const Eigen::MatrixXd& inputs,
                                      const Eigen::VectorXd& outputs,
                                      const Eigen::VectorXd& noise_vars,
                                      const Kernel& kernel) {
  if (inputs.rows() != outputs.size())
    throw InvalidInputError("GpModel: inputs/outputs size mismatch");
  GpModel m;
  m.inputs_raw_ = inputs;
  m.outputs_raw_ = outputs;
  m.noise_raw_ = noise_vars.size() ? noise_vars
                                   : Eigen::VectorXd::Zero(inputs.rows());
  m.in_shift_ = Eigen::VectorXd::Zero(inputs.cols());
  m.in_span_ = Eigen::VectorXd::Ones(inputs.cols());
  m.out_mean_ = 0.0;
  m.out_scale_ = 1.0;
  m.kernel_ = kernel;
  m.inputs_s_ = inputs;
  m.f_s_ = outputs;
  m.noise_s_ = m.noise_raw_;
  m.factorize();
  return m;
}

GpModel GpModel::fit(const Eigen::MatrixXd& inputs,
                     const Eigen::VectorXd& outputs,
                     const Eigen::VectorXd& noise_vars, KernelFamily family,
                     const FitConfig& cfg) {
  const Eigen::Index n = inputs.rows();
  const Eigen::Index d = inputs.cols();
  if (n < 2) throw InvalidInputError("GpModel::fit: need at least 2 points");
  if (outputs.size() != n)
    throw InvalidInputError("GpModel::fit: inputs/outputs size mismatch");
  const bool estimate_noise = noise_vars.size() == 0;
  if (!estimate_noise && noise_vars.size() != n)
    throw InvalidInputError("GpModel::fit: noise_vars size mismatch");

  GpModel m;
  m.inputs_raw_ = inputs;
  m.outputs_raw_ = outputs;
  m.noise_raw_ =
      estimate_noise ? Eigen::VectorXd::Zero(n) : noise_vars;
  m.in_shift_ = inputs.colwise().minCoeff();
  Eigen::VectorXd span =
      inputs.colwise().maxCoeff().transpose() - m.in_shift_;
  for (Eigen::Index k = 0; k < d; ++k)
    if (span(k) < 1e-12) span(k) = 1.0;
  m.in_span_ = span;
  m.inputs_s_ = inputs;
  m.inputs_s_.rowwise() -= m.in_shift_.transpose();
  m.inputs_s_.array().rowwise() /= m.in_span_.transpose().array();

  m.out_mean_ = outputs.mean();
  double sd = std::sqrt(
      (outputs.array() - m.out_mean_).square().sum() / std::max<double>(n - 1, 1));
  m.out_scale_ = (sd > 1e-12) ? sd : 1.0;
  m.f_s_ = (outputs.array() - m.out_mean_) / m.out_scale_;
  const double s2 = m.out_scale_ * m.out_scale_;
  Eigen::VectorXd noise_s = m.noise_raw_ / s2;

  const int npar = static_cast<int>(d) + 1 + (estimate_noise ? 1 : 0);

  auto unpack = [&](const Eigen::VectorXd& theta, Kernel* k, double* tau2,
                    double* pen) {
    *pen = 0.0;
    k->family = family;
    k->lengthscales.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      double v = theta(i);
      clamp_pen(v, kLogLenLo, kLogLenHi, pen);
      k->lengthscales(i) = std::exp(v);
    }
    double lv = theta(d);
    clamp_pen(lv, kLogVarLo, kLogVarHi, pen);
    k->variance = std::exp(lv);
    if (estimate_noise) {
      double lt = theta(d + 1);
      clamp_pen(lt, kLogNoiseLo, kLogNoiseHi, pen);
      *tau2 = std::exp(lt);
    } else {
      *tau2 = 0.0;
    }
  };

  auto nll = [&](const Eigen::VectorXd& theta) -> double {
    Kernel k;
    double tau2, pen;
    unpack(theta, &k, &tau2, &pen);
    Eigen::MatrixXd kk = k.symmetric(m.inputs_s_);
    kk.diagonal() += noise_s;
    kk.diagonal().array() += tau2 + kBaseJitter * k.variance;
    Eigen::LLT<Eigen::MatrixXd> llt(kk);
    if (llt.info() != Eigen::Success) return 1e50;
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      logdet += std::log(llt.matrixL()(i, i));
    Eigen::VectorXd a = llt.solve(m.f_s_);
    double v = 0.5 * m.f_s_.dot(a) + logdet + 0.5 * n * std::log(2 * M_PI);
    return std::isfinite(v) ? v + pen : 1e50;
  };

  // multistart: a default start, the warm start if given, and random draws
  std::vector<Eigen::VectorXd> starts;
  {
    Eigen::VectorXd t(npar);
    t.head(d).setConstant(std::log(0.5));
    t(d) = 0.0;
    if (estimate_noise) t(d + 1) = std::log(1e-4);
    starts.push_back(t);
  }
  if (cfg.warm_start) {
    Eigen::VectorXd t(npar);
    for (Eigen::Index i = 0; i < d; ++i)
      t(i) = std::log(std::max(cfg.warm_start->lengthscales(i), 1e-8));
    t(d) = std::log(std::max(cfg.warm_start->variance, 1e-12));
    if (estimate_noise) t(d + 1) = std::log(1e-4);
    starts.push_back(t);
  }
  Rng rng(derive_seed(cfg.seed, 0xf17));
  while (static_cast<int>(starts.size()) < std::max(cfg.restarts, 1)) {
    Eigen::VectorXd t(npar);
    for (Eigen::Index i = 0; i < d; ++i)
      t(i) = std::log(0.05) + rng.uniform() * (std::log(2.0) - std::log(0.05));
    t(d) = std::log(0.2) + rng.uniform() * (std::log(5.0) - std::log(0.2));
    if (estimate_noise)
      t(d + 1) =
          std::log(1e-6) + rng.uniform() * (std::log(0.5) - std::log(1e-6));
    starts.push_back(t);
  }

  double best_val = INFINITY;
  Eigen::VectorXd best_theta = starts[0];
  for (const auto& s : starts) {
    double v;
    Eigen::VectorXd t = detail::nelder_mead(nll, s, 0.4, cfg.max_iters, &v);
    if (v < best_val) {
      best_val = v;
      best_theta = t;
    }
  }

  double tau2, pen;
  unpack(best_theta, &m.kernel_, &tau2, &pen);
  m.noise_s_ = noise_s;
  m.noise_s_.array() += tau2;
  m.est_noise_raw_ = tau2 * s2;
  m.factorize();
  return m;
}

void GpModel::predict(const Eigen::MatrixXd& points, Eigen::VectorXd& mean,
                      Eigen::VectorXd& variance) const {
  Eigen::MatrixXd pts = scale_points(points);
  Eigen::MatrixXd ks = kernel_.cross(pts, inputs_s_);  // m x n
  mean = (ks * alpha_).array() * out_scale_ + out_mean_;
  Eigen::MatrixXd v =
      chol_.triangularView<Eigen::Lower>().solve(ks.transpose());  // n x m
  variance = (kernel_.variance - v.colwise().squaredNorm().transpose().array())
                 .cwiseMax(0.0) *
             (out_scale_ * out_scale_);
}

Eigen::MatrixXd GpModel::predict_cov(const Eigen::MatrixXd& points_a,
                                     const Eigen::MatrixXd& points_b) const {
  Eigen::MatrixXd a = scale_points(points_a);
  Eigen::MatrixXd b = scale_points(points_b);
  Eigen::MatrixXd ka =
      chol_.triangularView<Eigen::Lower>().solve(kernel_.cross(inputs_s_, a));
  Eigen::MatrixXd kb =
      chol_.triangularView<Eigen::Lower>().solve(kernel_.cross(inputs_s_, b));
  Eigen::MatrixXd out = kernel_.cross(a, b) - ka.transpose() * kb;
  return out * (out_scale_ * out_scale_);
}

double GpModel::log_marginal_likelihood() const {
  const Eigen::Index n = f_s_.size();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(chol_(i, i));
  double lml_std =
      -0.5 * f_s_.dot(alpha_) - logdet - 0.5 * n * std::log(2 * M_PI);
  return lml_std - n * std::log(out_scale_);
}

nlohmann::json GpModel::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  auto mat = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> v(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      v[i].assign(m.row(i).begin(), m.row(i).end());
    return v;
  };
  auto vec = [](const Eigen::VectorXd& x) {
    return std::vector<double>(x.begin(), x.end());
  };
  j["inputs"] = mat(inputs_raw_);
  j["outputs"] = vec(outputs_raw_);
  j["noise_vars"] = vec(noise_raw_);
  j["kernel"] = {{"family", to_string(kernel_.family)},
                 {"lengthscales", vec(kernel_.lengthscales)},
                 {"variance", kernel_.variance}};
  j["in_shift"] = vec(in_shift_);
  j["in_span"] = vec(in_span_);
  j["out_mean"] = out_mean_;
  j["out_scale"] = out_scale_;
  j["estimated_noise_var"] = est_noise_raw_;
  return j;
}

GpModel GpModel::from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw InvalidInputError("GpModel: unknown serialization version");
  GpModel m;
  auto mat = [](const nlohmann::json& v) {
    Eigen::MatrixXd out(v.size(), v.empty() ? 0 : v[0].size());
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index k = 0; k < out.cols(); ++k)
        out(i, k) = v[i][k].get<double>();
    return out;
  };
  auto vec = [](const nlohmann::json& v) {
    Eigen::VectorXd out(v.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = v[i].get<double>();
    return out;
  };
  m.inputs_raw_ = mat(j.at("inputs"));
  m.outputs_raw_ = vec(j.at("outputs"));
  m.noise_raw_ = vec(j.at("noise_vars"));
  m.kernel_.family = kernel_family_from_string(j.at("kernel").at("family"));
  m.kernel_.lengthscales = vec(j.at("kernel").at("lengthscales"));
  m.kernel_.variance = j.at("kernel").at("variance").get<double>();
  m.in_shift_ = vec(j.at("in_shift"));
  m.in_span_ = vec(j.at("in_span"));
  m.out_mean_ = j.at("out_mean").get<double>();
  m.out_scale_ = j.at("out_scale").get<double>();
  m.est_noise_raw_ = j.at("estimated_noise_var").get<double>();
  m.inputs_s_ = m.inputs_raw_;
  m.inputs_s_.rowwise() -= m.in_shift_.transpose();
  m.inputs_s_.array().rowwise() /= m.in_span_.transpose().array();
  m.f_s_ = (m.outputs_raw_.array() - m.out_mean_) / m.out_scale_;
  m.noise_s_ = m.noise_raw_ / (m.out_scale_ * m.out_scale_);
  m.noise_s_.array() += m.est_noise_raw_ / (m.out_scale_ * m.out_scale_);
  m.factorize();
  return m;
}

GaussianSpec observation_dist(const MultiGp& multi, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& obs_noise_vars) {
  const int p = multi.objectives();
  if (obs_noise_vars.size() != p)
    throw InvalidInputError("observation_dist: noise vector size mismatch");
  Eigen::VectorXd mean(p);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd pt = x.transpose();
  for (int i = 0; i < p; ++i) {
    Eigen::VectorXd mu, var;
    multi.models[i].predict(pt, mu, var);
    mean(i) = mu(0);
    cov(i, i) = var(0) + obs_noise_vars(i);
  }
  return {mean, cov};
}

PathEnsemble simulate_paths(const MultiGp& multi,
                            const Eigen::MatrixXd& sim_coords, int num_draws,
                            std::uint64_t seed, int max_sim) {
  const int ns = static_cast<int>(sim_coords.rows());
  if (ns > max_sim)
    throw NumericalError(
        "simulate_paths: simulation subset too large to factorize; reduce "
        "N_sim");
  if (num_draws <= 0)
    throw InvalidInputError("simulate_paths: need a positive draw count");
  PathEnsemble e;
  e.sim_coords = sim_coords;
  e.seed = seed;
  const int p = multi.objectives();
  e.draws.resize(p);
  e.cov_factor.resize(p);
  e.post_mean.resize(p);
  for (int i = 0; i < p; ++i) {
    const GpModel& m = multi.models[i];
    Eigen::VectorXd mu, var;
    m.predict(sim_coords, mu, var);
    Eigen::MatrixXd cov = m.predict_cov(sim_coords, sim_coords);
    Eigen::MatrixXd factor = psd_factor(cov);
    Rng rng(derive_seed(seed, 0x51u + i));
    Eigen::MatrixXd z(num_draws, factor.cols());
    for (int r = 0; r < num_draws; ++r)
      for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = rng.normal();
    e.draws[i] = z * factor.transpose();
    e.draws[i].rowwise() += mu.transpose();
    e.cov_factor[i] = std::move(factor);
    e.post_mean[i] = std::move(mu);
  }
  return e;
}

FoxyOperator make_foxy_operator(const PathEnsemble& ensemble,
                                const MultiGp& multi, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& obs_noise_vars,
                                std::uint64_t noise_seed) {
  const int p = ensemble.num_objectives();
  const int m_draws = ensemble.num_draws();
  const int ns = ensemble.num_points();
  if (multi.objectives() != p)
    throw InvalidInputError("foxy: objective count mismatch");
  FoxyOperator op;
  op.lambda.resize(p);
  op.value_at_x.resize(p);
  op.mu_x.resize(p);
  op.obs_var.resize(p);

  // locate x among the simulation points
  int pos = -1;
  for (int j = 0; j < ns; ++j) {
    if ((ensemble.sim_coords.row(j).transpose() - x).cwiseAbs().maxCoeff() <
        1e-12) {
      pos = j;
      break;
    }
  }

  bool any_live = false;
  Eigen::MatrixXd pt = x.transpose();
  for (int i = 0; i < p; ++i) {
    const GpModel& model = multi.models[i];
    Eigen::VectorXd mu, var;
    model.predict(pt, mu, var);
    const double tau2 = obs_noise_vars(i);
    const double s = var(0) + tau2;
    op.mu_x(i) = mu(0);
    op.obs_var(i) = s;
    // threshold sits above the jitter floor of the factorization
    const double degenerate_thr = 1e-12 + 1e-8 * model.prior_variance();
    if (s < degenerate_thr) {
      op.lambda[i] = Eigen::VectorXd::Zero(ns);
      op.value_at_x[i] = Eigen::VectorXd::Constant(m_draws, mu(0));
      continue;
    }
    any_live = true;
    Eigen::VectorXd kvec = model.predict_cov(ensemble.sim_coords, pt).col(0);
    op.lambda[i] = kvec / s;

    Eigen::VectorXd vx(m_draws);
    if (pos >= 0) {
      vx = ensemble.draws[i].col(pos);
    } else {
      // extend each path to x by conditional simulation on its sim values
      if (ensemble.cov_factor[i].size() == 0)
        throw NumericalError(
            "foxy: ensemble lacks covariance factors for off-grid update");
      const Eigen::MatrixXd& f = ensemble.cov_factor[i];
      Eigen::MatrixXd cov = f * f.transpose();
      cov.diagonal().array() += 1e-10 * (cov.trace() / ns + 1e-300);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
      Eigen::VectorXd w = ldlt.solve(kvec);
      double cvar = std::max(var(0) - kvec.dot(w), 0.0);
      Rng rng(derive_seed(ensemble.seed ^ noise_seed, 0xe7u + i));
      for (int j = 0; j < m_draws; ++j) {
        double cmean =
            mu(0) + w.dot(ensemble.draws[i].row(j).transpose() -
                          ensemble.post_mean[i]);
        vx(j) = cmean + std::sqrt(cvar) * rng.normal();
      }
    }
    if (tau2 > 0.0) {
      // simulated observation noise keeps the updated covariance exact
      Rng rng(derive_seed(noise_seed, 0xa3u + i));
      for (int j = 0; j < m_draws; ++j)
        vx(j) += std::sqrt(tau2) * rng.normal();
    }
    op.value_at_x[i] = std::move(vx);
  }
  op.degenerate_all = !any_live;
  return op;
}

void foxy_apply_draws(const FoxyOperator& op, const PathEnsemble& base,
                      const Eigen::VectorXd& f_new,
                      std::vector<Eigen::MatrixXd>& draws) {
  const int p = base.num_objectives();
  const int m_draws = base.num_draws();
  draws.resize(p);
  for (int i = 0; i < p; ++i) {
    draws[i] = base.draws[i];
    for (int j = 0; j < m_draws; ++j) {
      const double resid = f_new(i) - op.value_at_x[i](j);
      draws[i].row(j) += resid * op.lambda[i].transpose();
    }
  }
}

PathEnsemble foxy_update(const PathEnsemble& ensemble, const MultiGp& multi,
                         const Eigen::VectorXd& x_new,
                         const Eigen::VectorXd& f_new,
                         const Eigen::VectorXd& obs_noise_vars,
                         std::uint64_t noise_seed) {
  FoxyOperator op =
      make_foxy_operator(ensemble, multi, x_new, obs_noise_vars, noise_seed);
  if (op.degenerate_all)
    throw DegenerateUpdateError(
        "foxy_update: point already known (posterior variance ~ 0 and no "
        "noise)");
  const int p = ensemble.num_objectives();
  const int m_draws = ensemble.num_draws();
  PathEnsemble out = ensemble;
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < m_draws; ++j) {
      const double resid = f_new(i) - op.value_at_x[i](j);
      out.draws[i].row(j) += resid * op.lambda[i].transpose();
    }
    if (op.obs_var(i) >= 1e-12) {
      out.post_mean[i] +=
          (f_new(i) - op.mu_x(i)) * op.lambda[i];
      const Eigen::MatrixXd& f = ensemble.cov_factor[i];
      if (f.size() != 0) {
        Eigen::MatrixXd cov = f * f.transpose() -
                              op.obs_var(i) * op.lambda[i] *
                                  op.lambda[i].transpose();
        out.cov_factor[i] = psd_factor(cov);
      }
    }
  }
  return out;
}

}  // namespace gpnash
