#include "mcgp/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mcgp/errors.hpp"
#include "mcgp/prior_sim.hpp"

namespace mcgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct SampleMoments {
  double mean = 0.0;
  double var = 0.0;
};

SampleMoments moments(const std::vector<double>& xs) {
  SampleMoments m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(xs.size());
  return m;
}

double covariance(const std::vector<double>& a, const std::vector<double>& b, double ma, double mb) {
  double c = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - ma) * (b[i] - mb);
  return a.empty() ? 0.0 : c / static_cast<double>(a.size());
}

}  // namespace

ConditionalData ChainState::conditional_data(const Model& model) const {
  ConditionalData d;
  d.observations = observations;
  d.rejected = rejected;
  d.rejected_in_marginal = !model.constrained();
  return d;
}

std::vector<std::size_t> ChainState::rejected_counts() const {
  std::vector<std::size_t> counts(observations.size(), 0);
  for (std::size_t owner : rejected_owner) ++counts[owner];
  return counts;
}

double median_pairwise_distance(std::span<const Point> points, const KernelParams& kernel) {
  std::vector<double> d;
  d.reserve(points.size() * (points.size() - (points.empty() ? 0 : 1)) / 2);
  std::vector<Eigen::VectorXd> locs;
  locs.reserve(points.size());
  for (const auto& p : points) locs.push_back(concat(p));
  for (std::size_t i = 0; i < locs.size(); ++i) {
    for (std::size_t j = i + 1; j < locs.size(); ++j) {
      d.push_back(std::sqrt(scaled_sq_distance(locs[i], locs[j], kernel)));
    }
  }
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

ChainState initialize_chain(const Model& model, std::vector<Point> observations,
                            const SamplerSettings& settings) {
  model.validate();
  if (observations.empty()) throw DataError("no observations to fit");
  ChainState state;
  state.observations = std::move(observations);
  const auto& obs = state.observations;
  const double n = static_cast<double>(obs.size());

  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].xa.size() != model.dim_a() || obs[i].xac.size() != model.dim_ac) {
      throw DataError("observation " + std::to_string(i) + " has the wrong dimension");
    }
    if (!in_support(model.constraint, obs[i].xa)) {
      throw DataError("observation " + std::to_string(i) + " lies outside the " +
                      family_name(model.constraint.family) + " support");
    }
  }

  std::vector<Eigen::VectorXd> xa;
  xa.reserve(obs.size());
  for (const auto& p : obs) xa.push_back(p.xa);
  Phi phi = moment_match_phi(model.constraint, xa);

  std::vector<double> x1;
  std::vector<double> x2;
  for (const auto& p : obs) {
    x1.push_back(model.constraint.family == Family::Lognormal ? std::log(p.xa[0]) : p.xa[0]);
    x2.push_back(p.xac[0]);
  }
  const SampleMoments m1 = moments(x1);
  const SampleMoments m2 = moments(x2);
  CenteringParams theta;
  theta.mu2 = m2.mean;
  theta.sigma2_sq = m2.var > 1e-12 ? m2.var : 1.0;
  const double cov = covariance(x1, x2, m1.mean, m2.mean);
  double rho = 0.0;
  if (m1.var > 1e-12 && m2.var > 1e-12) {
    rho = model.centering.kind == CenteringKind::SharedVariance ? cov / m1.var
                                                                : cov / std::sqrt(m1.var * m2.var);
  }
  theta.rho = model.centering.updates_rho() ? std::clamp(rho, -0.95, 0.95) : 0.0;
  if (model.centering.kind == CenteringKind::SharedVariance) theta.sigma2_sq = phi[1];
  state.params = Parameters{theta, phi};

  Eigen::MatrixXd locs = locations(obs);
  Eigen::VectorXd values = Eigen::VectorXd::Constant(locs.cols(), model.gp_mean);
  state.gp = GpRealization::from_values(locs, values, model.kernel, model.gp_mean);

  // Random-walk scales start near the posterior spread implied by n points.
  const double root_n = std::sqrt(std::max(n, 1.0));
  auto& th = state.adaptation.theta.scales;
  th[0] = AdaptiveScale(2.0 / root_n);
  th[1] = AdaptiveScale(2.0 * std::sqrt(theta.sigma2_sq) / root_n);
  th[2] = AdaptiveScale(2.0 * std::sqrt(2.0) / root_n);
  auto& ph = state.adaptation.phi.scales;
  if (model.constraint.family == Family::Exponential) {
    ph[0] = AdaptiveScale(2.0 / root_n);
  } else {
    ph[0] = AdaptiveScale(2.0 * std::sqrt(phi[1]) / root_n);
    ph[1] = AdaptiveScale(2.0 * std::sqrt(2.0) / root_n);
  }
  state.adaptation.hmc_step = AdaptiveScale(settings.hmc.step_size, settings.hmc.target_accept);
  return state;
}

void resample_rejections(ChainState& state, const Model& model, RandomStream& rng) {
  const std::size_t n = state.n_obs();
  std::vector<Eigen::VectorXd> fixed;
  if (model.constrained()) {
    fixed.reserve(n);
    for (const auto& p : state.observations) fixed.push_back(p.xa);
  }
  RoundsResult rr = run_rejection_rounds(model, state.params, fixed, n, state.gp, rng);

  std::vector<Eigen::Index> keep;
  keep.reserve(n + rr.rejected.size());
  for (std::size_t i = 0; i < n; ++i) keep.push_back(static_cast<Eigen::Index>(i));
  if (!model.lambda_hook) {
    for (Eigen::Index idx : rr.rejected_index) keep.push_back(idx);
  }
  state.gp = state.gp.restrict(keep);
  state.rejected = std::move(rr.rejected);
  state.rejected_owner = std::move(rr.rejected_owner);
}

namespace {

double bernoulli_loglik(const Eigen::Ref<const Eigen::VectorXd>& f, Eigen::Index n_obs) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    total += i < n_obs ? log_sigmoid(f[i]) : log_sigmoid(-f[i]);
  }
  return total;
}

}  // namespace

double lambda_log_likelihood(const ChainState& state) {
  return bernoulli_loglik(state.gp.values(), static_cast<Eigen::Index>(state.n_obs()));
}

void update_lambda(ChainState& state, RandomStream& rng, int steps) {
  GpRealization& gp = state.gp;
  const Eigen::Index m = gp.size();
  if (m == 0) return;
  const auto n_obs = static_cast<Eigen::Index>(state.n_obs());
  const double mu = gp.mean_const();
  Eigen::VectorXd w = gp.whitened();
  Eigen::VectorXd z(m);
  Eigen::VectorXd w_prop(m);
  Eigen::VectorXd f_prop(m);

  for (int s = 0; s < steps; ++s) {
    for (Eigen::Index i = 0; i < m; ++i) z[i] = rng.normal();
    const double log_y = bernoulli_loglik(gp.values(), n_obs) + std::log(rng.uniform());
    double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double lo = angle - 2.0 * std::numbers::pi;
    double hi = angle;
    while (true) {
      w_prop = w * std::cos(angle) + z * std::sin(angle);
      f_prop.noalias() = gp.factor().triangularView<Eigen::Lower>() * w_prop;
      f_prop.array() += mu;
      if (bernoulli_loglik(f_prop, n_obs) > log_y) break;
      if (angle < 0.0) {
        lo = angle;
      } else {
        hi = angle;
      }
      angle = rng.uniform(lo, hi);
      // The bracket always contains 0 (the current state), so this terminates.
      if (hi - lo < 1e-12) {
        w_prop = w;
        break;
      }
    }
    w = w_prop;
    gp.set_whitened(w);
  }
}

double lengthscale_log_target(const ChainState& state, const LengthscalePrior& prior, double log_l) {
  KernelParams k = state.gp.kernel();
  k.lengthscale = std::exp(log_l);
  const double d = (log_l - prior.log_location) / prior.log_scale;
  const double log_prior = -0.5 * d * d - std::log(prior.log_scale) - 0.5 * std::log(2.0 * std::numbers::pi);
  return log_prior + gp_logpdf_lengthscale_gradient(state.gp.points(), state.gp.values(),
                                                    state.gp.mean_const(), k)
                         .value;
}

HmcStepInfo update_lengthscale(ChainState& state, const LengthscalePrior& prior,
                               const HmcSettings& hmc, AdaptiveScale& step, bool adapt,
                               RandomStream& rng) {
  HmcStepInfo info;
  if (state.gp.empty()) return info;
  const LengthscaleObjective objective(state.gp.points(), state.gp.values(), state.gp.mean_const(),
                                       state.gp.kernel());
  const double s2 = prior.log_scale * prior.log_scale;
  Eigen::MatrixXd probes;

  // Potential energy U(u) = -log target and its derivative.
  auto potential = [&](double u, double& grad) {
    const LogDensityGradient g =
        probes.size() > 0 ? objective.gradient(u, probes) : objective.gradient(u);
    const double d = u - prior.log_location;
    grad = d / s2 - g.d_log_lengthscale;
    return 0.5 * d * d / s2 - g.value;
  };

  const double eps = step.scale();
  const double u0 = std::log(state.gp.kernel().lengthscale);
  const double p0 = rng.normal();
  if (hmc.trace_probes > 0) {
    probes.resize(objective.size(), hmc.trace_probes);
    for (Eigen::Index i = 0; i < probes.size(); ++i) {
      probes.data()[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
  }
  double u = u0;
  double p = p0;
  double grad = 0.0;
  double h0 = 0.0;
  double u_new = 0.0;
  try {
    h0 = potential(u, grad) + 0.5 * p0 * p0;
    p -= 0.5 * eps * grad;
    for (int l = 0; l < hmc.leapfrog_steps; ++l) {
      u += eps * p;
      const double pot = potential(u, grad);
      if (l + 1 < hmc.leapfrog_steps) {
        p -= eps * grad;
      } else {
        p -= 0.5 * eps * grad;
        u_new = pot;
      }
      if (!std::isfinite(pot) || !std::isfinite(grad)) throw NumericError("non-finite energy");
    }
  } catch (const NumericError&) {
    info.aborted = true;
    step.record(0.0, false, adapt);
    return info;
  }
  const double h1 = u_new + 0.5 * p * p;
  const double delta = h1 - h0;
  info.abs_delta_h = std::abs(delta);
  info.acceptance_probability = std::isfinite(delta) ? std::min(1.0, std::exp(-delta)) : 0.0;
  info.accepted = std::isfinite(delta) && std::log(rng.uniform()) < -delta;
  step.record(info.acceptance_probability, info.accepted, adapt);
  if (info.accepted) {
    KernelParams k = state.gp.kernel();
    k.lengthscale = std::exp(u);
    try {
      state.gp.set_kernel(k);
    } catch (const NumericError&) {
      info.accepted = false;
      info.aborted = true;
      k.lengthscale = std::exp(u0);
      state.gp.set_kernel(k);
    }
  }
  return info;
}

void gibbs_sweep(ChainState& state, const Model& model, const SamplerSettings& settings, bool adapt,
                 RandomStream& rng) {
  RandomStream rej_rng = rng.derive("rejections");
  resample_rejections(state, model, rej_rng);

  const bool hooked = static_cast<bool>(model.lambda_hook);
  if (!hooked) {
    RandomStream lambda_rng = rng.derive("lambda");
    update_lambda(state, lambda_rng, settings.ess_steps);
  }

  const ConditionalData data = state.conditional_data(model);
  UpdateOptions phi_opts;
  phi_opts.adapt = adapt;
  phi_opts.force_metropolis = settings.force_metropolis_phi;
  RandomStream phi_rng = rng.derive("phi");
  update_phi(model.constraint, state.params.phi, model.centering, state.params.theta, data,
             state.adaptation.phi, phi_rng, phi_opts);

  UpdateOptions theta_opts;
  theta_opts.adapt = adapt;
  theta_opts.accept_all = settings.accept_all_theta;
  RandomStream theta_rng = rng.derive("theta");
  update_theta(model.centering, model.constraint, state.params.theta, state.params.phi, data,
               state.adaptation.theta, theta_rng, theta_opts);

  if (!hooked && settings.update_lengthscale) {
    RandomStream l_rng = rng.derive("lengthscale");
    const HmcStepInfo info = update_lengthscale(state, settings.lengthscale_prior, settings.hmc,
                                                state.adaptation.hmc_step, adapt, l_rng);
    if (!info.aborted) {
      ++state.adaptation.hmc_steps;
      if (info.accepted) ++state.adaptation.hmc_accepted;
      state.adaptation.hmc_abs_delta_h += info.abs_delta_h;
    }
  }
  ++state.sweep;
}

RandomStream sweep_stream(const RandomStream& root, std::size_t sweep) {
  return root.derive("sweep").derive(static_cast<std::uint64_t>(sweep));
}

void ChainConfig::validate() const {
  if (!(iterations > burn_in)) throw ConfigError("iterations must exceed burn_in");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  if (eval_thin < 1) throw ConfigError("eval_thin must be at least 1");
}

PosteriorSample snapshot(const ChainState& state, const Model& model) {
  PosteriorSample s;
  s.sweep = state.sweep;
  s.params = state.params;
  s.kernel = state.gp.kernel();
  s.gp_mean = model.gp_mean;
  s.points = state.gp.points();
  s.values = state.gp.values();
  return s;
}

std::vector<double> Trace::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ConfigError("trace has no column '" + name + "'");
  const auto j = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

std::vector<std::string> trace_columns(const Model& model) {
  std::vector<std::string> cols = {"sweep", "rho", "mu2", "sigma2_sq"};
  if (model.constraint.family == Family::Exponential) {
    cols.emplace_back("phi_rate");
  } else {
    cols.emplace_back("phi_mean");
    cols.emplace_back("phi_var");
  }
  for (const char* c : {"lengthscale", "n_rejected", "log_prior_theta", "log_prior_phi",
                        "log_lik_lambda", "log_gp"}) {
    cols.emplace_back(c);
  }
  return cols;
}

std::vector<double> trace_row(const ChainState& state, const Model& model) {
  const auto& th = state.params.theta;
  std::vector<double> row = {static_cast<double>(state.sweep), th.rho, th.mu2, th.sigma2_sq};
  for (Eigen::Index j = 0; j < state.params.phi.size(); ++j) row.push_back(state.params.phi[j]);
  row.push_back(state.lengthscale());
  row.push_back(static_cast<double>(state.rejected.size()));
  row.push_back(theta_log_prior(model.centering, th));
  row.push_back(phi_log_prior(model.constraint, state.params.phi));
  if (model.lambda_hook || state.gp.empty()) {
    row.push_back(0.0);
    row.push_back(0.0);
  } else {
    row.push_back(lambda_log_likelihood(state));
    row.push_back(state.gp.singular() ? kNegInf : state.gp.log_density());
  }
  return row;
}

ChainResult run_chain(ChainState& state, const Model& model, const SamplerSettings& settings,
                      const ChainConfig& config, std::uint64_t seed,
                      const std::function<void(const ChainState&)>& observer) {
  config.validate();
  ChainResult out;
  out.trace.columns = trace_columns(model);
  out.trace.burn_in = config.burn_in;
  out.trace.thin = config.thin;
  out.trace.seed = seed;
  const RandomStream root = RandomStream(seed).derive("fit");
  const bool probes = config.probes.cols() > 0;

  while (state.sweep < config.iterations) {
    const std::size_t s = state.sweep;
    const bool adapt = s < config.burn_in;
    RandomStream rng = sweep_stream(root, s);
    gibbs_sweep(state, model, settings, adapt, rng);
    if (s >= config.burn_in && (s - config.burn_in) % config.thin == 0) {
      out.trace.rows.push_back(trace_row(state, model));
      if (probes) {
        Eigen::VectorXd pv(config.probes.cols());
        if (model.lambda_hook) {
          for (Eigen::Index j = 0; j < pv.size(); ++j) pv[j] = model.lambda_hook(config.probes.col(j));
        } else {
          pv = state.gp.conditional_mean(config.probes);
        }
        out.trace.probe_values.push_back(std::move(pv));
      }
      const std::size_t retained = (s - config.burn_in) / config.thin;
      if (retained % config.eval_thin == 0) out.samples.push_back(snapshot(state, model));
    }
    if (observer) observer(state);
  }
  return out;
}

}  // namespace mcgp
