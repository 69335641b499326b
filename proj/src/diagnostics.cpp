#include "mcgp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcgp/errors.hpp"
#include "mcgp/prior_sim.hpp"

namespace mcgp {

double ess(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 10) throw ConfigError("ess needs at least 10 values");
  double mean = 0.0;
  for (double x : chain) {
    if (!std::isfinite(x)) throw NumericError("ess: non-finite value in chain");
    mean += x;
  }
  mean /= static_cast<double>(n);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = chain[i] - mean;

  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += c[i] * c[i + lag];
    return s / static_cast<double>(n);
  };
  const double gamma0 = autocov(0);
  if (!(gamma0 > 1e-300 * std::max(1.0, mean * mean))) throw NumericError("degenerate chain");

  // Sum of consecutive pairs Gamma_k = gamma_{2k} + gamma_{2k+1} while positive,
  // forced to be non-increasing.
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double g = (k == 0 ? gamma0 : autocov(2 * k)) + autocov(2 * k + 1);
    if (!(g > 0.0)) break;
    const double pair = std::min(g, prev);
    sum += pair;
    prev = pair;
  }
  const double tau = std::max((-gamma0 + 2.0 * sum) / gamma0, 1e-12);
  return std::min(static_cast<double>(n) / tau, static_cast<double>(n));
}

EssReport ess_report(const std::vector<std::vector<double>>& chains, std::size_t midpoint_index) {
  if (chains.empty()) throw ConfigError("ess_report needs at least one chain");
  if (midpoint_index >= chains.size()) throw ConfigError("ess_report: midpoint index out of range");
  EssReport r;
  r.iterations = chains.front().size();
  for (const auto& ch : chains) {
    if (ch.size() != r.iterations) throw ConfigError("ess_report: chains differ in length");
    r.values.push_back(ess(ch));
  }
  const auto mn = std::min_element(r.values.begin(), r.values.end());
  const auto mx = std::max_element(r.values.begin(), r.values.end());
  r.argmin = static_cast<std::size_t>(mn - r.values.begin());
  r.argmax = static_cast<std::size_t>(mx - r.values.begin());
  r.min = *mn;
  r.max = *mx;
  r.midpoint_index = midpoint_index;
  r.midpoint = r.values[midpoint_index];
  return r;
}

double GewekeResult::max_abs_z() const {
  double m = 0.0;
  for (const auto& s : statistics) m = std::max(m, std::abs(s.z));
  return m;
}

std::vector<std::string> geweke_statistic_names(const Model& model) {
  std::vector<std::string> names = {"rho", "mu2", "sigma2_sq"};
  if (model.constraint.family == Family::Exponential) {
    names.emplace_back("phi_rate");
  } else {
    names.emplace_back("phi_mean");
    names.emplace_back("phi_var");
  }
  names.emplace_back("sigmoid_lambda_probe");
  names.emplace_back("total_rejected");
  return names;
}

namespace {

std::vector<double> statistics_of(const Parameters& p, double probe_sigmoid, std::size_t n_rejected) {
  std::vector<double> s = {p.theta.rho, p.theta.mu2, p.theta.sigma2_sq};
  for (Eigen::Index j = 0; j < p.phi.size(); ++j) s.push_back(p.phi[j]);
  s.push_back(probe_sigmoid);
  s.push_back(static_cast<double>(n_rejected));
  return s;
}

double probe_value(const Model& model, const GpRealization& gp, const Eigen::VectorXd& probe,
                   RandomStream& rng) {
  if (model.lambda_hook) return sigmoid(model.lambda_hook(probe));
  GpRealization copy = gp;
  return sigmoid(copy.extend(probe, rng)[0]);
}

// State whose GP keeps exactly the accepted points (first) and the rejected ones.
ChainState state_from_simulation(SimulationResult&& sim, const Model& model) {
  ChainState st;
  st.params = sim.params;
  std::vector<Eigen::Index> keep;
  if (!model.lambda_hook) {
    keep.insert(keep.end(), sim.accepted_index.begin(), sim.accepted_index.end());
    keep.insert(keep.end(), sim.rejected_index.begin(), sim.rejected_index.end());
  }
  st.gp = sim.gp.restrict(keep);
  st.observations = std::move(sim.accepted);
  st.rejected = std::move(sim.rejected);
  st.rejected_owner = std::move(sim.rejected_owner);
  return st;
}

}  // namespace

GewekeResult geweke_test(const Model& model, const SamplerSettings& settings,
                         const GewekeSettings& geweke, std::uint64_t seed) {
  model.validate();
  if (geweke.n_samples < 10) throw ConfigError("geweke_test needs at least 10 samples");
  if (geweke.probe.size() != model.dim()) throw ConfigError("geweke probe has the wrong dimension");
  const std::vector<std::string> names = geweke_statistic_names(model);
  const std::size_t n_stats = names.size();
  const RandomStream root = RandomStream(seed).derive("geweke");

  std::vector<std::vector<double>> forward(n_stats), successive(n_stats);
  for (auto& v : forward) v.reserve(geweke.n_samples);
  for (auto& v : successive) v.reserve(geweke.n_samples);

  const RandomStream fwd_root = root.derive("forward");
  for (std::size_t i = 0; i < geweke.n_samples; ++i) {
    RandomStream rng = fwd_root.derive(static_cast<std::uint64_t>(i));
    SimulationResult sim = simulate_prior(model, geweke.n_obs, rng);
    RandomStream prng = rng.derive("probe");
    const double pv = probe_value(model, sim.gp, geweke.probe, prng);
    const auto s = statistics_of(sim.params, pv, sim.rejected.size());
    for (std::size_t k = 0; k < n_stats; ++k) forward[k].push_back(s[k]);
  }

  const RandomStream suc_root = root.derive("successive");
  RandomStream init_rng = suc_root.derive("init");
  ChainState state = state_from_simulation(simulate_prior(model, geweke.n_obs, init_rng), model);
  state.adaptation.hmc_step = AdaptiveScale(settings.hmc.step_size, settings.hmc.target_accept);
  const std::size_t total = geweke.burn_in + geweke.n_samples;
  for (std::size_t t = 0; t < total; ++t) {
    RandomStream rng = sweep_stream(suc_root, t);
    const bool adapt = t < geweke.burn_in;
    gibbs_sweep(state, model, settings, adapt, rng);
    RandomStream data_rng = rng.derive("data");
    const SamplerAdaptation kept = state.adaptation;
    const std::size_t sweep = state.sweep;
    state = state_from_simulation(
        simulate_given(model, state.params, geweke.n_obs, state.gp, data_rng), model);
    state.adaptation = kept;
    state.sweep = sweep;
    if (t < geweke.burn_in) continue;
    RandomStream prng = rng.derive("probe");
    const double pv = probe_value(model, state.gp, geweke.probe, prng);
    const auto s = statistics_of(state.params, pv, state.rejected.size());
    for (std::size_t k = 0; k < n_stats; ++k) successive[k].push_back(s[k]);
  }

  GewekeResult out;
  for (std::size_t k = 0; k < n_stats; ++k) {
    GewekeStatistic st;
    st.name = names[k];
    auto mean_var = [](const std::vector<double>& v, double& mean, double& var) {
      mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      var /= static_cast<double>(v.size() - 1);
    };
    mean_var(forward[k], st.forward_mean, st.forward_var);
    mean_var(successive[k], st.successive_mean, st.successive_var);
    try {
      st.successive_ess = ess(successive[k]);
    } catch (const NumericError&) {
      st.successive_ess = 1.0;
    }
    const double se = std::sqrt(st.forward_var / static_cast<double>(forward[k].size()) +
                                st.successive_var / st.successive_ess);
    st.z = se > 0.0 ? (st.forward_mean - st.successive_mean) / se
                    : (st.forward_mean == st.successive_mean ? 0.0 : std::copysign(1e9, st.forward_mean - st.successive_mean));
    out.statistics.push_back(st);
  }
  return out;
}

}  // namespace mcgp
