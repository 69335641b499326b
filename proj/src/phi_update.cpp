#include "mcgp/phi_update.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace mcgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Constrained coordinates that carry a p_A factor, log-transformed for lognormal.
std::vector<double> marginal_values(const MarginalConstraint& c, const ConditionalData& data) {
  std::vector<double> out;
  auto push = [&](const Point& p) {
    for (Eigen::Index j = 0; j < p.xa.size(); ++j) {
      out.push_back(c.family == Family::Lognormal ? std::log(p.xa[j]) : p.xa[j]);
    }
  };
  for (const auto& p : data.observations) push(p);
  if (data.rejected_in_marginal) {
    for (const auto& p : data.rejected) push(p);
  }
  return out;
}

Phi conjugate_draw(const MarginalConstraint& c, const ConditionalData& data, RandomStream& rng) {
  const std::vector<double> xs = marginal_values(c, data);
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;

  if (const auto* g = std::get_if<GammaPrior>(&c.prior)) {
    Phi phi(1);
    phi << gamma_variate(g->shape + n, g->rate + sum, rng);
    return phi;
  }
  const auto& p = std::get<NormalInvChiSqPrior>(c.prior);
  const double mean = n > 0 ? sum / n : 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double kn = p.k0 + n;
  const double mun = (p.k0 * p.mu0 + n * mean) / kn;
  const double vn = p.v0 + n;
  const double scale = p.v0 * p.sigma0_sq + ss + p.k0 * n / kn * (mean - p.mu0) * (mean - p.mu0);
  const double log_chi2 = std::log(2.0) + log_gamma_variate(0.5 * vn, rng);
  const double var = std::exp(std::log(scale) - log_chi2);
  Phi phi(2);
  phi << rng.normal(mun, std::sqrt(var / kn)), var;
  return phi;
}

}  // namespace

double phi_log_target(const MarginalConstraint& c, const Phi& phi, const CenteringModel& m,
                      const CenteringParams& theta, const ConditionalData& data) {
  double total = phi_log_prior(c, phi);
  if (!std::isfinite(total)) return kNegInf;
  for (const auto& p : data.observations) total += marginal_logpdf(c, phi, p.xa);
  if (data.rejected_in_marginal) {
    for (const auto& p : data.rejected) total += marginal_logpdf(c, phi, p.xa);
  }
  if (m.uses_phi()) {
    CenteringParams t = theta;
    if (m.kind == CenteringKind::SharedVariance) t.sigma2_sq = phi[1];
    LinearConditional law;
    try {
      law = centering_law(m, c, t, phi);
    } catch (const std::exception&) {
      return kNegInf;
    }
    for (const auto& p : data.observations) total += centering_logpdf(law, p.xa, p.xac);
    for (const auto& p : data.rejected) total += centering_logpdf(law, p.xa, p.xac);
  }
  return std::isfinite(total) ? total : kNegInf;
}

bool phi_conjugate(const MarginalConstraint& c, const CenteringModel& m) noexcept {
  if (m.uses_phi()) return false;
  if (c.family == Family::Exponential) return std::holds_alternative<GammaPrior>(c.prior);
  return std::holds_alternative<NormalInvChiSqPrior>(c.prior);
}

void update_phi(const MarginalConstraint& c, Phi& phi, const CenteringModel& m,
                const CenteringParams& theta, const ConditionalData& data,
                PhiAdaptation& adaptation, RandomStream& rng, const UpdateOptions& options) {
  if (c.fixed()) return;
  if (!options.force_metropolis && phi_conjugate(c, m)) {
    phi = conjugate_draw(c, data, rng);
    return;
  }

  const bool exponential = c.family == Family::Exponential;
  const bool mean_only = std::holds_alternative<NormalGivenVariancePrior>(c.prior);
  // Jacobian of the positive component mapped from log scale.
  auto log_target_u = [&](const Phi& f) {
    const double base = phi_log_target(c, f, m, theta, data);
    if (!std::isfinite(base)) return kNegInf;
    if (exponential) return base + std::log(f[0]);
    if (mean_only) return base;
    return base + std::log(f[1]);
  };

  double current = log_target_u(phi);
  const int n_comp = exponential || mean_only ? 1 : 2;
  for (int comp = 0; comp < n_comp; ++comp) {
    AdaptiveScale& scale = adaptation.scales[static_cast<std::size_t>(comp)];
    Phi prop = phi;
    const double step = scale.scale() * rng.normal();
    if (exponential) {
      prop[0] = phi[0] * std::exp(step);
    } else if (comp == 0) {
      prop[0] = phi[0] + step;
    } else {
      prop[1] = phi[1] * std::exp(step);
    }
    const double proposed = log_target_u(prop);
    const double log_ratio = proposed - current;
    const double acc = std::isfinite(proposed) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
    const bool accept =
        std::isfinite(proposed) && (options.accept_all || std::log(rng.uniform()) < log_ratio);
    if (accept) {
      phi = prop;
      current = proposed;
    }
    scale.record(acc, accept, options.adapt);
  }
}

}  // namespace mcgp
