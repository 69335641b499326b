#include "mcgp/centering.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "mcgp/errors.hpp"

namespace mcgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

bool shared_variance_free(const MarginalConstraint& c) {
  return !c.fixed();
}

}  // namespace

std::string centering_name(CenteringKind kind) {
  switch (kind) {
    case CenteringKind::ConditionalNormal:
      return "conditional_normal";
    case CenteringKind::SharedVariance:
      return "shared_variance";
    case CenteringKind::StandardizedMoments:
      return "standardized_moments";
    case CenteringKind::IndependentNormal:
      return "independent_normal";
  }
  return "unknown";
}

void CenteringModel::validate(const MarginalConstraint& c) const {
  if (!(prior.k0 > 0 && prior.alpha0 > 0 && prior.beta0 > 0) || !std::isfinite(prior.mu0)) {
    throw ConfigError("theta prior needs k0, alpha0, beta0 > 0");
  }
  const bool ngv = std::holds_alternative<NormalGivenVariancePrior>(c.prior);
  switch (kind) {
    case CenteringKind::ConditionalNormal:
      if (c.family != Family::Gaussian) {
        throw ConfigError("conditional_normal centering needs a gaussian constraint; use "
                          "standardized_moments for other families");
      }
      break;
    case CenteringKind::SharedVariance:
      if (c.family != Family::Gaussian) {
        throw ConfigError("shared_variance centering needs a gaussian constraint");
      }
      if (!ngv && !c.fixed()) {
        throw ConfigError("shared_variance centering needs a normal_given_variance or fixed phi prior");
      }
      break;
    case CenteringKind::StandardizedMoments:
    case CenteringKind::IndependentNormal:
      break;
  }
  if (ngv && kind != CenteringKind::SharedVariance) {
    throw ConfigError("normal_given_variance prior is only meaningful with shared_variance centering");
  }
}

LinearConditional centering_law(const CenteringModel& m, const MarginalConstraint& c,
                                const CenteringParams& theta, const Phi& phi) {
  const double rho = m.updates_rho() ? theta.rho : 0.0;
  if (!(std::abs(rho) < 1.0)) throw NumericError("centering: |rho| must be below 1");
  const double shrink = 1.0 - rho * rho;
  LinearConditional law;
  switch (m.kind) {
    case CenteringKind::ConditionalNormal: {
      const double s2 = std::sqrt(theta.sigma2_sq);
      law.slope = rho * s2 / std::sqrt(phi[1]);
      law.intercept = theta.mu2 - law.slope * phi[0];
      law.variance = shrink * theta.sigma2_sq;
      break;
    }
    case CenteringKind::SharedVariance:
      law.slope = rho;
      law.intercept = theta.mu2 - rho * phi[0];
      law.variance = shrink * phi[1];
      break;
    case CenteringKind::StandardizedMoments: {
      const Moments mo = constraint_moments(c, phi);
      law.slope = rho * std::sqrt(theta.sigma2_sq) / mo.sd;
      law.intercept = theta.mu2 - law.slope * mo.mean;
      law.variance = shrink * theta.sigma2_sq;
      break;
    }
    case CenteringKind::IndependentNormal:
      law.slope = 0.0;
      law.intercept = theta.mu2;
      law.variance = theta.sigma2_sq;
      break;
  }
  if (!(law.variance > 0.0) || !std::isfinite(law.variance) || !std::isfinite(law.slope) ||
      !std::isfinite(law.intercept)) {
    throw NumericError("centering: degenerate conditional variance");
  }
  return law;
}

double centering_logpdf(const LinearConditional& law, const Eigen::Ref<const Eigen::VectorXd>& x_a,
                        const Eigen::Ref<const Eigen::VectorXd>& x_ac) {
  const double mean = x_a.size() > 0 ? law.mean(x_a[0]) : law.intercept;
  const double log_norm = -0.5 * (kLog2Pi + std::log(law.variance));
  double total = 0.0;
  for (Eigen::Index j = 0; j < x_ac.size(); ++j) {
    const double d = x_ac[j] - mean;
    total += log_norm - 0.5 * d * d / law.variance;
  }
  return total;
}

double centering_logpdf(const CenteringModel& m, const MarginalConstraint& c,
                        const CenteringParams& theta, const Phi& phi,
                        const Eigen::Ref<const Eigen::VectorXd>& x_a,
                        const Eigen::Ref<const Eigen::VectorXd>& x_ac) {
  return centering_logpdf(centering_law(m, c, theta, phi), x_a, x_ac);
}

Eigen::VectorXd centering_sample(const LinearConditional& law,
                                 const Eigen::Ref<const Eigen::VectorXd>& x_a, int dim_ac,
                                 RandomStream& rng) {
  const double mean = x_a.size() > 0 ? law.mean(x_a[0]) : law.intercept;
  const double sd = std::sqrt(law.variance);
  Eigen::VectorXd out(dim_ac);
  for (int j = 0; j < dim_ac; ++j) out[j] = rng.normal(mean, sd);
  return out;
}

Eigen::VectorXd centering_sample(const CenteringModel& m, const MarginalConstraint& c,
                                 const CenteringParams& theta, const Phi& phi,
                                 const Eigen::Ref<const Eigen::VectorXd>& x_a, int dim_ac,
                                 RandomStream& rng) {
  return centering_sample(centering_law(m, c, theta, phi), x_a, dim_ac, rng);
}

CenteringParams sample_theta_prior(const CenteringModel& m, RandomStream& rng) {
  const ThetaPrior& p = m.prior;
  CenteringParams theta;
  // s = beta0 / Gamma(alpha0, 1)
  theta.sigma2_sq = std::exp(std::log(p.beta0) - log_gamma_variate(p.alpha0, rng));
  theta.mu2 = rng.normal(p.mu0, std::sqrt(theta.sigma2_sq / p.k0));
  theta.rho = m.updates_rho() ? rng.uniform(-1.0, 1.0) : 0.0;
  return theta;
}

double theta_log_prior(const CenteringModel& m, const CenteringParams& theta) {
  const ThetaPrior& p = m.prior;
  if (m.updates_rho()) {
    if (!(std::abs(theta.rho) <= 1.0)) return kNegInf;
  } else if (theta.rho != 0.0) {
    return kNegInf;
  }
  const double s = theta.sigma2_sq;
  if (!(s > 0.0) || !std::isfinite(s) || !std::isfinite(theta.mu2)) return kNegInf;
  const double log_ig = p.alpha0 * std::log(p.beta0) - std::lgamma(p.alpha0) -
                        (p.alpha0 + 1.0) * std::log(s) - p.beta0 / s;
  const double var = s / p.k0;
  const double d = theta.mu2 - p.mu0;
  const double log_normal = -0.5 * (kLog2Pi + std::log(var)) - 0.5 * d * d / var;
  const double log_uniform = m.updates_rho() ? -std::log(2.0) : 0.0;
  return log_ig + log_normal + log_uniform;
}

double theta_log_target(const CenteringModel& m, const MarginalConstraint& c,
                        const CenteringParams& theta, const Phi& phi, const ConditionalData& data) {
  if (m.updates_rho() && !(std::abs(theta.rho) < 1.0)) return kNegInf;
  double total = theta_log_prior(m, theta);
  if (!std::isfinite(total)) return kNegInf;
  if (m.kind == CenteringKind::SharedVariance) {
    total += phi_log_prior(c, phi);
    for (const auto& p : data.observations) total += marginal_logpdf(c, phi, p.xa);
    if (data.rejected_in_marginal) {
      for (const auto& p : data.rejected) total += marginal_logpdf(c, phi, p.xa);
    }
    if (!std::isfinite(total)) return kNegInf;
  }
  LinearConditional law;
  try {
    law = centering_law(m, c, theta, phi);
  } catch (const NumericError&) {
    return kNegInf;
  }
  for (const auto& p : data.observations) total += centering_logpdf(law, p.xa, p.xac);
  for (const auto& p : data.rejected) total += centering_logpdf(law, p.xa, p.xac);
  return std::isfinite(total) ? total : kNegInf;
}

void update_theta(const CenteringModel& m, const MarginalConstraint& c, CenteringParams& theta,
                  Phi& phi, const ConditionalData& data, ThetaAdaptation& adaptation,
                  RandomStream& rng, const UpdateOptions& options) {
  const bool shared = m.kind == CenteringKind::SharedVariance;
  if (shared) theta.sigma2_sq = phi[1];

  // Target on the unconstrained scale, with the log-Jacobian of the map back.
  auto log_target_u = [&](const CenteringParams& t, const Phi& f) {
    const double base = theta_log_target(m, c, t, f, data);
    if (!std::isfinite(base)) return kNegInf;
    double jac = std::log(t.sigma2_sq);
    if (m.updates_rho()) jac += std::log1p(-t.rho * t.rho);
    return base + jac;
  };

  double current = log_target_u(theta, phi);
  for (int comp = 0; comp < 3; ++comp) {
    if (comp == 0 && !m.updates_rho()) continue;
    if (comp == 2 && shared && !shared_variance_free(c)) continue;
    AdaptiveScale& scale = adaptation.scales[static_cast<std::size_t>(comp)];
    CenteringParams prop = theta;
    Phi prop_phi = phi;
    const double step = scale.scale() * rng.normal();
    switch (comp) {
      case 0:
        prop.rho = std::tanh(std::atanh(theta.rho) + step);
        break;
      case 1:
        prop.mu2 = theta.mu2 + step;
        break;
      default:
        prop.sigma2_sq = theta.sigma2_sq * std::exp(step);
        if (shared) prop_phi[1] = prop.sigma2_sq;
        break;
    }
    const double proposed = log_target_u(prop, prop_phi);
    const double log_ratio = proposed - current;
    const double acc = std::isfinite(proposed) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
    const bool accept = std::isfinite(proposed) && (options.accept_all || std::log(rng.uniform()) < log_ratio);
    if (accept) {
      theta = prop;
      phi = prop_phi;
      current = proposed;
    }
    scale.record(acc, accept, options.adapt);
  }
}

}  // namespace mcgp
