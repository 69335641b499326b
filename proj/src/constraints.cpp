#include "mcgp/constraints.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "mcgp/errors.hpp"

namespace mcgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * d * d / var;
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

Eigen::Index phi_size(Family family) noexcept {
  return family == Family::Exponential ? 1 : 2;
}

std::string family_name(Family family) {
  switch (family) {
    case Family::Gaussian:
      return "gaussian";
    case Family::Lognormal:
      return "lognormal";
    case Family::Exponential:
      return "exponential";
  }
  return "unknown";
}

bool phi_valid(const MarginalConstraint& c, const Phi& phi) noexcept {
  if (phi.size() != phi_size(c.family)) return false;
  if (!phi.allFinite()) return false;
  if (c.family == Family::Exponential) return phi[0] > 0.0;
  return phi[1] > 0.0;
}

void MarginalConstraint::validate() const {
  if (dim < 1) throw ConfigError("constraint dimension must be at least 1");
  std::visit(
      Overloaded{
          [&](const DiracPrior& p) {
            if (!phi_valid(*this, p.value)) {
              throw ConfigError("fixed phi for the " + family_name(family) +
                                " constraint is invalid (expects " +
                                std::to_string(phi_size(family)) + " values, scale/rate > 0)");
            }
          },
          [&](const NormalInvChiSqPrior& p) {
            if (family == Family::Exponential) {
              throw ConfigError("normal-inverse-chi-squared prior needs a gaussian or lognormal family");
            }
            if (!(p.k0 > 0 && p.v0 > 0 && p.sigma0_sq > 0) || !std::isfinite(p.mu0)) {
              throw ConfigError("normal-inverse-chi-squared prior needs k0, v0, sigma0_sq > 0");
            }
          },
          [&](const GammaPrior& p) {
            if (family != Family::Exponential) {
              throw ConfigError("gamma prior applies to the exponential family only");
            }
            if (!(p.shape > 0 && p.rate > 0)) throw ConfigError("gamma prior needs shape, rate > 0");
          },
          [&](const NormalGivenVariancePrior& p) {
            if (family != Family::Gaussian) {
              throw ConfigError("normal-given-variance prior applies to the gaussian family only");
            }
            if (!(p.k0 > 0) || !std::isfinite(p.mu0)) {
              throw ConfigError("normal-given-variance prior needs k0 > 0");
            }
          }},
      prior);
}

Phi sample_phi_prior(const MarginalConstraint& c, RandomStream& rng,
                     std::optional<double> shared_variance) {
  return std::visit(
      Overloaded{
          [&](const DiracPrior& p) -> Phi { return p.value; },
          [&](const NormalInvChiSqPrior& p) -> Phi {
            // log chi^2_v = log 2 + log Gamma(v/2, 1)
            const double log_chi2 = std::log(2.0) + log_gamma_variate(0.5 * p.v0, rng);
            const double var = std::exp(std::log(p.v0 * p.sigma0_sq) - log_chi2);
            Phi phi(2);
            phi << rng.normal(p.mu0, std::sqrt(var / p.k0)), var;
            return phi;
          },
          [&](const GammaPrior& p) -> Phi {
            Phi phi(1);
            phi << gamma_variate(p.shape, p.rate, rng);
            return phi;
          },
          [&](const NormalGivenVariancePrior& p) -> Phi {
            if (!shared_variance || !(*shared_variance > 0.0)) {
              throw ConfigError("normal-given-variance prior needs the shared variance");
            }
            Phi phi(2);
            phi << rng.normal(p.mu0, std::sqrt(*shared_variance / p.k0)), *shared_variance;
            return phi;
          }},
      c.prior);
}

double phi_log_prior(const MarginalConstraint& c, const Phi& phi) {
  if (!phi_valid(c, phi)) return kNegInf;
  return std::visit(
      Overloaded{
          [&](const DiracPrior& p) -> double { return (phi == p.value) ? 0.0 : kNegInf; },
          [&](const NormalInvChiSqPrior& p) -> double {
            const double var = phi[1];
            const double hv = 0.5 * p.v0;
            const double log_inv_chi2 = hv * std::log(hv) - std::lgamma(hv) +
                                        hv * std::log(p.sigma0_sq) - (hv + 1.0) * std::log(var) -
                                        hv * p.sigma0_sq / var;
            return log_inv_chi2 + normal_logpdf(phi[0], p.mu0, var / p.k0);
          },
          [&](const GammaPrior& p) -> double {
            const double r = phi[0];
            return p.shape * std::log(p.rate) - std::lgamma(p.shape) +
                   (p.shape - 1.0) * std::log(r) - p.rate * r;
          },
          [&](const NormalGivenVariancePrior& p) -> double {
            return normal_logpdf(phi[0], p.mu0, phi[1] / p.k0);
          }},
      c.prior);
}

bool in_support(const MarginalConstraint& c, const Eigen::Ref<const Eigen::VectorXd>& x_a) noexcept {
  if (!x_a.allFinite()) return false;
  if (c.family == Family::Gaussian) return true;
  return (x_a.array() > 0.0).all();
}

double marginal_logpdf(const MarginalConstraint& c, const Phi& phi,
                       const Eigen::Ref<const Eigen::VectorXd>& x_a) {
  if (!in_support(c, x_a)) return kNegInf;
  double total = 0.0;
  for (Eigen::Index j = 0; j < x_a.size(); ++j) {
    const double x = x_a[j];
    switch (c.family) {
      case Family::Gaussian:
        total += normal_logpdf(x, phi[0], phi[1]);
        break;
      case Family::Lognormal: {
        const double lx = std::log(x);
        total += normal_logpdf(lx, phi[0], phi[1]) - lx;
        break;
      }
      case Family::Exponential:
        total += std::log(phi[0]) - phi[0] * x;
        break;
    }
  }
  return total;
}

Eigen::MatrixXd sample_marginal(const MarginalConstraint& c, const Phi& phi, Eigen::Index n,
                                RandomStream& rng) {
  Eigen::MatrixXd out(c.dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < c.dim; ++j) {
      switch (c.family) {
        case Family::Gaussian:
          out(j, i) = rng.normal(phi[0], std::sqrt(phi[1]));
          break;
        case Family::Lognormal:
          out(j, i) = std::exp(rng.normal(phi[0], std::sqrt(phi[1])));
          break;
        case Family::Exponential:
          out(j, i) = -std::log(rng.uniform()) / phi[0];
          break;
      }
    }
  }
  return out;
}

Moments constraint_moments(const MarginalConstraint& c, const Phi& phi) {
  if (!phi_valid(c, phi)) throw ConfigError("constraint_moments: invalid phi");
  switch (c.family) {
    case Family::Gaussian:
      return {phi[0], std::sqrt(phi[1])};
    case Family::Lognormal: {
      // Standard lognormal moments: Var = (e^{s2} - 1) e^{2 mu + s2}.
      const double mu = phi[0];
      const double s2 = phi[1];
      const double mean = std::exp(mu + 0.5 * s2);
      const double var = std::expm1(s2) * std::exp(2.0 * mu + s2);
      return {mean, std::sqrt(var)};
    }
    case Family::Exponential:
      return {1.0 / phi[0], 1.0 / phi[0]};
  }
  throw ConfigError("constraint_moments: unknown family");
}

Phi moment_match_phi(const MarginalConstraint& c, std::span<const Eigen::VectorXd> x_a) {
  if (const auto* d = std::get_if<DiracPrior>(&c.prior)) return d->value;
  double sum = 0.0;
  double sum_sq = 0.0;
  double count = 0.0;
  for (const auto& x : x_a) {
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double v = c.family == Family::Lognormal ? std::log(x[j]) : x[j];
      sum += v;
      sum_sq += v * v;
      count += 1.0;
    }
  }
  if (count == 0.0) throw DataError("cannot initialize phi without observations");
  const double mean = sum / count;
  double var = count > 1.0 ? (sum_sq / count - mean * mean) : 1.0;
  if (!(var > 1e-12)) var = 1.0;
  Phi phi(phi_size(c.family));
  if (c.family == Family::Exponential) {
    phi << 1.0 / mean;
  } else {
    phi << mean, var;
  }
  return phi;
}

void AdaptiveScale::record(double acceptance_probability, bool accepted, bool adapt) noexcept {
  ++steps_;
  if (accepted) ++accepted_;
  if (adapt) {
    const double a = std::isfinite(acceptance_probability) ? acceptance_probability : 0.0;
    log_scale_ += (a - target_) / std::pow(static_cast<double>(steps_), 0.6);
    log_scale_ = std::clamp(log_scale_, -12.0, 5.0);
  }
}

}  // namespace mcgp
