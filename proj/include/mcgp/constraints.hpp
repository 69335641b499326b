#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include "mcgp/random.hpp"

namespace mcgp {

/// Parametric family of the constrained marginal p_A(. | phi).
///
/// Parameter layout of phi per family:
///   Gaussian     [mean, variance]
///   Lognormal    [log-mean mu_x, log-variance sigma_x^2]
///   Exponential  [rate r]
enum class Family { Gaussian, Lognormal, Exponential };

using Phi = Eigen::VectorXd;

/// phi is known exactly (distribution constraint).
struct DiracPrior {
  Phi value;
};

/// sigma^2 ~ v0 s0^2 / chi^2_{v0},  mu | sigma^2 ~ N(mu0, sigma^2 / k0).
/// For the lognormal family it applies to (mu_x, sigma_x^2).
struct NormalInvChiSqPrior {
  double mu0 = 0.0;
  double k0 = 1.0;
  double v0 = 1.0;
  double sigma0_sq = 1.0;
};

/// rate ~ Gamma(shape, rate) (exponential family).
struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
};

/// mean | variance ~ N(mu0, variance / k0); the variance is owned by the
/// shared-variance centering and updated there.
struct NormalGivenVariancePrior {
  double mu0 = 0.0;
  double k0 = 1.0;
};

using PriorSpec = std::variant<DiracPrior, NormalInvChiSqPrior, GammaPrior, NormalGivenVariancePrior>;

struct MarginalConstraint {
  Family family = Family::Gaussian;
  PriorSpec prior = DiracPrior{};
  /// Number of constrained coordinates; each follows p_A(. | phi) independently.
  int dim = 1;

  /// Throws ConfigError on inconsistent family/prior pairs or invalid hyperparameters.
  void validate() const;
  [[nodiscard]] bool fixed() const noexcept { return std::holds_alternative<DiracPrior>(prior); }
};

[[nodiscard]] Eigen::Index phi_size(Family family) noexcept;
[[nodiscard]] std::string family_name(Family family);
[[nodiscard]] bool phi_valid(const MarginalConstraint& c, const Phi& phi) noexcept;

/// Draw phi from its prior. NormalGivenVariance needs the variance it is tied to.
Phi sample_phi_prior(const MarginalConstraint& c, RandomStream& rng,
                     std::optional<double> shared_variance = std::nullopt);

/// log p_phi(phi); -inf outside the support.
double phi_log_prior(const MarginalConstraint& c, const Phi& phi);

/// True when every coordinate of x_a lies in the family's support.
bool in_support(const MarginalConstraint& c, const Eigen::Ref<const Eigen::VectorXd>& x_a) noexcept;

/// log p_A(x_a | phi), summed over the constrained coordinates. Returns -infinity
/// (never NaN) for out-of-support x_a.
double marginal_logpdf(const MarginalConstraint& c, const Phi& phi,
                       const Eigen::Ref<const Eigen::VectorXd>& x_a);

/// n i.i.d. draws of x_a, one per column (dim x n).
Eigen::MatrixXd sample_marginal(const MarginalConstraint& c, const Phi& phi, Eigen::Index n,
                                RandomStream& rng);

/// Exact mean and standard deviation of one constrained coordinate.
struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};
Moments constraint_moments(const MarginalConstraint& c, const Phi& phi);

/// Maximum-likelihood phi from observed constrained coordinates (used for
/// chain initialization). Dirac constraints return their fixed value.
Phi moment_match_phi(const MarginalConstraint& c, std::span<const Eigen::VectorXd> x_a);

/// Random-walk scale adapted by Robbins-Monro towards a target acceptance rate.
/// Adaptation is switched on only during burn-in.
class AdaptiveScale {
 public:
  AdaptiveScale() = default;
  explicit AdaptiveScale(double initial, double target = 0.44) noexcept
      : log_scale_(std::log(initial)), target_(target) {}

  [[nodiscard]] double scale() const noexcept { return std::exp(log_scale_); }
  [[nodiscard]] double log_scale() const noexcept { return log_scale_; }
  void set_log_scale(double v) noexcept { log_scale_ = v; }
  [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
  void set_steps(std::size_t s) noexcept { steps_ = s; }
  [[nodiscard]] std::size_t accepted() const noexcept { return accepted_; }

  void record(double acceptance_probability, bool accepted, bool adapt) noexcept;

 private:
  double log_scale_ = std::log(0.5);
  double target_ = 0.44;
  std::size_t steps_ = 0;
  std::size_t accepted_ = 0;
};

}  // namespace mcgp
