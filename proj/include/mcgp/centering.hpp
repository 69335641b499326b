#pragma once

#include <Eigen/Core>
#include <array>

#include "mcgp/constraints.hpp"
#include "mcgp/data.hpp"
#include "mcgp/random.hpp"

namespace mcgp {

/// Centering conditional pi_0(x_{A^c} | x_A; theta, phi). Every variant is a
/// normal whose mean is linear in the first constrained coordinate.
///
///   ConditionalNormal    mean mu2 + rho sigma2 / sigma1 (x1 - mu1), var (1 - rho^2) sigma2^2
///   SharedVariance       mean mu2 + rho (x1 - mu1),                 var (1 - rho^2) sigma1^2
///   StandardizedMoments  mean mu2 + rho sigma2 / s_x (x1 - m_x),     var (1 - rho^2) sigma2^2
///   IndependentNormal    mean mu2,                                  var sigma2^2 (rho fixed at 0)
///
/// (m_x, s_x) are the exact moments of p_A(. | phi). With more than one free
/// coordinate the same conditional applies to each one independently.
enum class CenteringKind { ConditionalNormal, SharedVariance, StandardizedMoments, IndependentNormal };

/// Normal-Inverse-Gamma-Uniform prior:
///   mu2 | s ~ N(mu0, s / k0),  s ~ Inv-Gamma(alpha0, beta0),  rho ~ U[-1, 1]
/// where s is sigma2^2, or sigma1^2 for the shared-variance variant.
struct ThetaPrior {
  double mu0 = 0.0;
  double k0 = 0.001;
  double alpha0 = 0.001;
  double beta0 = 0.001;
};

/// theta = (rho, mu2, sigma2^2). In the shared-variance variant sigma2_sq mirrors
/// phi[1] (the constrained variance) and is updated together with it.
struct CenteringParams {
  double rho = 0.0;
  double mu2 = 0.0;
  double sigma2_sq = 1.0;
};

struct CenteringModel {
  CenteringKind kind = CenteringKind::ConditionalNormal;
  ThetaPrior prior;

  /// Checks hyperparameters and compatibility with the constraint family.
  void validate(const MarginalConstraint& c) const;
  /// True when pi_0 depends on phi.
  [[nodiscard]] bool uses_phi() const noexcept {
    return kind != CenteringKind::IndependentNormal;
  }
  [[nodiscard]] bool updates_rho() const noexcept {
    return kind != CenteringKind::IndependentNormal;
  }
};

std::string centering_name(CenteringKind kind);

/// Resolved conditional: x_{A^c} | x_A ~ N(intercept + slope * x_A[0], variance).
struct LinearConditional {
  double intercept = 0.0;
  double slope = 0.0;
  double variance = 1.0;

  [[nodiscard]] double mean(double x1) const noexcept { return intercept + slope * x1; }
};

/// Throws NumericError for |rho| >= 1 or a non-positive variance.
LinearConditional centering_law(const CenteringModel& m, const MarginalConstraint& c,
                                const CenteringParams& theta, const Phi& phi);

/// log pi_0(x_ac | x_a), summed over free coordinates.
double centering_logpdf(const CenteringModel& m, const MarginalConstraint& c,
                        const CenteringParams& theta, const Phi& phi,
                        const Eigen::Ref<const Eigen::VectorXd>& x_a,
                        const Eigen::Ref<const Eigen::VectorXd>& x_ac);

double centering_logpdf(const LinearConditional& law, const Eigen::Ref<const Eigen::VectorXd>& x_a,
                        const Eigen::Ref<const Eigen::VectorXd>& x_ac);

Eigen::VectorXd centering_sample(const CenteringModel& m, const MarginalConstraint& c,
                                 const CenteringParams& theta, const Phi& phi,
                                 const Eigen::Ref<const Eigen::VectorXd>& x_a, int dim_ac,
                                 RandomStream& rng);

Eigen::VectorXd centering_sample(const LinearConditional& law,
                                 const Eigen::Ref<const Eigen::VectorXd>& x_a, int dim_ac,
                                 RandomStream& rng);

/// Draw from the NIGU prior. For IndependentNormal rho is 0.
CenteringParams sample_theta_prior(const CenteringModel& m, RandomStream& rng);

/// log p(theta) up to the uniform constant; -inf outside the support.
double theta_log_prior(const CenteringModel& m, const CenteringParams& theta);

/// Random-walk scales for (atanh rho, mu2, log variance).
struct ThetaAdaptation {
  std::array<AdaptiveScale, 3> scales{AdaptiveScale(0.3), AdaptiveScale(0.5), AdaptiveScale(0.3)};
};

struct UpdateOptions {
  bool adapt = false;
  /// Test hook: accept every proposal (breaks the chain on purpose).
  bool accept_all = false;
  /// Test hook: skip conjugate draws and use the Metropolis path.
  bool force_metropolis = false;
};

/// Full conditional log density of theta, including, for the
/// shared-variance variant, the terms in which sigma1^2 enters through phi.
double theta_log_target(const CenteringModel& m, const MarginalConstraint& c,
                        const CenteringParams& theta, const Phi& phi, const ConditionalData& data);

/// One componentwise Metropolis-within-Gibbs sweep over theta on
/// (atanh rho, mu2, log variance). In the shared-variance variant the variance
/// component is sigma1^2 and phi[1] is updated with it.
void update_theta(const CenteringModel& m, const MarginalConstraint& c, CenteringParams& theta,
                  Phi& phi, const ConditionalData& data, ThetaAdaptation& adaptation,
                  RandomStream& rng, const UpdateOptions& options = {});

}  // namespace mcgp
