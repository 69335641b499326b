#pragma once

#include <array>

#include "mcgp/centering.hpp"
#include "mcgp/constraints.hpp"
#include "mcgp/data.hpp"

namespace mcgp {

/// Random-walk scales for (mean or log-mean, log variance) or (log rate).
struct PhiAdaptation {
  std::array<AdaptiveScale, 2> scales{AdaptiveScale(0.3), AdaptiveScale(0.3)};
};

/// Full conditional log density of phi: prior, p_A over the points
/// that carry a constrained draw, and pi_0 over every point when the centering
/// depends on phi.
double phi_log_target(const MarginalConstraint& c, const Phi& phi, const CenteringModel& m,
                      const CenteringParams& theta, const ConditionalData& data);

/// True when update_phi takes an exact conjugate draw for this configuration.
bool phi_conjugate(const MarginalConstraint& c, const CenteringModel& m) noexcept;

/// One transition leaving the phi conditional invariant. Dirac priors leave phi
/// unchanged. Conjugate pairs under a phi-free centering get an exact draw;
/// everything else a componentwise random-walk Metropolis step on
/// log-transformed positive components. In the shared-variance variant only the
/// mean is moved here (the variance belongs to update_theta).
void update_phi(const MarginalConstraint& c, Phi& phi, const CenteringModel& m,
                const CenteringParams& theta, const ConditionalData& data,
                PhiAdaptation& adaptation, RandomStream& rng, const UpdateOptions& options = {});

}  // namespace mcgp
