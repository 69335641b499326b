#include "mcgp/model.hpp"

#include <cmath>

#include "mcgp/errors.hpp"

namespace mcgp {

void Model::validate() const {
  constraint.validate();
  centering.validate(constraint);
  kernel.validate();
  if (dim_ac < 1) throw ConfigError("need at least one unconstrained coordinate");
  if (round_cap < 1) throw ConfigError("round_cap must be positive");
  if (!std::isfinite(gp_mean)) throw ConfigError("gp_mean must be finite");
  if (kernel.axis_scale.size() != 0 && kernel.axis_scale.size() != dim()) {
    throw ConfigError("axis scale length does not match the model dimension");
  }
}

Eigen::MatrixXd locations(std::span<const Point> points) {
  if (points.empty()) return {};
  const Eigen::Index da = points.front().xa.size();
  const Eigen::Index dc = points.front().xac.size();
  Eigen::MatrixXd out(da + dc, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    out.col(c).head(da) = points[i].xa;
    out.col(c).tail(dc) = points[i].xac;
  }
  return out;
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) noexcept {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

Parameters sample_parameters(const Model& model, RandomStream& rng) {
  Parameters p;
  RandomStream theta_rng = rng.derive("theta");
  RandomStream phi_rng = rng.derive("phi");
  p.theta = sample_theta_prior(model.centering, theta_rng);
  if (model.centering.kind == CenteringKind::SharedVariance) {
    if (model.constraint.fixed()) {
      p.phi = std::get<DiracPrior>(model.constraint.prior).value;
      p.theta.sigma2_sq = p.phi[1];
    } else {
      p.phi = sample_phi_prior(model.constraint, phi_rng, p.theta.sigma2_sq);
    }
  } else {
    p.phi = sample_phi_prior(model.constraint, phi_rng);
  }
  return p;
}

double envelope_logpdf(const Model& model, const Parameters& params, const Point& p) {
  return marginal_logpdf(model.constraint, params.phi, p.xa) +
         centering_logpdf(model.centering, model.constraint, params.theta, params.phi, p.xa, p.xac);
}

}  // namespace mcgp
