#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "mcgp/centering.hpp"
#include "mcgp/diagnostics.hpp"
#include "mcgp/errors.hpp"
#include "oracles.hpp"

using namespace mcgp;

namespace {

Eigen::VectorXd scalar(double x) { return Eigen::VectorXd::Constant(1, x); }

Phi phi_of(double a, double b) {
  Phi p(2);
  p << a, b;
  return p;
}

double normal_logpdf(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
}

const MarginalConstraint kGauss{Family::Gaussian, DiracPrior{phi_of(13.0, 1.0)}, 1};

// Mean and variance written out from the variant definitions.
std::pair<double, double> hand_law(CenteringKind kind, const CenteringParams& t, double m1, double s1, double x1) {
  const double s2 = std::sqrt(t.sigma2_sq);
  switch (kind) {
    case CenteringKind::ConditionalNormal:
    case CenteringKind::StandardizedMoments:
      return {t.mu2 + t.rho * s2 / s1 * (x1 - m1), (1.0 - t.rho * t.rho) * t.sigma2_sq};
    case CenteringKind::SharedVariance:
      return {t.mu2 + t.rho * (x1 - m1), (1.0 - t.rho * t.rho) * s1 * s1};
    case CenteringKind::IndependentNormal:
      return {t.mu2, t.sigma2_sq};
  }
  return {0.0, 0.0};
}

}  // namespace

TEST_CASE("rho = 0 gives N(mu2, sigma2^2) whatever x_A is") {
  const CenteringModel m{CenteringKind::ConditionalNormal, {}};
  const CenteringParams t{0.0, 1.5, 2.0};
  for (double x1 : {-5.0, 13.0, 40.0}) {
    CHECK(centering_logpdf(m, kGauss, t, phi_of(13.0, 1.0), scalar(x1), scalar(0.7)) ==
          doctest::Approx(normal_logpdf(0.7, 1.5, 2.0)).epsilon(1e-14));
  }
}

TEST_CASE("conditional-normal law at theta = (0.5, 0, 4), phi = (13, 1), x1 = 15") {
  const CenteringModel m{CenteringKind::ConditionalNormal, {}};
  const LinearConditional law = centering_law(m, kGauss, {0.5, 0.0, 4.0}, phi_of(13.0, 1.0));
  CHECK(law.mean(15.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(law.variance == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("conditional-normal centering is the bivariate normal conditional") {
  const CenteringModel m{CenteringKind::ConditionalNormal, {}};
  RandomStream rng(1);
  for (int k = 0; k < 50; ++k) {
    const double mu1 = rng.normal(0, 5), v1 = 0.2 + 3 * rng.uniform();
    const double mu2 = rng.normal(0, 5), v2 = 0.2 + 3 * rng.uniform();
    const double rho = rng.uniform(-0.95, 0.95);
    const double x1 = rng.normal(mu1, 2), x2 = rng.normal(mu2, 2);
    Eigen::Matrix2d cov;
    cov << v1, rho * std::sqrt(v1 * v2), rho * std::sqrt(v1 * v2), v2;
    const oracle::Conditional c = oracle::mvn_condition(Eigen::Vector2d(mu1, mu2), cov, 1, scalar(x1));
    const MarginalConstraint con{Family::Gaussian, DiracPrior{phi_of(mu1, v1)}, 1};
    CHECK(centering_logpdf(m, con, {rho, mu2, v2}, phi_of(mu1, v1), scalar(x1), scalar(x2)) ==
          doctest::Approx(normal_logpdf(x2, c.mean[0], c.cov(0, 0))).epsilon(1e-12));
  }
}

TEST_CASE("standardized-moments centering uses the exact moments of p_A") {
  const CenteringModel m{CenteringKind::StandardizedMoments, {}};
  const MarginalConstraint ex{Family::Exponential, GammaPrior{0.1, 0.1}, 1};
  Phi r(1);
  r << 2.0;
  const CenteringParams t{0.4, 1.0, 9.0};
  const LinearConditional law = centering_law(m, ex, t, r);
  const auto [mean, var] = hand_law(CenteringKind::StandardizedMoments, t, 0.5, 0.5, 3.0);
  CHECK(law.mean(3.0) == doctest::Approx(mean).epsilon(1e-14));
  CHECK(law.variance == doctest::Approx(var).epsilon(1e-14));

  const MarginalConstraint ln{Family::Lognormal, NormalInvChiSqPrior{-10.0, 0.01, 0.001, 5.0}, 1};
  const Phi p = phi_of(0.0, 1.0);
  const double mx = std::exp(0.5), sx = std::sqrt((std::numbers::e - 1.0) * std::numbers::e);
  const auto [mean2, var2] = hand_law(CenteringKind::StandardizedMoments, t, mx, sx, 2.0);
  const LinearConditional law2 = centering_law(m, ln, t, p);
  CHECK(law2.mean(2.0) == doctest::Approx(mean2).epsilon(1e-13));
  CHECK(law2.variance == doctest::Approx(var2).epsilon(1e-14));
}

TEST_CASE("degenerate correlation is rejected") {
  const CenteringModel m{CenteringKind::ConditionalNormal, {}};
  CHECK_THROWS_AS(centering_law(m, kGauss, {1.0, 0.0, 1.0}, phi_of(13.0, 1.0)), NumericError);
  CHECK_THROWS_AS(centering_law(m, kGauss, {-1.0, 0.0, 1.0}, phi_of(13.0, 1.0)), NumericError);
  CHECK_THROWS_AS(centering_law(m, kGauss, {0.2, 0.0, 0.0}, phi_of(13.0, 1.0)), NumericError);
}

TEST_CASE("centering density is finite everywhere inside the parameter space") {
  RandomStream rng(2);
  for (CenteringKind kind : {CenteringKind::ConditionalNormal, CenteringKind::SharedVariance,
                             CenteringKind::StandardizedMoments, CenteringKind::IndependentNormal}) {
    const CenteringModel m{kind, {}};
    for (int k = 0; k < 200; ++k) {
      const double rho = kind == CenteringKind::IndependentNormal ? 0.0 : rng.uniform(-0.999, 0.999);
      const CenteringParams t{rho, rng.normal(0, 100), std::exp(rng.normal(0, 3))};
      const Phi p = phi_of(rng.normal(0, 100), std::exp(rng.normal(0, 3)));
      CHECK(std::isfinite(centering_logpdf(m, kGauss, t, p, scalar(rng.normal(0, 1e3)), scalar(rng.normal(0, 1e3)))));
    }
  }
}

TEST_CASE("each variant integrates to one by Gauss-Hermite quadrature") {
  const oracle::Rule gh = oracle::gauss_hermite(40);
  const MarginalConstraint ln{Family::Lognormal, NormalInvChiSqPrior{}, 1};
  struct Case {
    CenteringKind kind;
    const MarginalConstraint* c;
    Phi phi;
    double m1, s1;
  };
  const double mx = std::exp(0.3 + 0.25), sx = std::sqrt((std::exp(0.5) - 1.0) * std::exp(0.6 + 0.5));
  const std::vector<Case> cases = {
      {CenteringKind::ConditionalNormal, &kGauss, phi_of(13.0, 1.0), 13.0, 1.0},
      {CenteringKind::SharedVariance, &kGauss, phi_of(13.0, 20.0), 13.0, std::sqrt(20.0)},
      {CenteringKind::StandardizedMoments, &ln, phi_of(0.3, 0.5), mx, sx},
      {CenteringKind::IndependentNormal, &kGauss, phi_of(13.0, 1.0), 13.0, 1.0},
  };
  for (const auto& k : cases) {
    const CenteringModel m{k.kind, {}};
    const double rho = k.kind == CenteringKind::IndependentNormal ? 0.0 : 0.6;
    const CenteringParams t{rho, -2.0, 5.0};
    for (double x1 : {0.5, 14.0}) {
      // Substitute x = c + s t with c, s taken from the hand-written law, but
      // shifted so the integrand is not exactly the weight function.
      const auto [mean, var] = hand_law(k.kind, t, k.m1, k.s1, x1);
      const double s = std::sqrt(2.0 * var), c = mean + 0.3 * s;
      double total = 0.0;
      for (Eigen::Index i = 0; i < gh.nodes.size(); ++i) {
        const double tt = gh.nodes[i];
        const double x = c + s * tt;
        total += gh.weights[i] * std::exp(centering_logpdf(m, *k.c, t, k.phi, scalar(x1), scalar(x)) + tt * tt) * s;
      }
      CHECK(std::abs(total - 1.0) < 1e-8);
    }
  }
}

TEST_CASE("centering samples") {
  const RandomStream root(3);
  SUBCASE("rho = 0 draws are standard normal") {
    const CenteringModel m{CenteringKind::ConditionalNormal, {}};
    RandomStream rng = root.derive(1);
    std::vector<double> xs;
    for (int i = 0; i < 100000; ++i)
      xs.push_back(centering_sample(m, kGauss, {0.0, 0.0, 1.0}, phi_of(13.0, 1.0), scalar(11.0), 1, rng)[0]);
    CHECK(oracle::ks_statistic(xs, [](double x) { return oracle::normal_cdf(x, 0.0, 1.0); }) <
          oracle::ks_critical_01(xs.size()));
  }
  SUBCASE("rho = 0.999 shrinks the spread to sigma2 * 0.0447") {
    const CenteringModel m{CenteringKind::ConditionalNormal, {}};
    RandomStream rng = root.derive(2);
    std::vector<double> xs;
    for (int i = 0; i < 20000; ++i)
      xs.push_back(centering_sample(m, kGauss, {0.999, 0.0, 4.0}, phi_of(13.0, 1.0), scalar(13.0), 1, rng)[0]);
    CHECK(std::abs(std::sqrt(oracle::variance(xs)) / (2.0 * 0.0447) - 1.0) < 0.05);
  }
  SUBCASE("shared variance at phi = (0, 20), rho = 0.3, x1 = 0") {
    const CenteringModel m{CenteringKind::SharedVariance, {}};
    RandomStream rng = root.derive(3);
    std::vector<double> xs;
    for (int i = 0; i < 100000; ++i)
      xs.push_back(centering_sample(m, kGauss, {0.3, 1.5, 20.0}, phi_of(0.0, 20.0), scalar(0.0), 1, rng)[0]);
    CHECK(std::abs(oracle::mean(xs) - 1.5) < 3.0 * oracle::mean_se(xs));
    CHECK(std::abs(oracle::variance(xs) - 0.91 * 20.0) < 3.0 * oracle::variance_se(xs));
  }
  SUBCASE("several free coordinates are independent copies") {
    const CenteringModel m{CenteringKind::ConditionalNormal, {}};
    RandomStream rng = root.derive(4);
    std::vector<double> a, b;
    for (int i = 0; i < 20000; ++i) {
      const Eigen::VectorXd x = centering_sample(m, kGauss, {0.5, 0.0, 4.0}, phi_of(13.0, 1.0), scalar(15.0), 2, rng);
      a.push_back(x[0]);
      b.push_back(x[1]);
    }
    CHECK(std::abs(oracle::mean(a) - 2.0) < 3.0 * oracle::mean_se(a));
    CHECK(std::abs(oracle::mean(b) - 2.0) < 3.0 * oracle::mean_se(b));
    CHECK(std::abs(oracle::sample_cov(a, b)) < 3.0 * 3.0 / std::sqrt(20000.0));
  }
}

TEST_CASE("theta prior") {
  const CenteringModel m{CenteringKind::ConditionalNormal, ThetaPrior{0.0, 0.001, 0.001, 0.001}};
  CHECK(m.prior.mu0 == 0.0);
  CHECK(m.prior.k0 == 0.001);
  CHECK(m.prior.alpha0 == 0.001);
  CHECK(m.prior.beta0 == 0.001);

  RandomStream rng(4);
  std::vector<double> rho;
  for (int i = 0; i < 100000; ++i) rho.push_back(sample_theta_prior(m, rng).rho);
  CHECK(std::abs(oracle::mean(rho)) < 0.01);
  CHECK(oracle::ks_statistic(rho, [](double x) { return (x + 1.0) / 2.0; }) < oracle::ks_critical_01(rho.size()));

  CHECK(theta_log_prior(m, {1.5, 0.0, 1.0}) == -std::numeric_limits<double>::infinity());
  CHECK(theta_log_prior(m, {0.2, 0.0, -1.0}) == -std::numeric_limits<double>::infinity());

  // Normal x Inverse-Gamma written out by hand; equal up to the uniform constant.
  const CenteringModel mp{CenteringKind::ConditionalNormal, ThetaPrior{1.0, 2.0, 3.0, 4.0}};
  auto hand = [](const CenteringParams& t) {
    const double s = t.sigma2_sq;
    return normal_logpdf(t.mu2, 1.0, s / 2.0) + 3.0 * std::log(4.0) - std::lgamma(3.0) - 4.0 * std::log(s) - 4.0 / s;
  };
  const double offset = theta_log_prior(mp, {0.0, 0.0, 1.0}) - hand({0.0, 0.0, 1.0});
  for (const CenteringParams t : {CenteringParams{0.3, 2.0, 0.5}, CenteringParams{-0.9, -1.0, 7.0}}) {
    CHECK(theta_log_prior(mp, t) - hand(t) == doctest::Approx(offset).epsilon(1e-12));
  }
}

TEST_CASE("theta target is prior plus the centering terms, term by term") {
  const CenteringModel m{CenteringKind::ConditionalNormal, ThetaPrior{0.0, 0.5, 2.0, 1.0}};
  const std::vector<Point> obs = {{scalar(12.1), scalar(0.4)}, {scalar(13.8), scalar(-1.2)}, {scalar(14.0), scalar(2.2)}};
  const std::vector<Point> rej = {{scalar(12.1), scalar(3.0)}, {scalar(13.8), scalar(-4.0)}};
  const Phi p = phi_of(13.0, 1.0);
  RandomStream rng(5);
  for (int k = 0; k < 20; ++k) {
    const CenteringParams t{rng.uniform(-0.9, 0.9), rng.normal(), std::exp(rng.normal())};
    double naive = theta_log_prior(m, t);
    for (const auto* set : {&obs, &rej}) {
      for (const Point& q : *set) {
        const double mean = t.mu2 + t.rho * std::sqrt(t.sigma2_sq) / 1.0 * (q.xa[0] - 13.0);
        naive += normal_logpdf(q.xac[0], mean, (1.0 - t.rho * t.rho) * t.sigma2_sq);
      }
    }
    CHECK(theta_log_target(m, kGauss, t, p, ConditionalData{obs, rej}) == doctest::Approx(naive).epsilon(1e-13));
  }
}

TEST_CASE("with no data the theta update targets the prior") {
  const CenteringModel m{CenteringKind::ConditionalNormal, ThetaPrior{0.0, 0.001, 0.001, 0.001}};
  CenteringParams t{0.0, 0.0, 1.0};
  Phi p = phi_of(13.0, 1.0);
  ThetaAdaptation ad;
  RandomStream rng(6);
  UpdateOptions opt;
  opt.adapt = true;
  for (int i = 0; i < 2000; ++i) update_theta(m, kGauss, t, p, ConditionalData{}, ad, rng, opt);
  opt.adapt = false;
  std::vector<double> rho;
  for (int i = 0; i < 100000; ++i) {
    update_theta(m, kGauss, t, p, ConditionalData{}, ad, rng, opt);
    rho.push_back(t.rho);
  }
  CHECK(std::abs(oracle::mean(rho)) < 0.02);
  CHECK(oracle::variance(rho) == doctest::Approx(1.0 / 3.0).epsilon(0.05));
}

TEST_CASE("shared-variance update moves sigma1^2 together with theta") {
  const MarginalConstraint c{Family::Gaussian, NormalGivenVariancePrior{-10.0, 0.01}, 1};
  const CenteringModel m{CenteringKind::SharedVariance, {}};
  const std::vector<Point> obs = {{scalar(12.0), scalar(-4.0)}, {scalar(15.0), scalar(-6.0)}, {scalar(9.0), scalar(1.0)}};
  CenteringParams t{0.1, 0.0, 20.0};
  Phi p = phi_of(12.0, 20.0);
  ThetaAdaptation ad;
  RandomStream rng(7);
  bool moved = false;
  for (int i = 0; i < 50; ++i) {
    const double before = p[1];
    update_theta(m, c, t, p, ConditionalData{obs, {}}, ad, rng);
    CHECK(t.sigma2_sq == p[1]);
    moved = moved || p[1] != before;
  }
  CHECK(moved);
}

TEST_CASE("variant and family compatibility") {
  const MarginalConstraint ln{Family::Lognormal, NormalInvChiSqPrior{}, 1};
  CHECK_THROWS_AS((CenteringModel{CenteringKind::ConditionalNormal, {}}.validate(ln)), ConfigError);
  CHECK_THROWS_AS((CenteringModel{CenteringKind::SharedVariance, {}}.validate(ln)), ConfigError);
  CHECK_NOTHROW((CenteringModel{CenteringKind::StandardizedMoments, {}}.validate(ln)));
  CHECK_THROWS_AS((CenteringModel{CenteringKind::ConditionalNormal, ThetaPrior{0.0, 0.0, 1.0, 1.0}}.validate(kGauss)),
                  ConfigError);
}
