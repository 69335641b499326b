#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mcgp/diagnostics.hpp"
#include "mcgp/errors.hpp"

using namespace mcgp;

namespace {

std::vector<double> ar1(double rho, std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed);
  std::vector<double> x(n);
  double v = rng.normal() / std::sqrt(1.0 - rho * rho);
  for (double& e : x) {
    v = rho * v + rng.normal();
    e = v;
  }
  return x;
}

Model micro_model() {
  Model m;
  m.constraint = {Family::Gaussian, NormalInvChiSqPrior{0.0, 1.0, 5.0, 1.0}, 1};
  m.centering = {CenteringKind::ConditionalNormal, ThetaPrior{0.0, 1.0, 3.0, 2.0}};
  m.kernel.lengthscale = 1.0;
  m.kernel.jitter = 1e-8;
  return m;
}

}  // namespace

TEST_CASE("ESS of an independent chain is close to its length") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const std::vector<double> x = ar1(0.0, 10000, seed);
    const double e = ess(x);
    CHECK(e >= 9000.0);
    CHECK(e <= 11000.0);
  }
}

TEST_CASE("ESS of AR(1) with rho 0.5 is a third of the length") {
  const std::size_t n = 100000;
  const double theory = static_cast<double>(n) * (1.0 - 0.5) / (1.0 + 0.5);
  const double e = ess(ar1(0.5, n, 4));
  CHECK(std::abs(e - theory) < 0.1 * theory);
}

TEST_CASE("ESS is capped at the chain length and positive") {
  const std::vector<double> x = ar1(-0.5, 5000, 5);
  const double e = ess(x);
  CHECK(e > 0.0);
  CHECK(e <= 5000.0);
}

TEST_CASE("ESS errors") {
  CHECK_THROWS_AS(ess(std::vector<double>(100, 2.5)), NumericError);
  CHECK_THROWS_AS(ess(std::vector<double>(9, 1.0)), ConfigError);
  std::vector<double> bad = ar1(0.0, 50, 6);
  bad[10] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(ess(bad), NumericError);
}

TEST_CASE("shuffling an autocorrelated chain increases ESS") {
  std::vector<double> x = ar1(0.9, 20000, 7);
  const double before = ess(x);
  std::mt19937_64 g(8);
  std::shuffle(x.begin(), x.end(), g);
  CHECK(ess(x) > before);
}

TEST_CASE("ESS report summarizes per-probe values") {
  const std::vector<std::vector<double>> chains{ar1(0.9, 4000, 9), ar1(0.0, 4000, 10), ar1(0.5, 4000, 11)};
  const EssReport r = ess_report(chains, 2);
  REQUIRE(r.values.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) CHECK(r.values[j] == ess(chains[j]));
  CHECK(r.argmin == 0);
  CHECK(r.argmax == 1);
  CHECK(r.min == r.values[0]);
  CHECK(r.max == r.values[1]);
  CHECK(r.midpoint_index == 2);
  CHECK(r.midpoint == r.values[2]);
  CHECK(r.iterations == 4000);
  for (double v : r.values) {
    CHECK(v > 0.0);
    CHECK(v <= 4000.0);
  }

  CHECK_THROWS_AS(ess_report({}, 0), ConfigError);
  CHECK_THROWS_AS(ess_report(chains, 3), ConfigError);
  CHECK_THROWS_AS(ess_report({ar1(0.0, 100, 12), ar1(0.0, 99, 13)}, 0), ConfigError);
}

TEST_CASE("Geweke harness is deterministic given the seed") {
  const Model m = micro_model();
  SamplerSettings settings;
  settings.update_lengthscale = false;
  GewekeSettings g;
  g.n_samples = 300;
  g.burn_in = 50;
  g.probe = Eigen::Vector2d(0.0, 0.0);
  const GewekeResult a = geweke_test(m, settings, g, 14);
  const GewekeResult b = geweke_test(m, settings, g, 14);
  const GewekeResult c = geweke_test(m, settings, g, 15);
  const std::vector<std::string> names = geweke_statistic_names(m);
  CHECK(names.size() >= 6);
  REQUIRE(a.statistics.size() == names.size());
  bool differs = false;
  for (std::size_t k = 0; k < names.size(); ++k) {
    CHECK(a.statistics[k].name == names[k]);
    CHECK(a.statistics[k].z == b.statistics[k].z);
    CHECK(a.statistics[k].forward_mean == b.statistics[k].forward_mean);
    CHECK(a.statistics[k].successive_mean == b.statistics[k].successive_mean);
    CHECK(std::isfinite(a.statistics[k].z));
    differs = differs || a.statistics[k].z != c.statistics[k].z;
  }
  CHECK(differs);
  double mx = 0.0;
  for (const auto& s : a.statistics) mx = std::max(mx, std::abs(s.z));
  CHECK(a.max_abs_z() == mx);
}

TEST_CASE("Geweke harness validates its settings") {
  const Model m = micro_model();
  GewekeSettings g;
  g.n_samples = 5;
  g.probe = Eigen::Vector2d(0.0, 0.0);
  CHECK_THROWS_AS(geweke_test(m, SamplerSettings{}, g, 1), ConfigError);
  g.n_samples = 100;
  g.probe = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(geweke_test(m, SamplerSettings{}, g, 1), ConfigError);
}
