#include "mcgp/random.hpp"

#include <random>

namespace mcgp {

double log_gamma_variate(double shape, RandomStream& rng) {
  if (shape >= 1.0) {
    std::gamma_distribution<double> dist(shape, 1.0);
    return std::log(dist(rng));
  }
  // G(a) = G(a + 1) * U^(1/a)
  std::gamma_distribution<double> dist(shape + 1.0, 1.0);
  const double g = dist(rng);
  return std::log(g) + std::log(rng.uniform()) / shape;
}

double gamma_variate(double shape, double rate, RandomStream& rng) {
  return std::exp(log_gamma_variate(shape, rng)) / rate;
}

}  // namespace mcgp
