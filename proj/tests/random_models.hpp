#pragma once

// Random parameterizations shared by the model tests.

#include <random>

#include "genmil/bif.hpp"
#include "genmil/io.hpp"

namespace testing_models {

using namespace genmil;

// Random prior and compatibility-clamped instance table for t classes.
inline std::pair<VectorXd, MatrixXd> random_tables(int t, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(1.0, 1.0);
  VectorXd prior(t);
  for (int b = 0; b < t; ++b) prior[b] = g(rng) + 1e-3;
  prior /= prior.sum();
  MatrixXd table = MatrixXd::Zero(t, t);
  table(0, 0) = 1.0;
  for (int b = 1; b < t; ++b) {
    const double a = g(rng) + 1e-3, c = g(rng) + 1e-3;
    table(b, 0) = a / (a + c);
    table(b, b) = c / (a + c);
  }
  return {prior, table};
}

inline BifParams random_bif(int t, int p, std::mt19937_64& rng, double spread = 2.0) {
  auto [prior, table] = random_tables(t, rng);
  std::normal_distribution<double> z(0.0, spread);
  std::uniform_real_distribution<double> var(0.3, 2.0);
  std::vector<DensityModel> dens;
  for (int i = 0; i < t; ++i) {
    VectorXd mean(p);
    VectorXd v(p);
    for (int k = 0; k < p; ++k) {
      mean[k] = z(rng);
      v[k] = var(rng);
    }
    dens.emplace_back(DensityKind::kGaussianDiag, GaussianDensity(mean, MatrixXd(v.asDiagonal()), true));
  }
  return BifParams(prior, table, std::move(dens));
}

inline MatrixXd random_instances(int m, int p, std::mt19937_64& rng, double spread = 3.0) {
  std::normal_distribution<double> z(0.0, spread);
  MatrixXd x(m, p);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < p; ++c) x(r, c) = z(rng);
  return x;
}

// Small labeled dataset drawn from a random BIF model.
inline Dataset random_dataset(int t, int p, int bags, std::mt19937_64& rng, int m_min = 3, int m_max = 8) {
  const BifParams params = random_bif(t, p, rng, 3.0);
  return bif_sample(params, bags, uniform_bag_size(m_min, m_max), rng());
}

}  // namespace testing_models
