#pragma once

// Independent reference computations used by the tests. None of these call
// into the library's numerical code paths; they recompute from first
// principles with the slowest obvious method.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "genmil/core.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using genmil::Label;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Calls f on every vector in {1..t}^m, in lexicographic order.
inline void for_each_labeling(int m, int t, const std::function<void(const std::vector<Label>&)>& f) {
  std::vector<Label> v(static_cast<std::size_t>(m), 1);
  while (true) {
    f(v);
    int k = m - 1;
    while (k >= 0 && v[static_cast<std::size_t>(k)] == t) v[static_cast<std::size_t>(k--)] = 1;
    if (k < 0) return;
    ++v[static_cast<std::size_t>(k)];
  }
}

inline bool feasible_for(const std::vector<Label>& v, Label b) {
  Label seen = 1;
  for (Label l : v) {
    if (l == 1) continue;
    if (seen != 1 && l != seen) return false;
    seen = l;
  }
  return seen == b;
}

struct Best {
  double score = kNegInf;
  std::vector<Label> labels;
  Label bag = 0;
  int ties = 0;  // how many labelings reach the best score (within 1e-12)
};

inline void consider(Best& best, double s, const std::vector<Label>& v, Label b) {
  if (s > best.score + 1e-12) {
    best = {s, v, b, 1};
  } else if (std::abs(s - best.score) <= 1e-12) {
    ++best.ties;
  }
}

// max over i in {1..t}^m of sum_j log_table(b-1, i_j-1) + log_dens(j, i_j-1).
inline Best bif_brute_e_step(const MatrixXd& log_table, const MatrixXd& log_dens, Label b) {
  const int m = static_cast<int>(log_dens.rows());
  const int t = static_cast<int>(log_dens.cols());
  Best best;
  for_each_labeling(m, t, [&](const std::vector<Label>& v) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += log_table(b - 1, v[j] - 1) + log_dens(j, v[j] - 1);
    consider(best, s, v, b);
  });
  return best;
}

// Joint max over (b, i) of log P(b) + sum_j log P(i_j|b) + log P(f_j|i_j).
inline Best bif_brute_infer(const VectorXd& log_prior, const MatrixXd& log_table, const MatrixXd& log_dens) {
  Best best;
  for (Label b = 1; b <= log_prior.size(); ++b) {
    Best inner = bif_brute_e_step(log_table, log_dens, b);
    consider(best, log_prior[b - 1] + inner.score, inner.labels, b);
  }
  return best;
}

// max over feasible i with bag label b of sum_j log_proba(j, i_j-1).
inline Best fib_brute_feasible(const MatrixXd& log_proba, Label b) {
  const int m = static_cast<int>(log_proba.rows());
  const int t = static_cast<int>(log_proba.cols());
  Best best;
  for_each_labeling(m, t, [&](const std::vector<Label>& v) {
    if (!feasible_for(v, b)) return;
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += log_proba(j, v[j] - 1);
    consider(best, s, v, b);
  });
  return best;
}

// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Importance-sampling estimate of the integral of exp(log_p) over R^d using
// an isotropic Gaussian proposal N(center, scale^2 I).
inline double mc_integral(const std::function<double(const VectorXd&)>& log_p, const VectorXd& center,
                          double scale, int draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto d = center.size();
  double sum = 0.0;
  VectorXd x(d);
  for (int n = 0; n < draws; ++n) {
    double log_q = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * scale * scale);
    for (Eigen::Index k = 0; k < d; ++k) {
      const double e = z(rng);
      x[k] = center[k] + scale * e;
      log_q -= 0.5 * e * e;
    }
    sum += std::exp(log_p(x) - log_q);
  }
  return sum / draws;
}

// Multivariate normal log density via explicit inverse and determinant.
inline double mvn_log_pdf(const VectorXd& x, const VectorXd& mean, const MatrixXd& cov) {
  Eigen::FullPivLU<MatrixXd> lu(cov);
  const VectorXd d = x - mean;
  const double quad = d.dot(lu.inverse() * d);
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) +
                 std::log(lu.determinant()) + quad);
}

// Product Gaussian-kernel KDE evaluated term by term.
inline double kde_pdf(const VectorXd& x, const MatrixXd& support, const VectorXd& h) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < support.rows(); ++r) {
    double prod = 1.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double u = (x[k] - support(r, k)) / h[k];
      prod *= std::exp(-0.5 * u * u) / (h[k] * std::sqrt(2.0 * std::numbers::pi));
    }
    total += prod;
  }
  return total / static_cast<double>(support.rows());
}

// Central finite difference of f at x along coordinate k.
inline double fd_partial(const std::function<double(const VectorXd&)>& f, VectorXd x, Eigen::Index k,
                         double step = 1e-6) {
  const double x0 = x[k];
  x[k] = x0 + step;
  const double up = f(x);
  x[k] = x0 - step;
  const double down = f(x);
  return (up - down) / (2.0 * step);
}

// Sample mean and variance with denominator n.
inline std::pair<VectorXd, VectorXd> moments(const MatrixXd& s) {
  VectorXd mean = s.colwise().mean().transpose();
  VectorXd var = (s.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
  return {mean, var};
}

inline MatrixXd random_spd(int p, std::mt19937_64& rng, double jitter = 0.5) {
  std::normal_distribution<double> z(0.0, 1.0);
  MatrixXd a(p, p);
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c) a(r, c) = z(rng);
  return a * a.transpose() / p + jitter * MatrixXd::Identity(p, p);
}

inline MatrixXd gaussian_rows(int n, const VectorXd& mean, const MatrixXd& cov, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::LLT<MatrixXd> llt(cov);
  MatrixXd e(n, mean.size());
  for (int r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < mean.size(); ++c) e(r, c) = z(rng);
  return (e * MatrixXd(llt.matrixL()).transpose()).rowwise() + mean.transpose();
}

}  // namespace oracle
