#pragma once

// Small limited-memory BFGS minimizer with Armijo backtracking, used for the
// smooth unconstrained fits in this library.

#include <cmath>
#include <deque>
#include <functional>

#include <Eigen/Dense>

namespace genmil::detail {

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

// objective(x, &grad) returns f(x) and writes grad f(x).
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

inline LbfgsResult lbfgs_minimize(const Objective& objective, Eigen::VectorXd x,
                                  int max_iterations, double gradient_tolerance,
                                  int history = 8) {
  Eigen::VectorXd g(x.size());
  double f = objective(x, &g);
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  int it = 0;
  for (; it < max_iterations && g.norm() > gradient_tolerance; ++it) {
    // Two-loop recursion.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    double gamma = 1.0;
    if (!s_hist.empty())
      gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    else
      gamma = 1.0 / std::max(1.0, g.norm());
    Eigen::VectorXd d = gamma * q;
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(d);
      d += (alpha[i] - beta) * s_hist[i];
    }
    d = -d;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      s_hist.clear(); y_hist.clear(); rho_hist.clear();
      d = -g / std::max(1.0, g.norm());
      slope = g.dot(d);
    }

    double step = 1.0;
    Eigen::VectorXd x_new, g_new(x.size());
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      x_new = x + step * d;
      f_new = objective(x_new, &g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > history) {
        s_hist.pop_front(); y_hist.pop_front(); rho_hist.pop_front();
      }
    }
    const double decrease = f - f_new;
    x = std::move(x_new);
    g = g_new;
    f = f_new;
    if (decrease <= 1e-15 * std::max(1.0, std::abs(f))) {
      ++it;
      break;
    }
  }
  return {std::move(x), f, g.norm(), it};
}

}  // namespace genmil::detail
