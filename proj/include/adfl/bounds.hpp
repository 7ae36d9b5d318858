#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "adfl/allocation.hpp"
#include "adfl/error.hpp"

namespace adfl {

struct ProblemConstants {
  double m = 0.0;           // strong convexity
  double M = 0.0;           // smoothness
  double sigma = 0.0;       // gradient variance bound
  double G = 0.0;           // gradient second-moment bound
  double delta_m = 0.0;     // largest per-device gradient divergence
  double delta_sq = 0.0;    // mean squared gradient divergence
  double eta = 0.0;         // learning rate
  int k = 1;                // parameter dimension
  int N = 1;                // devices

  bool m_exact = false;
  bool M_exact = false;
  bool m_available = true;  // false for non-convex models
  bool moments_exact = false;

  void validate_convex() const {
    if (!m_available) throw Error("strong convexity modulus unavailable for this model");
    if (!(m > 0) || !(M >= m)) throw Error("need 0 < m <= M");
    if (sigma < 0 || G < 0 || delta_m < 0 || delta_sq < 0) throw Error("negative moment constant");
    if (!(eta > 0)) throw Error("learning rate must be positive");
    if (!(m * eta < 1)) throw Error("need m * eta < 1");
  }

  double contraction() const { return 1.0 - m * eta; }
};

/// k (N - 1)(2N - 1) / N
inline double phi(int n, int k) {
  if (n < 1 || k < 1) throw Error("phi needs N >= 1 and k >= 1");
  return static_cast<double>(k) * (n - 1) * (2.0 * n - 1) / n;
}

/// Decay of the initial per-device gaps under all local training.
inline double bound_A1(const ProblemConstants& c, std::span<const double> gaps,
                       std::span<const long long> rounds_total) {
  c.validate_convex();
  if (gaps.size() != rounds_total.size() || gaps.empty())
    throw Error("bound_A1 needs one gap and one round total per device");
  const double a = c.contraction();
  double s = 0.0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    if (gaps[i] < 0) throw Error("initial gaps must be non-negative");
    s += std::pow(a, static_cast<double>(rounds_total[i])) * gaps[i];
  }
  return s / static_cast<double>(gaps.size());
}

/// Variance term accumulated by the per-iteration schedules.
inline double bound_A2(const ProblemConstants& c, std::span<const std::vector<int>> schedules) {
  c.validate_convex();
  if (schedules.empty()) throw Error("bound_A2 needs at least one device");
  const double scale = c.sigma * c.M * c.eta / (2.0 * c.m);
  double s = 0.0;
  for (const auto& tau : schedules) s += scale * (1.0 + allocation_objective(tau, c.contraction()));
  return s / static_cast<double>(schedules.size());
}

/// Aggregation and divergence term of the bound.
inline double bound_aggregation_term(const ProblemConstants& c) {
  if (!(c.M > 0) || !(c.eta >= 0)) throw Error("need M > 0 and eta >= 0");
  const double f = phi(c.N, c.k);
  const double se = std::sqrt(c.eta);
  const double dg = c.delta_m * c.delta_m + c.G;
  const double inner = se * (dg * dg + c.sigma * (1.0 + (c.eta + c.delta_m * se) * c.M) * f) +
                       c.delta_m * f;
  return std::numbers::pi * std::numbers::pi / (12.0 * std::sqrt(c.M)) * inner;
}

/// Real-valued iteration count before rounding up.
inline double convergence_iterations_real(const ProblemConstants& c, double epsilon,
                                          double initial_gap) {
  c.validate_convex();
  if (c.delta_m != 0.0) throw Error("iteration count requires zero gradient divergence");
  if (!(epsilon > 0)) throw Error("target gap must be positive");
  if (initial_gap < 0) throw Error("initial gap must be non-negative");
  const double f = phi(c.N, c.k);
  const double p2 = std::numbers::pi * std::numbers::pi;
  const double bracket = p2 * (c.G * c.G + c.sigma * f) / (12.0 * c.M) +
                         c.sigma * f * p2 / (12.0 * c.M) + c.sigma / (2.0 * c.m) +
                         initial_gap / (-std::log(c.contraction()));
  return 1.0 + bracket / epsilon;
}

inline long long convergence_iterations(const ProblemConstants& c, double epsilon,
                                        double initial_gap) {
  return static_cast<long long>(std::ceil(convergence_iterations_real(c, epsilon, initial_gap)));
}

}  // namespace adfl
