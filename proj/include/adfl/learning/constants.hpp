#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "adfl/bounds.hpp"
#include "adfl/learning/dataset.hpp"
#include "adfl/learning/model.hpp"
#include "adfl/rng.hpp"

namespace adfl {

struct Curvature {
  double m = 0.0;
  double M = 0.0;
  bool exact = false;
};

/// Curvature of one data set's loss. Quadratic: exact spectrum of the
/// Hessian. Logistic: certified interval [l2, l2 + lambda_max(X'X/n)/2],
/// with the bias column included in X.
inline Curvature curvature(const ModelSpec& spec, const Dataset& d) {
  const double n = static_cast<double>(d.size());
  switch (spec.kind) {
    case ModelKind::quadratic: {
      Eigen::MatrixXd h = d.features.transpose() * d.features / n;
      h.diagonal().array() += spec.l2;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
      return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff(), true};
    }
    case ModelKind::logistic_l2: {
      const Eigen::MatrixXd xb = detail::with_bias(d.features);
      const Eigen::MatrixXd gram = xb.transpose() * xb / n;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
      return {spec.l2, spec.l2 + 0.5 * es.eigenvalues().maxCoeff(), false};
    }
    case ModelKind::mlp_small:
      break;
  }
  throw Error("curvature bounds are unavailable for the mlp model");
}

/// Largest secant slope ||grad(w + u) - grad(w)|| / ||u|| over random probes.
inline double estimate_smoothness(const ModelSpec& spec, const Eigen::VectorXd& w, const Dataset& d,
                                  int probes, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const auto base = full_loss_and_grad(spec, w, d).grad;
  double best = spec.l2;
  for (int p = 0; p < probes; ++p) {
    Eigen::VectorXd u(w.size());
    for (auto& x : u) x = g(rng);
    u *= 1e-3 / u.norm();
    const auto moved = full_loss_and_grad(spec, w + u, d).grad;
    best = std::max(best, (moved - base).norm() / u.norm());
  }
  return best;
}

/// Assumption constants at parameters `w` for the given device data.
///
/// m and M are the extremes over devices (smallest m, largest M). sigma and G
/// are the largest per-device Monte Carlo means of ||g - grad||^2 and ||g||^2
/// over minibatches of `batch_size`, using about `sample_budget` samples in
/// total. Divergence uses full per-device gradients against the
/// size-weighted global gradient.
inline ProblemConstants estimate_constants(const ModelSpec& spec, const Eigen::VectorXd& w,
                                           std::span<const Dataset> parts, int sample_budget,
                                           int batch_size, double eta, Rng& rng) {
  if (parts.empty()) throw Error("no device data");
  ProblemConstants c;
  c.k = spec.parameter_count();
  c.N = static_cast<int>(parts.size());
  c.eta = eta;

  if (spec.kind == ModelKind::mlp_small) {
    c.m_available = false;
    c.M = 0.0;
    for (const auto& p : parts) c.M = std::max(c.M, estimate_smoothness(spec, w, p, 8, rng));
  } else {
    c.m = std::numeric_limits<double>::infinity();
    for (const auto& p : parts) {
      const auto cv = curvature(spec, p);
      c.m = std::min(c.m, cv.m);
      c.M = std::max(c.M, cv.M);
      c.m_exact = c.M_exact = cv.exact;
    }
    if (spec.kind == ModelKind::logistic_l2) c.m_exact = true;  // l2 is a certified lower bound
  }

  std::vector<Eigen::VectorXd> grads;
  double total_n = 0.0;
  Eigen::VectorXd global = Eigen::VectorXd::Zero(w.size());
  for (const auto& p : parts) {
    grads.push_back(full_loss_and_grad(spec, w, p).grad);
    global += static_cast<double>(p.size()) * grads.back();
    total_n += static_cast<double>(p.size());
  }
  global /= total_n;
  for (const auto& g : grads) {
    const double dev = (g - global).norm();
    c.delta_m = std::max(c.delta_m, dev);
    c.delta_sq += dev * dev / static_cast<double>(parts.size());
  }

  bool all_full = true;
  const int per_device = std::max(1, sample_budget / std::max(1, c.N * std::max(1, batch_size)));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    if (batch_size >= p.size()) {
      c.G = std::max(c.G, grads[i].squaredNorm());
      continue;
    }
    all_full = false;
    EpochSampler sampler(static_cast<int>(p.size()), batch_size, Rng{rng()});
    double var = 0.0, second = 0.0;
    for (int s = 0; s < per_device; ++s) {
      const auto g = loss_and_grad(spec, w, p, sampler.next()).grad;
      var += (g - grads[i]).squaredNorm();
      second += g.squaredNorm();
    }
    c.sigma = std::max(c.sigma, var / per_device);
    c.G = std::max(c.G, second / per_device);
  }
  c.moments_exact = all_full;
  return c;
}

}  // namespace adfl
