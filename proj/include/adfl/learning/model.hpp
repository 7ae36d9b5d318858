#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adfl/error.hpp"
#include "adfl/learning/dataset.hpp"
#include "adfl/rng.hpp"

namespace adfl {

enum class ModelKind { quadratic, logistic_l2, mlp_small };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::quadratic: return "quadratic";
    case ModelKind::logistic_l2: return "logistic_l2";
    case ModelKind::mlp_small: return "mlp_small";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "quadratic") return ModelKind::quadratic;
  if (s == "logistic_l2" || s == "logistic") return ModelKind::logistic_l2;
  if (s == "mlp_small" || s == "mlp") return ModelKind::mlp_small;
  return std::nullopt;
}

/// Model family plus shapes. Parameters live in one flat vector:
///   quadratic   w (d)
///   logistic_l2 W (d+1) x C, column-major, last row is the bias
///   mlp_small   W1 (d+1) x H then W2 (H+1) x C, both column-major
struct ModelSpec {
  ModelKind kind = ModelKind::quadratic;
  double l2 = 0.0;
  int hidden = 16;
  int input_dim = 1;
  int classes = 0;

  int parameter_count() const {
    switch (kind) {
      case ModelKind::quadratic: return input_dim;
      case ModelKind::logistic_l2: return (input_dim + 1) * classes;
      case ModelKind::mlp_small: return (input_dim + 1) * hidden + (hidden + 1) * classes;
    }
    return 0;
  }

  void validate() const {
    if (input_dim < 1) throw Error("model input dimension must be >= 1");
    if (l2 < 0) throw Error("l2 must be non-negative");
    if (kind != ModelKind::quadratic && classes < 2) throw Error("classifier needs >= 2 classes");
    if (kind == ModelKind::mlp_small && hidden < 1) throw Error("mlp needs >= 1 hidden unit");
  }

  bool classifier() const { return kind != ModelKind::quadratic; }
};

/// Zeros for the convex models; small Gaussian weights for the MLP.
inline Eigen::VectorXd initial_parameters(const ModelSpec& spec, std::uint64_t seed) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(spec.parameter_count());
  if (spec.kind == ModelKind::mlp_small) {
    Rng rng{seed};
    std::normal_distribution<double> g(0.0, 1.0);
    const double s1 = 1.0 / std::sqrt(spec.input_dim + 1.0);
    const int n1 = (spec.input_dim + 1) * spec.hidden;
    for (int j = 0; j < n1; ++j) w[j] = s1 * g(rng);
    const double s2 = 1.0 / std::sqrt(spec.hidden + 1.0);
    for (int j = n1; j < w.size(); ++j) w[j] = s2 * g(rng);
  }
  return w;
}

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

namespace detail {

inline Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, std::span<const int> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
  return out;
}

inline Eigen::MatrixXd with_bias(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  out.leftCols(x.cols()) = x;
  out.col(x.cols()).setOnes();
  return out;
}

// Row-wise softmax cross-entropy; turns `logits` into (p - onehot) / n.
inline double softmax_xent(Eigen::MatrixXd& logits, const Eigen::VectorXi& y) {
  const auto n = logits.rows();
  double loss = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double mx = logits.row(j).maxCoeff();
    logits.row(j).array() -= mx;
    logits.row(j) = logits.row(j).array().exp().matrix();
    const double z = logits.row(j).sum();
    logits.row(j) /= z;
    loss -= std::log(std::max(logits(j, y[j]), 1e-300));
    logits(j, y[j]) -= 1.0;
  }
  logits /= static_cast<double>(n);
  return loss / static_cast<double>(n);
}

}  // namespace detail

/// Mean loss over the rows `batch` of `data`, plus (l2/2)||w||^2, and its
/// gradient. Throws DivergenceError on a non-finite loss.
inline LossGrad loss_and_grad(const ModelSpec& spec, const Eigen::VectorXd& w, const Dataset& data,
                              std::span<const int> batch) {
  if (batch.empty()) throw Error("empty batch");
  if (w.size() != spec.parameter_count()) throw Error("parameter vector has the wrong length");
  if (data.dim() != spec.input_dim) throw Error("data dimension does not match the model");
  const auto n = static_cast<double>(batch.size());
  const Eigen::MatrixXd x = detail::gather_rows(data.features, batch);
  LossGrad out;
  switch (spec.kind) {
    case ModelKind::quadratic: {
      Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
      for (std::size_t r = 0; r < batch.size(); ++r) y[static_cast<Eigen::Index>(r)] = data.labels[batch[r]];
      const Eigen::VectorXd resid = x * w - y;
      out.loss = resid.squaredNorm() / (2.0 * n);
      out.grad = x.transpose() * resid / n;
      break;
    }
    case ModelKind::logistic_l2: {
      Eigen::VectorXi y(static_cast<Eigen::Index>(batch.size()));
      for (std::size_t r = 0; r < batch.size(); ++r) y[static_cast<Eigen::Index>(r)] = data.label(batch[r]);
      const Eigen::MatrixXd xb = detail::with_bias(x);
      Eigen::Map<const Eigen::MatrixXd> W(w.data(), spec.input_dim + 1, spec.classes);
      Eigen::MatrixXd s = xb * W;
      out.loss = detail::softmax_xent(s, y);
      Eigen::MatrixXd g = xb.transpose() * s;
      out.grad = Eigen::Map<Eigen::VectorXd>(g.data(), g.size());
      break;
    }
    case ModelKind::mlp_small: {
      Eigen::VectorXi y(static_cast<Eigen::Index>(batch.size()));
      for (std::size_t r = 0; r < batch.size(); ++r) y[static_cast<Eigen::Index>(r)] = data.label(batch[r]);
      const int d1 = spec.input_dim + 1, h = spec.hidden;
      Eigen::Map<const Eigen::MatrixXd> W1(w.data(), d1, h);
      Eigen::Map<const Eigen::MatrixXd> W2(w.data() + d1 * h, h + 1, spec.classes);
      const Eigen::MatrixXd xb = detail::with_bias(x);
      const Eigen::MatrixXd a = (xb * W1).array().tanh().matrix();
      const Eigen::MatrixXd ab = detail::with_bias(a);
      Eigen::MatrixXd s = ab * W2;
      out.loss = detail::softmax_xent(s, y);
      const Eigen::MatrixXd g2 = ab.transpose() * s;
      const Eigen::MatrixXd back =
          ((s * W2.topRows(h).transpose()).array() * (1.0 - a.array().square())).matrix();
      const Eigen::MatrixXd g1 = xb.transpose() * back;
      out.grad.resize(w.size());
      out.grad.head(g1.size()) = Eigen::Map<const Eigen::VectorXd>(g1.data(), g1.size());
      out.grad.tail(g2.size()) = Eigen::Map<const Eigen::VectorXd>(g2.data(), g2.size());
      break;
    }
  }
  if (spec.l2 > 0) {
    out.loss += 0.5 * spec.l2 * w.squaredNorm();
    out.grad += spec.l2 * w;
  }
  if (!std::isfinite(out.loss) || !out.grad.allFinite()) throw DivergenceError("loss or gradient is not finite");
  return out;
}

inline std::vector<int> all_rows(const Dataset& d) {
  std::vector<int> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

inline LossGrad full_loss_and_grad(const ModelSpec& spec, const Eigen::VectorXd& w, const Dataset& d) {
  const auto rows = all_rows(d);
  return loss_and_grad(spec, w, d, rows);
}

/// Fraction of rows whose argmax prediction matches the label.
inline double accuracy(const ModelSpec& spec, const Eigen::VectorXd& w, const Dataset& d) {
  if (!spec.classifier() || d.size() == 0) return std::nan("");
  Eigen::MatrixXd scores;
  const Eigen::MatrixXd xb = detail::with_bias(d.features);
  if (spec.kind == ModelKind::logistic_l2) {
    Eigen::Map<const Eigen::MatrixXd> W(w.data(), spec.input_dim + 1, spec.classes);
    scores = xb * W;
  } else {
    const int d1 = spec.input_dim + 1, h = spec.hidden;
    Eigen::Map<const Eigen::MatrixXd> W1(w.data(), d1, h);
    Eigen::Map<const Eigen::MatrixXd> W2(w.data() + d1 * h, h + 1, spec.classes);
    scores = detail::with_bias((xb * W1).array().tanh().matrix()) * W2;
  }
  Eigen::Index hits = 0;
  for (Eigen::Index j = 0; j < d.size(); ++j) {
    Eigen::Index best = 0;
    scores.row(j).maxCoeff(&best);
    hits += best == d.label(j);
  }
  return static_cast<double>(hits) / static_cast<double>(d.size());
}

/// Minibatches drawn without replacement, reshuffled at each epoch. A batch
/// at least as large as the data set is the full set and uses no randomness.
class EpochSampler {
 public:
  EpochSampler(int n, int batch_size, Rng rng)
      : order_(n), batch_(batch_size), rng_(std::move(rng)) {
    if (n < 1) throw Error("sampler over an empty data set");
    if (batch_size < 1) throw Error("batch size must be >= 1");
    std::iota(order_.begin(), order_.end(), 0);
    full_ = batch_size >= n;
    if (!full_) reshuffle();
  }

  std::span<const int> next() {
    if (full_) return order_;
    if (cursor_ + batch_ > order_.size()) reshuffle();
    std::span<const int> out(order_.data() + cursor_, batch_);
    cursor_ += batch_;
    return out;
  }

  bool full_batch() const noexcept { return full_; }

 private:
  void reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }

  std::vector<int> order_;
  std::size_t batch_;
  std::size_t cursor_ = 0;
  bool full_ = false;
  Rng rng_;
};

/// `rounds` sequential SGD steps, each on a fresh minibatch.
inline Eigen::VectorXd local_train(const ModelSpec& spec, Eigen::VectorXd w, const Dataset& data,
                                   int rounds, double eta, EpochSampler& sampler) {
  if (rounds < 1) throw Error("local training needs at least one round");
  for (int r = 0; r < rounds; ++r) {
    const auto lg = loss_and_grad(spec, w, data, sampler.next());
    w -= eta * lg.grad;
    if (!w.allFinite()) throw DivergenceError("parameters diverged during local training");
  }
  return w;
}

/// Closed-form minimiser of the quadratic model on `d`.
inline Eigen::VectorXd quadratic_optimum(const ModelSpec& spec, const Dataset& d) {
  if (spec.kind != ModelKind::quadratic) throw Error("closed-form optimum needs the quadratic model");
  const double n = static_cast<double>(d.size());
  Eigen::MatrixXd h = d.features.transpose() * d.features / n;
  h.diagonal().array() += spec.l2;
  const Eigen::VectorXd rhs = d.features.transpose() * d.labels / n;
  return h.ldlt().solve(rhs);
}

}  // namespace adfl
