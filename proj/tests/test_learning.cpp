#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "adfl/learning/constants.hpp"
#include "adfl/learning/dataset.hpp"
#include "adfl/learning/model.hpp"

using namespace adfl;

namespace {

ModelSpec spec_for(ModelKind kind, const Dataset& d, double l2 = 0.0, int hidden = 5) {
  ModelSpec s;
  s.kind = kind;
  s.l2 = l2;
  s.hidden = hidden;
  s.input_dim = static_cast<int>(d.dim());
  s.classes = d.classes;
  return s;
}

Dataset blobs(int n, int d, int classes, std::uint64_t seed, double sep = 5.0) {
  SyntheticOptions o;
  o.classes = classes;
  o.separation = sep;
  return make_synthetic(SyntheticTask::blobs_classification, n, d, seed, o);
}

Eigen::VectorXd random_vector(int k, Rng& rng, double scale = 0.5) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::VectorXd v(k);
  for (auto& x : v) x = g(rng);
  return v;
}

// Worst relative error of the analytic gradient against central differences.
double gradient_error(const ModelSpec& spec, const Eigen::VectorXd& w, const Dataset& d) {
  const auto rows = all_rows(d);
  const auto g = loss_and_grad(spec, w, d, rows).grad;
  Eigen::VectorXd fd(w.size());
  const double h = 1e-6;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    Eigen::VectorXd p = w, m = w;
    p[j] += h;
    m[j] -= h;
    fd[j] = (loss_and_grad(spec, p, d, rows).loss - loss_and_grad(spec, m, d, rows).loss) / (2 * h);
  }
  return (g - fd).norm() / std::max(1e-8, fd.norm());
}

}  // namespace

TEST(Synthetic, Deterministic) {
  const auto a = make_synthetic(SyntheticTask::quadratic, 50, 3, 9);
  const auto b = make_synthetic(SyntheticTask::quadratic, 50, 3, 9);
  const auto c = make_synthetic(SyntheticTask::quadratic, 50, 3, 10);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.features, c.features);
  EXPECT_NO_THROW(blobs(40, 3, 3, 1).validate());
}

TEST(Synthetic, QuadraticOptimumSolvesNormalEquations) {
  Dataset d;
  d.features = Eigen::MatrixXd::Identity(2, 2) * std::sqrt(2.0);  // X'X/n = I
  d.labels = Eigen::Vector2d(2.0, -4.0);
  const auto spec = spec_for(ModelKind::quadratic, d);
  const auto w = quadratic_optimum(spec, d);
  EXPECT_NEAR(w[0], std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(w[1], -2 * std::sqrt(2.0), 1e-12);
  EXPECT_LE(full_loss_and_grad(spec, w, d).grad.norm(), 1e-9);
}

TEST(Synthetic, BlobsAreLinearlySeparable) {
  const auto d = blobs(1000, 5, 2, 3, 10.0);
  const auto spec = spec_for(ModelKind::logistic_l2, d, 1e-3);
  Eigen::VectorXd w = initial_parameters(spec, 0);
  EpochSampler s(static_cast<int>(d.size()), static_cast<int>(d.size()), Rng{0});
  w = local_train(spec, w, d, 300, 0.5, s);
  EXPECT_GE(accuracy(spec, w, d), 0.99);
}

TEST(Partition, ConservesRows) {
  const auto d = blobs(503, 2, 4, 5);
  for (auto mode : {PartitionMode::iid, PartitionMode::shard, PartitionMode::dirichlet}) {
    const auto parts = partition_indices(d, 7, mode, 11, 1.0);
    std::vector<int> all;
    for (const auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    std::sort(all.begin(), all.end());
    ASSERT_EQ(all.size(), 503u) << to_string(mode);
    for (int j = 0; j < 503; ++j) EXPECT_EQ(all[j], j);
  }
}

TEST(Partition, IidIsStratified) {
  Dataset d;
  d.classes = 2;
  d.features = Eigen::MatrixXd::Zero(100, 1);
  d.labels.resize(100);
  for (int j = 0; j < 100; ++j) d.labels[j] = j % 2;
  const auto parts = partition(d, 2, PartitionMode::iid, 3);
  for (const auto& p : parts) {
    EXPECT_EQ(p.size(), 50);
    EXPECT_EQ(p.labels.sum(), 25.0);
  }
}

TEST(Partition, ShardSortsByLabel) {
  Dataset d;
  d.classes = 2;
  d.features = Eigen::MatrixXd::Zero(10, 1);
  d.labels.resize(10);
  for (int j = 0; j < 10; ++j) d.labels[j] = (j * 7) % 2;
  const auto parts = partition(d, 2, PartitionMode::shard, 0);
  EXPECT_EQ(parts[0].labels.sum(), 0.0);
  EXPECT_EQ(parts[1].labels.sum(), 5.0);
}

TEST(Partition, EmptyDeviceIsAnError) {
  const auto d = blobs(5, 2, 2, 1);
  EXPECT_THROW(partition(d, 6, PartitionMode::iid, 0), Error);
  // Extreme concentration leaves some device with nothing.
  const auto big = blobs(40, 2, 2, 1);
  EXPECT_THROW(partition(big, 20, PartitionMode::dirichlet, 4, 1e-3), Error);
}

TEST(Partition, DirichletSkewRaisesDivergence) {
  const auto d = blobs(4000, 4, 4, 21, 6.0);
  const auto spec = spec_for(ModelKind::logistic_l2, d, 1e-2);
  Rng rng{1};
  const Eigen::VectorXd w = random_vector(spec.parameter_count(), rng);
  auto delta = [&](double alpha) {
    const auto parts = partition(d, 8, PartitionMode::dirichlet, 9, alpha);
    Rng r{2};
    return estimate_constants(spec, w, parts, 1000, 1 << 30, 0.1, r).delta_sq;
  };
  EXPECT_GT(delta(0.1), delta(100.0));
}

TEST(Model, ParameterCounts) {
  const auto d = blobs(10, 3, 4, 1);
  EXPECT_EQ(spec_for(ModelKind::quadratic, d).parameter_count(), 3);
  EXPECT_EQ(spec_for(ModelKind::logistic_l2, d).parameter_count(), 16);
  EXPECT_EQ(spec_for(ModelKind::mlp_small, d, 0, 5).parameter_count(), 4 * 5 + 6 * 4);
}

TEST(Model, ZeroLogisticIsLn2) {
  const auto d = blobs(64, 3, 2, 2);
  const auto spec = spec_for(ModelKind::logistic_l2, d, 0.5);
  EXPECT_NEAR(full_loss_and_grad(spec, initial_parameters(spec, 0), d).loss, std::log(2.0), 1e-15);
}

TEST(Model, GradientsMatchFiniteDifferences) {
  Rng rng{17};
  const auto q = make_synthetic(SyntheticTask::quadratic, 30, 4, 2);
  const auto c = blobs(30, 4, 3, 2);
  for (int trial = 0; trial < 20; ++trial) {
    for (auto [kind, data, l2] : {std::tuple{ModelKind::quadratic, &q, 0.1},
                                  std::tuple{ModelKind::logistic_l2, &c, 0.01},
                                  std::tuple{ModelKind::mlp_small, &c, 0.01}}) {
      const auto spec = spec_for(kind, *data, l2);
      const auto w = random_vector(spec.parameter_count(), rng);
      EXPECT_LE(gradient_error(spec, w, *data), 1e-5) << to_string(kind);
    }
  }
}

TEST(Model, DivergenceDetected) {
  const auto q = make_synthetic(SyntheticTask::quadratic, 30, 4, 2);
  const auto spec = spec_for(ModelKind::quadratic, q);
  EpochSampler s(30, 30, Rng{0});
  EXPECT_THROW(local_train(spec, Eigen::VectorXd::Ones(4), q, 5000, 50.0, s), DivergenceError);
}

TEST(LocalTrain, OneFullBatchStepIsGradientDescent) {
  const auto q = make_synthetic(SyntheticTask::quadratic, 40, 3, 4);
  const auto spec = spec_for(ModelKind::quadratic, q, 0.05);
  const Eigen::VectorXd w0 = Eigen::Vector3d(0.3, -1.0, 2.0);
  EpochSampler s(40, 100, Rng{0});
  const auto w1 = local_train(spec, w0, q, 1, 0.1, s);
  EXPECT_EQ(w1, w0 - 0.1 * full_loss_and_grad(spec, w0, q).grad);

  // Five rounds equal five independently composed steps.
  Eigen::VectorXd w = w0;
  for (int k = 0; k < 5; ++k) w -= 0.1 * full_loss_and_grad(spec, w, q).grad;
  EXPECT_EQ(local_train(spec, w0, q, 5, 0.1, s), w);

  EXPECT_EQ(local_train(spec, w0, q, 7, 0.0, s), w0);
  EXPECT_THROW(local_train(spec, w0, q, 0, 0.1, s), Error);
}

TEST(Sampler, EpochsCoverEveryRowOnce) {
  EpochSampler s(12, 4, Rng{3});
  std::map<int, int> seen;
  for (int b = 0; b < 3; ++b)
    for (int j : s.next()) ++seen[j];
  EXPECT_EQ(seen.size(), 12u);
  for (const auto& [j, count] : seen) EXPECT_EQ(count, 1);
}

TEST(Constants, QuadraticSpectrumIsExact) {
  // X'X/n = diag(1, 4).
  Dataset d;
  d.features.resize(2, 2);
  d.features << std::sqrt(2.0), 0, 0, std::sqrt(8.0);
  d.labels = Eigen::Vector2d(1, 1);
  const auto cv = curvature(spec_for(ModelKind::quadratic, d), d);
  EXPECT_NEAR(cv.m, 1.0, 1e-12);
  EXPECT_NEAR(cv.M, 4.0, 1e-12);
  EXPECT_TRUE(cv.exact);
}

TEST(Constants, FullBatchHasNoVariance) {
  const auto q = make_synthetic(SyntheticTask::quadratic, 200, 3, 4);
  const auto parts = partition(q, 4, PartitionMode::iid, 1);
  const auto spec = spec_for(ModelKind::quadratic, q);
  Rng rng{0};
  const auto c = estimate_constants(spec, Eigen::VectorXd::Zero(3), parts, 10000, 1 << 30, 0.1, rng);
  EXPECT_EQ(c.sigma, 0.0);
  EXPECT_TRUE(c.moments_exact);
  EXPECT_TRUE(c.m_exact && c.M_exact);
}

TEST(Constants, IidDivergenceSmall) {
  const auto d = blobs(8000, 5, 2, 8, 6.0);
  const auto spec = spec_for(ModelKind::logistic_l2, d, 1e-2);
  const auto parts = partition(d, 4, PartitionMode::iid, 3);
  Rng rng{4};
  const Eigen::VectorXd w = random_vector(spec.parameter_count(), rng, 0.2);
  const auto c = estimate_constants(spec, w, parts, 10000, 16, 0.05, rng);
  EXPECT_LE(c.delta_sq, 0.05 * c.G);
  EXPECT_GT(c.sigma, 0.0);
  EXPECT_GE(c.delta_m * c.delta_m, c.delta_sq - 1e-15);
}

TEST(Constants, MlpHasNoStrongConvexity) {
  const auto d = blobs(60, 3, 3, 8);
  const auto spec = spec_for(ModelKind::mlp_small, d, 1e-2);
  const auto parts = partition(d, 2, PartitionMode::iid, 3);
  Rng rng{4};
  const auto c = estimate_constants(spec, initial_parameters(spec, 1), parts, 200, 8, 0.05, rng);
  EXPECT_FALSE(c.m_available);
  EXPECT_GT(c.M, 0.0);
  EXPECT_THROW(curvature(spec, d), Error);
}

TEST(Properties, MinibatchGradientIsUnbiased) {
  const auto d = blobs(300, 3, 3, 12);
  const auto spec = spec_for(ModelKind::logistic_l2, d, 1e-2);
  Rng rng{5};
  const Eigen::VectorXd w = random_vector(spec.parameter_count(), rng);
  const auto full = full_loss_and_grad(spec, w, d).grad;
  const int draws = 10000;
  EpochSampler s(300, 7, Rng{6});
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(w.size()), sq = Eigen::VectorXd::Zero(w.size());
  for (int k = 0; k < draws; ++k) {
    const auto g = loss_and_grad(spec, w, d, s.next()).grad;
    mean += g;
    sq += g.cwiseProduct(g);
  }
  mean /= draws;
  const Eigen::VectorXd var = sq / draws - mean.cwiseProduct(mean);
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double se = std::sqrt(std::max(var[j], 0.0) / draws);
    EXPECT_LE(std::abs(mean[j] - full[j]), 4 * se + 1e-12) << "coordinate " << j;
  }
}

TEST(Properties, QuadraticStrongConvexity) {
  const auto q = make_synthetic(SyntheticTask::quadratic, 100, 4, 7);
  const auto spec = spec_for(ModelKind::quadratic, q, 0.01);
  const double m = curvature(spec, q).m;
  Rng rng{8};
  for (int k = 0; k < 100; ++k) {
    const auto w = random_vector(4, rng, 2.0), v = random_vector(4, rng, 2.0);
    const auto fv = full_loss_and_grad(spec, v, q);
    const double lhs = full_loss_and_grad(spec, w, q).loss;
    const double rhs = fv.loss + fv.grad.dot(w - v) + 0.5 * m * (w - v).squaredNorm();
    EXPECT_GE(lhs, rhs - 1e-10 * std::abs(lhs));
  }
}

TEST(Loaders, CsvRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "adfl_loader.csv";
  {
    std::ofstream out(path);
    out << "label,x1,x2\n1,0.5,-1\n0,2,3\n";
  }
  const auto d = load_csv(path.string(), 2);
  EXPECT_EQ(d.size(), 2);
  EXPECT_EQ(d.dim(), 2);
  EXPECT_EQ(d.label(0), 1);
  EXPECT_DOUBLE_EQ(d.features(1, 1), 3.0);
  std::filesystem::remove(path);
  EXPECT_THROW(load_csv("/nonexistent/file.csv", 2), Error);
}
