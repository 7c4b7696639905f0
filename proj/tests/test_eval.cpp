#include <gtest/gtest.h>

#include <random>
#include <set>

#include "genmil/eval.hpp"
#include "genmil/io.hpp"
#include "oracles.hpp"
#include "random_models.hpp"

using namespace genmil;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::kIo;
}

MatrixXd correlated_rows(int n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const MatrixXd cov = oracle::random_spd(p, rng);
  return oracle::gaussian_rows(n, VectorXd::LinSpaced(p, -1.0, 3.0), cov, rng);
}

// Small well-separated three-class dataset; bags hold 6-10 instances.
Dataset small_synthetic(std::uint64_t seed, int bags = 24) {
  GeneratorConfig config = default_synthetic_config(seed);
  config.bag_count = bags;
  config.bag_size_min = 6;
  config.bag_size_max = 10;
  return generate_synthetic(config);
}

}  // namespace

TEST(Pca, PlanarDataHasRankTwo) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  MatrixXd basis(2, 5);
  basis << 1, 2, 0, -1, 0.5, 0, 1, 1, 3, -2;
  MatrixXd coef(300, 2);
  for (int r = 0; r < 300; ++r) coef.row(r) << 3 * z(rng), z(rng);
  const MatrixXd x = coef * basis;
  for (SpectrumMeasure m : {SpectrumMeasure::kVariance, SpectrumMeasure::kSingularValue}) {
    for (double thr : {0.2, 0.5, 0.9, 0.99, 1.0}) {
      const PcaTransform pca = fit_pca(x, thr, m);
      EXPECT_LE(pca.output_dim(), 2) << thr;
      EXPECT_GE(pca.retained_fraction, thr - 1e-12);
    }
    EXPECT_EQ(fit_pca(x, 1.0, m).output_dim(), 2);
    EXPECT_EQ(fit_pca(x, 0.999, m).output_dim(), 2);
  }
}

TEST(Pca, FullThresholdKeepsEveryComponent) {
  const MatrixXd x = correlated_rows(200, 6, 1);
  for (SpectrumMeasure m : {SpectrumMeasure::kVariance, SpectrumMeasure::kSingularValue})
    EXPECT_EQ(fit_pca(x, 1.0, m).output_dim(), 6);
}

TEST(Pca, ComponentsOrthonormalAndVariancesDescending) {
  const MatrixXd x = correlated_rows(500, 7, 2);
  const PcaTransform pca = fit_pca(x, 0.95, SpectrumMeasure::kVariance);
  const MatrixXd gram = pca.components.transpose() * pca.components;
  EXPECT_TRUE(gram.isApprox(MatrixXd::Identity(gram.rows(), gram.cols()), 1e-10));
  const MatrixXd y = pca.apply(x);
  const auto [mean, var] = oracle::moments(y);
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    EXPECT_NEAR(mean[c], 0.0, 1e-10);
    if (c > 0) EXPECT_LE(var[c], var[c - 1] + 1e-12);
    // Sample variance (n-1) of a projection equals its eigenvalue.
    EXPECT_NEAR(var[c] * 500.0 / 499.0, pca.spectrum[c], 1e-9 * pca.spectrum[0]);
  }
  // Variance share from the eigenvalues alone.
  const double share = pca.spectrum.head(pca.output_dim()).sum() / pca.spectrum.sum();
  EXPECT_NEAR(share, pca.retained_fraction, 1e-12);
  EXPECT_GE(pca.retained_fraction, 0.95);
  EXPECT_NEAR(pca.spectrum.sum(), 7.0, 1e-9);
}

TEST(Pca, SingularValueMeasureKeepsAtLeastAsMany) {
  const MatrixXd x = correlated_rows(400, 10, 4);
  for (double thr : {0.5, 0.8, 0.9, 0.95}) {
    const auto var = fit_pca(x, thr, SpectrumMeasure::kVariance);
    const auto sv = fit_pca(x, thr, SpectrumMeasure::kSingularValue);
    EXPECT_GE(sv.output_dim(), var.output_dim());
    const VectorXd root = sv.spectrum.cwiseSqrt();
    EXPECT_NEAR(sv.retained_fraction, root.head(sv.output_dim()).sum() / root.sum(), 1e-12);
  }
}

TEST(Pca, DropsConstantFeaturesAndValidates) {
  MatrixXd x = correlated_rows(50, 4, 5);
  x.col(2).setConstant(7.0);
  const PcaTransform pca = fit_pca(x, 1.0);
  EXPECT_EQ(pca.dropped_features(), 1);
  EXPECT_EQ(pca.kept_features, (std::vector<int>{0, 1, 3}));
  EXPECT_EQ(pca.output_dim(), 3);
  EXPECT_EQ(pca.apply(x).cols(), 3);
  EXPECT_EQ(kind_of([&] { fit_pca(x, 0.0); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([&] { fit_pca(x, 1.5); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([&] { fit_pca(x.topRows(1), 0.9); }), ErrorKind::kInsufficientData);
  EXPECT_EQ(kind_of([&] { pca.apply(MatrixXd::Zero(2, 3)); }), ErrorKind::kDimensionMismatch);
}

TEST(MajorityVote, TiesGoToLowerLabel) {
  EXPECT_EQ(majority_vote(std::vector<Label>{1, 2, 2, 1}, 2), 1);
  EXPECT_EQ(majority_vote(std::vector<Label>{3, 2, 2, 3}, 3), 2);
  EXPECT_EQ(majority_vote(std::vector<Label>{3, 3, 1}, 3), 3);
}

TEST(Lobo, EveryBagHeldOutOnce) {
  const Dataset data = small_synthetic(1);
  EvalConfig config;
  const EvalReport r = leave_one_bag_out(data, config);
  EXPECT_EQ(r.folds, static_cast<int>(data.size()));
  std::set<std::size_t> seen;
  for (const auto& p : r.predictions) {
    seen.insert(p.bag_index);
    EXPECT_EQ(p.bag_id, data.bag(p.bag_index).id);
    EXPECT_EQ(p.true_label, *data.bag(p.bag_index).label);
  }
  EXPECT_EQ(seen.size(), data.size());
  EXPECT_EQ(r.evaluated_folds + r.degenerate_folds, r.folds);
  // Confusion rows sum to the per-class truth counts of evaluated folds.
  Eigen::VectorXi truth = Eigen::VectorXi::Zero(3);
  for (const auto& p : r.predictions)
    if (!p.degenerate) truth[p.true_label - 1] += 1;
  EXPECT_EQ(Eigen::VectorXi(r.bag_confusion.rowwise().sum()), truth);
  EXPECT_GE(r.bag_accuracy, 0.9);
  ASSERT_TRUE(r.instance_accuracy.has_value());
  EXPECT_GE(*r.instance_accuracy, 0.9);
  EXPECT_TRUE(r.train_loglik.has_value());
}

TEST(Lobo, HeldOutLabelIsNeverUsed) {
  const Dataset data = small_synthetic(2, 16);
  EvalConfig config;
  const EvalReport base = leave_one_bag_out(data, config);
  for (std::size_t v : {0u, 5u, 11u}) {
    std::vector<Bag> bags = data.bags();
    bags[v].label = *bags[v].label % 3 + 1;
    const Dataset mutated(std::move(bags), data.domain());
    const EvalReport r = leave_one_bag_out(mutated, config);
    EXPECT_EQ(r.predictions[v].predicted_label, base.predictions[v].predicted_label);
    EXPECT_EQ(r.predictions[v].instance_labels, base.predictions[v].instance_labels);
  }
}

TEST(Lobo, PcaIsFittedOnTrainingBagsOnly) {
  const Dataset data = small_synthetic(3, 12);
  EvalConfig config;
  config.pca_threshold = 0.9;
  const EvalReport r = leave_one_bag_out(data, config);
  for (std::size_t v : {0u, 7u}) {
    const FullFit fit = train_full(data.without(v), config);
    ASSERT_TRUE(fit.pca.has_value());
    const auto expect = infer(fit.result.model, fit.pca->apply(data.bag(v).instances));
    EXPECT_EQ(r.predictions[v].predicted_label, expect.bag_label);
    EXPECT_EQ(r.predictions[v].instance_labels, expect.instance_labels);
  }
}

TEST(Lobo, ReproducibleAcrossThreadCounts) {
  const Dataset data = small_synthetic(4, 12);
  EvalConfig config;
  config.em.model = ModelKind::kFib;
  config.em.classifier = ClassifierKind::kKnn;
  config.threads = 1;
  const EvalReport a = leave_one_bag_out(data, config);
  config.threads = 3;
  const EvalReport b = leave_one_bag_out(data, config);
  EXPECT_EQ(a.bag_accuracy, b.bag_accuracy);
  EXPECT_EQ(a.instance_accuracy, b.instance_accuracy);
  EXPECT_EQ(a.train_loglik, b.train_loglik);
  for (std::size_t v = 0; v < data.size(); ++v)
    EXPECT_EQ(a.predictions[v].instance_labels, b.predictions[v].instance_labels);
}

TEST(Lobo, SingletonClassFoldIsDegenerate) {
  Dataset base = small_synthetic(5, 20);
  std::vector<Bag> bags;
  bool kept_three = false;
  for (const Bag& b : base.bags()) {
    if (*b.label == 3) {
      if (kept_three) continue;
      kept_three = true;
    }
    bags.push_back(b);
  }
  ASSERT_TRUE(kept_three);
  const Dataset data(std::move(bags), base.domain());
  EvalConfig config;
  config.em.model = ModelKind::kFib;
  config.em.classifier = ClassifierKind::kKnn;
  const EvalReport r = leave_one_bag_out(data, config);
  EXPECT_EQ(r.degenerate_folds, 1);
  EXPECT_EQ(r.evaluated_folds, static_cast<int>(data.size()) - 1);
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings.front().find("class 3"), std::string::npos);
}

TEST(Lobo, AllNormalDataIsPerfect) {
  std::mt19937_64 rng(6);
  std::vector<Bag> bags;
  for (int v = 0; v < 8; ++v)
    bags.push_back(Bag{"b" + std::to_string(v), 1, testing_models::random_instances(5, 2, rng), std::nullopt});
  const Dataset data(std::move(bags), LabelDomain(2));
  EvalConfig config;
  config.em.model = ModelKind::kFib;
  config.em.classifier = ClassifierKind::kKnn;
  const EvalReport r = leave_one_bag_out(data, config);
  EXPECT_EQ(r.evaluated_folds, 8);
  EXPECT_EQ(r.bag_accuracy, 1.0);
  EXPECT_EQ(kind_of([&] { leave_one_bag_out(data.subset(std::vector<std::size_t>{0}), config); }),
            ErrorKind::kInsufficientData);
}

TEST(Baseline, MatchesMilWhenInstancesShareBagLabel) {
  GeneratorConfig gen = default_synthetic_config(7);
  gen.bag_count = 20;
  gen.bag_size_min = 6;
  gen.bag_size_max = 10;
  gen.instance_table = MatrixXd::Identity(3, 3);
  gen.normal_fraction_range.reset();
  const Dataset data = generate_synthetic(gen);
  EvalConfig config;
  const EvalReport mil = leave_one_bag_out(data, config);
  const EvalReport base = non_mil_baseline(data, config);
  EXPECT_EQ(base.model_name, "non-MIL/qda");
  EXPECT_NEAR(base.bag_accuracy, mil.bag_accuracy, 0.05);
  EXPECT_NEAR(*base.instance_accuracy, *mil.instance_accuracy, 0.05);
}

TEST(Baseline, PredictionsAreMajorityVotes) {
  const Dataset data = small_synthetic(8, 12);
  const EvalReport r = non_mil_baseline(data, EvalConfig{});
  for (const auto& p : r.predictions)
    if (!p.degenerate) EXPECT_EQ(p.predicted_label, majority_vote(p.instance_labels, 3));
  // Disordered bags with many normal instances are often outvoted.
  const EvalReport mil = leave_one_bag_out(data, EvalConfig{});
  EXPECT_LT(*r.instance_accuracy, *mil.instance_accuracy);
}
