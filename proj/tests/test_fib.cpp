#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "genmil/fib.hpp"
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

Bag bag_with(std::string id, Label b, MatrixXd x) {
  return Bag{std::move(id), b, std::move(x), std::nullopt};
}

// A logistic model whose feature k is log P(k+1|f) - log P(t|f), so any
// probability table can be fed in as instances.
FibParams identity_fib(int t) {
  MatrixXd w = MatrixXd::Zero(t - 1, t);
  w.rightCols(t - 1) = MatrixXd::Identity(t - 1, t - 1);
  DensityModel fd(DensityKind::kGaussian,
                  GaussianDensity(VectorXd::Zero(t - 1), MatrixXd::Identity(t - 1, t - 1), false));
  return FibParams(fd, ClassProbModel(LogisticModel(w, 0.0)));
}

MatrixXd encode(const MatrixXd& proba) {
  const auto t = proba.cols();
  MatrixXd x(proba.rows(), t - 1);
  for (Eigen::Index j = 0; j < proba.rows(); ++j)
    for (Eigen::Index c = 0; c + 1 < t; ++c) x(j, c) = std::log(proba(j, c)) - std::log(proba(j, t - 1));
  return x;
}

MatrixXd random_proba(int m, int t, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(0.7, 1.0);
  MatrixXd p(m, t);
  for (int j = 0; j < m; ++j) {
    for (int c = 0; c < t; ++c) p(j, c) = g(rng) + 1e-4;
    p.row(j) /= p.row(j).sum();
  }
  return p;
}

}  // namespace

TEST(FibBestFeasible, MatchesExhaustiveFeasibleArgmax) {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> tdist(2, 4), mdist(1, 8);
  for (int trial = 0; trial < 1000; ++trial) {
    const int t = tdist(rng), m = mdist(rng);
    const MatrixXd lp = random_proba(m, t, rng).array().log();
    for (Label b = 1; b <= t; ++b) {
      const auto got = fib_best_feasible(lp, b);
      ASSERT_EQ(bag_label_of(got, LabelDomain(t)), b);
      const auto ref = oracle::fib_brute_feasible(lp, b);
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += lp(j, got[j] - 1);
      ASSERT_NEAR(s, ref.score, 1e-10 * (1.0 + std::abs(ref.score)));
      if (ref.ties == 1) ASSERT_EQ(got, ref.labels);
    }
  }
}

TEST(FibBestFeasible, Examples) {
  MatrixXd lp(2, 2);
  lp << std::log(0.9), std::log(0.1), std::log(0.9), std::log(0.1);
  EXPECT_EQ(fib_best_feasible(lp, 1), (std::vector<Label>{1, 1}));
  // Equal flip gains: the lower index is flipped.
  EXPECT_EQ(fib_best_feasible(lp, 2), (std::vector<Label>{2, 1}));
  lp(1, 1) = std::log(0.15);
  lp(1, 0) = std::log(0.85);
  EXPECT_EQ(fib_best_feasible(lp, 2), (std::vector<Label>{1, 2}));
  EXPECT_EQ(kind_of([&] { fib_best_feasible(lp, 3); }), ErrorKind::kInvalidLabel);
}

TEST(FibEStep, UsesClassifierProbabilities) {
  const FibParams params = identity_fib(3);
  MatrixXd p(3, 3);
  p << 0.6, 0.1, 0.3, 0.2, 0.1, 0.7, 0.5, 0.45, 0.05;
  const Bag bag = bag_with("x", 3, encode(p));
  EXPECT_EQ(fib_e_step(params, bag), (std::vector<Label>{1, 3, 1}));
  const Bag two = bag_with("x", 2, encode(p));
  // Nobody prefers 2 over 1, so the smallest loss (index 2) flips.
  EXPECT_EQ(fib_e_step(params, two), (std::vector<Label>{1, 1, 2}));
  EXPECT_EQ(kind_of([&] { fib_e_step(params, Bag{"u", std::nullopt, encode(p), std::nullopt}); }),
            ErrorKind::kInvalidInput);
}

TEST(FibInfer, UniformClassifierReturnsNormal) {
  const FibParams params = identity_fib(3);
  const auto r = fib_infer(params, MatrixXd::Zero(4, 2));
  EXPECT_EQ(r.bag_label, 1);
  EXPECT_EQ(r.instance_labels, (std::vector<Label>{1, 1, 1, 1}));
  EXPECT_NEAR(r.log_scores[0], 4 * std::log(1.0 / 3.0), 1e-12);
  EXPECT_NEAR(r.log_scores[1], r.log_scores[0], 1e-12);
}

TEST(FibInfer, ConfidentAbnormalInstanceWins) {
  const FibParams params = identity_fib(3);
  MatrixXd p(3, 3);
  p << 0.05, 0.05, 0.9, 0.98, 0.01, 0.01, 0.97, 0.02, 0.01;
  const auto r = fib_infer(params, encode(p));
  EXPECT_EQ(r.bag_label, 3);
  EXPECT_EQ(r.instance_labels, (std::vector<Label>{3, 1, 1}));
  // Hand scores: b=1 uses column 1; b=2 flips instance 0 (best gain 0).
  const double s1 = std::log(0.05) + std::log(0.98) + std::log(0.97);
  const double s2 = std::log(0.05) + std::log(0.98) + std::log(0.97);
  const double s3 = std::log(0.9) + std::log(0.98) + std::log(0.97);
  EXPECT_NEAR(r.log_scores[0], s1, 1e-9);
  EXPECT_NEAR(r.log_scores[1], s2, 1e-9);
  EXPECT_NEAR(r.log_scores[2], s3, 1e-9);
}

TEST(FibInfer, MatchesExhaustiveJointMax) {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<int> tdist(2, 4), mdist(1, 6);
  for (int trial = 0; trial < 1000; ++trial) {
    const int t = tdist(rng), m = mdist(rng);
    const FibParams params = identity_fib(t);
    const MatrixXd x = encode(random_proba(m, t, rng));
    const MatrixXd lp = params.instance_classifier().predict_log_proba_rows(x);
    oracle::Best ref;
    for (Label b = 1; b <= t; ++b) {
      const auto inner = oracle::fib_brute_feasible(lp, b);
      oracle::consider(ref, inner.score, inner.labels, b);
    }
    const auto got = fib_infer(params, x);
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += lp(j, got.instance_labels[j] - 1);
    ASSERT_NEAR(s, ref.score, 1e-10 * (1.0 + std::abs(ref.score)));
    ASSERT_EQ(bag_label_of(got.instance_labels, LabelDomain(t)), got.bag_label);
    if (ref.ties == 1) ASSERT_EQ(got.bag_label, ref.bag);
  }
}

TEST(FibInfer, InstanceOrderDoesNotChangeBagLabel) {
  std::mt19937_64 rng(2);
  const FibParams params = identity_fib(3);
  for (int trial = 0; trial < 200; ++trial) {
    const MatrixXd x = encode(random_proba(6, 3, rng));
    const MatrixXd rev = x.colwise().reverse();
    EXPECT_EQ(fib_infer(params, x).bag_label, fib_infer(params, rev).bag_label);
  }
}

TEST(FibEstimate, DeterministicAndReusesDensity) {
  std::mt19937_64 rng(4);
  const Dataset data = testing_models::random_dataset(3, 2, 30, rng, 5, 10);
  const Labeling init = initial_labeling(data);
  const FibParams a = fib_estimate(data, init, ClassifierKind::kLogistic, DensityKind::kKde);
  const FibParams b = fib_estimate(data, init, ClassifierKind::kLogistic, DensityKind::kKde);
  EXPECT_TRUE(std::get<LogisticModel>(a.instance_classifier().model()).weights() ==
              std::get<LogisticModel>(b.instance_classifier().model()).weights());

  Labeling next;
  for (const Bag& bag : data.bags()) next.push_back(fib_e_step(a, bag));
  const FibParams c = fib_estimate(data, next, ClassifierKind::kLogistic, DensityKind::kKde, {},
                                   a.feature_density());
  EXPECT_DOUBLE_EQ(fib_feature_loglik(a, data), fib_feature_loglik(c, data));
}

TEST(FibEstimate, GoldLabelsGiveAccurateClassifier) {
  VectorXd prior = VectorXd::Constant(3, 1.0 / 3.0);
  MatrixXd table(3, 3);
  table << 1, 0, 0, 0.5, 0.5, 0, 0.5, 0, 0.5;
  std::vector<DensityModel> dens;
  for (double mu : {0.0, 6.0, -6.0})
    dens.emplace_back(DensityKind::kGaussian,
                      GaussianDensity(VectorXd::Constant(2, mu), MatrixXd::Identity(2, 2), false));
  const BifParams gen(prior, table, std::move(dens));
  const Dataset sampled = bif_sample(gen, 60, uniform_bag_size(15, 25), 10);
  // Relabel bags by the max rule so gold labels are feasible for their bags.
  std::vector<Bag> bags = sampled.bags();
  Labeling gold;
  for (Bag& b : bags) {
    b.label = bag_label_of(*b.gold_labels, sampled.domain());
    gold.push_back(*b.gold_labels);
  }
  const Dataset data(std::move(bags), sampled.domain());
  for (ClassifierKind kind : {ClassifierKind::kLogistic, ClassifierKind::kKnn, ClassifierKind::kQda}) {
    const FibParams params = fib_estimate(data, gold, kind, DensityKind::kKde);
    int correct = 0, total = 0;
    for (std::size_t v = 0; v < data.size(); ++v) {
      const MatrixXd lp = params.instance_classifier().predict_log_proba_rows(data.bag(v).instances);
      for (Eigen::Index j = 0; j < lp.rows(); ++j, ++total) {
        Eigen::Index arg;
        lp.row(j).maxCoeff(&arg);
        correct += static_cast<Label>(arg + 1) == gold[v][static_cast<std::size_t>(j)];
      }
    }
    EXPECT_GE(static_cast<double>(correct) / total, 0.95) << to_string(kind);
  }
}

TEST(FibLoglik, DecompositionAndErrors) {
  const FibParams params = identity_fib(2);
  MatrixXd p(2, 2);
  p << 0.7, 0.3, 0.4, 0.6;
  const MatrixXd x = encode(p);
  Dataset data({bag_with("a", 2, x)}, LabelDomain(2));
  const double log_pf = oracle::mvn_log_pdf(x.row(0).transpose(), VectorXd::Zero(1), MatrixXd::Identity(1, 1)) +
                        oracle::mvn_log_pdf(x.row(1).transpose(), VectorXd::Zero(1), MatrixXd::Identity(1, 1));
  EXPECT_NEAR(fib_loglik(params, data, {{1, 2}}), std::log(0.7) + std::log(0.6) + log_pf, 1e-12);
  EXPECT_NEAR(fib_feature_loglik(params, data), log_pf, 1e-12);
  EXPECT_EQ(kind_of([&] { fib_loglik(params, data, {{1, 1}}); }), ErrorKind::kInvalidState);
  EXPECT_EQ(kind_of([&] { fib_loglik(params, data, {{1}}); }), ErrorKind::kInvalidState);

  // Removing a bag with a negative contribution lowers the total.
  Dataset two({bag_with("a", 2, x), bag_with("b", 1, x)}, LabelDomain(2));
  const double both = fib_loglik(params, two, {{1, 2}, {1, 1}});
  EXPECT_LT(both, fib_loglik(params, data, {{1, 2}}));
}

TEST(FibLoglik, EStepNeverDecreasesAtFixedParameters) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const Dataset data = testing_models::random_dataset(3, 2, 15, rng, 3, 8);
    std::vector<bool> seen(3, false);
    for (const Bag& bag : data.bags()) seen[*bag.label - 1] = true;
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) continue;
    const Labeling init = initial_labeling(data);
    for (ClassifierKind kind : {ClassifierKind::kLogistic, ClassifierKind::kKnn, ClassifierKind::kQda}) {
      const FibParams params = fib_estimate(data, init, kind, DensityKind::kGaussian);
      Labeling next;
      for (const Bag& bag : data.bags()) {
        next.push_back(fib_e_step(params, bag));
        ASSERT_EQ(bag_label_of(next.back(), data.domain()), *bag.label);
      }
      EXPECT_GE(fib_loglik(params, data, next), fib_loglik(params, data, init) - 1e-9);
    }
  }
}
