#include <gtest/gtest.h>

#include "genmil/core.hpp"

using namespace genmil;

namespace {

Bag make_bag(std::string id, std::optional<Label> label, int m, int p, double fill = 0.0) {
  return Bag{std::move(id), label, MatrixXd::Constant(m, p, fill), std::nullopt};
}

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

}  // namespace

TEST(LabelDomain, RejectsFewerThanTwoClasses) {
  EXPECT_EQ(kind_of([] { LabelDomain d(1); }), ErrorKind::kInvalidInput);
  LabelDomain d(3);
  EXPECT_TRUE(d.contains(1));
  EXPECT_TRUE(d.contains(3));
  EXPECT_FALSE(d.contains(0));
  EXPECT_FALSE(d.contains(4));
  EXPECT_EQ(kind_of([&] { d.check(0); }), ErrorKind::kInvalidLabel);
}

TEST(Compatibility, Examples) {
  LabelDomain d(3);
  EXPECT_TRUE(is_compatible(1, 3, d));
  EXPECT_TRUE(is_compatible(2, 2, d));
  EXPECT_FALSE(is_compatible(2, 3, d));
  EXPECT_FALSE(is_compatible(3, 1, d));
  EXPECT_EQ(kind_of([&] { is_compatible(4, 1, d); }), ErrorKind::kInvalidLabel);
  EXPECT_EQ(kind_of([&] { is_compatible(1, 0, d); }), ErrorKind::kInvalidLabel);
}

TEST(Feasibility, Examples) {
  LabelDomain d(3);
  EXPECT_TRUE(is_feasible(std::vector<Label>{1, 1, 1}, d));
  EXPECT_TRUE(is_feasible(std::vector<Label>{1, 2, 2, 1}, d));
  EXPECT_FALSE(is_feasible(std::vector<Label>{2, 3}, d));
  EXPECT_EQ(kind_of([&] { is_feasible(std::vector<Label>{}, d); }), ErrorKind::kInvalidInput);
}

TEST(BagLabelOf, Examples) {
  LabelDomain d(3);
  EXPECT_EQ(bag_label_of(std::vector<Label>{1, 1, 1}, d), 1);
  EXPECT_EQ(bag_label_of(std::vector<Label>{1, 2, 1}, d), 2);
  EXPECT_EQ(bag_label_of(std::vector<Label>{2, 3}, d), kInfeasibleLabel);
  EXPECT_EQ(kind_of([&] { bag_label_of(std::vector<Label>{}, d); }), ErrorKind::kInvalidInput);
  EXPECT_EQ(kind_of([&] { bag_label_of(std::vector<Label>{1, 5}, d); }), ErrorKind::kInvalidLabel);
}

TEST(BagLabelOf, AgreesWithCompatibilityOnEveryShortVector) {
  // A vector is feasible for b exactly when every entry is compatible with b
  // and the max rule recovers b.
  LabelDomain d(4);
  for (int code = 0; code < 4 * 4 * 4; ++code) {
    std::vector<Label> v{code % 4 + 1, (code / 4) % 4 + 1, code / 16 + 1};
    const Label b = bag_label_of(v, d);
    EXPECT_EQ(b != kInfeasibleLabel, is_feasible(v, d));
    for (Label cand = 1; cand <= 4; ++cand) {
      bool all = true;
      for (Label l : v) all = all && is_compatible(l, cand, d);
      const bool reaches = all && *std::max_element(v.begin(), v.end()) == cand;
      EXPECT_EQ(reaches, b == cand);
    }
  }
}

TEST(Dataset, ValidatesShapesAndLabels) {
  LabelDomain d(2);
  EXPECT_EQ(kind_of([&] { Dataset({}, d); }), ErrorKind::kInvalidInput);
  EXPECT_EQ(kind_of([&] { Dataset({make_bag("a", 1, 2, 3), make_bag("b", 1, 2, 4)}, d); }),
            ErrorKind::kDimensionMismatch);
  EXPECT_EQ(kind_of([&] { Dataset({make_bag("a", 3, 2, 3)}, d); }), ErrorKind::kInvalidLabel);
  EXPECT_EQ(kind_of([&] { Dataset({make_bag("a", 1, 0, 3)}, d); }), ErrorKind::kInvalidInput);
  Bag nan_bag = make_bag("a", 1, 2, 2);
  nan_bag.instances(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(kind_of([&] { Dataset({nan_bag}, d); }), ErrorKind::kInvalidInput);
  Bag gold = make_bag("a", 1, 2, 2);
  gold.gold_labels = std::vector<Label>{1};
  EXPECT_EQ(kind_of([&] { Dataset({gold}, d); }), ErrorKind::kInvalidInput);
}

TEST(Dataset, PoolingAndSubsets) {
  LabelDomain d(3);
  Dataset data({make_bag("a", 1, 2, 2, 1.0), make_bag("b", 2, 3, 2, 2.0), make_bag("c", 3, 1, 2, 3.0)}, d);
  EXPECT_EQ(data.size(), 3u);
  EXPECT_EQ(data.dim(), 2);
  EXPECT_EQ(data.instance_count(), 6u);
  EXPECT_TRUE(data.all_labeled());
  EXPECT_FALSE(data.has_gold_labels());
  const MatrixXd pooled = data.pooled_instances();
  ASSERT_EQ(pooled.rows(), 6);
  EXPECT_EQ(pooled(0, 0), 1.0);
  EXPECT_EQ(pooled(2, 0), 2.0);
  EXPECT_EQ(pooled(5, 1), 3.0);

  Dataset rest = data.without(1);
  ASSERT_EQ(rest.size(), 2u);
  EXPECT_EQ(rest.bag(0).id, "a");
  EXPECT_EQ(rest.bag(1).id, "c");
  const std::vector<std::size_t> pick{2, 0};
  Dataset sub = data.subset(pick);
  EXPECT_EQ(sub.bag(0).id, "c");
  EXPECT_EQ(sub.domain(), d);

  Labeling init = initial_labeling(data);
  ASSERT_EQ(init.size(), 3u);
  EXPECT_EQ(init[1], (std::vector<Label>{2, 2, 2}));
  EXPECT_EQ(init[2], (std::vector<Label>{3}));
}

TEST(Dataset, InitialLabelingNeedsLabels) {
  Dataset data({make_bag("a", std::nullopt, 2, 2)}, LabelDomain(2));
  EXPECT_FALSE(data.all_labeled());
  EXPECT_EQ(kind_of([&] { initial_labeling(data); }), ErrorKind::kInvalidInput);
}
