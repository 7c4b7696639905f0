#pragma once

#include <optional>
#include <vector>

#include "genmil/bif.hpp"
#include "genmil/classify.hpp"
#include "genmil/core.hpp"
#include "genmil/density.hpp"

namespace genmil {

// Parameters of the F -> I -> B structure. P(B|I) is the fixed max rule and
// carries no parameters.
class FibParams {
 public:
  FibParams(DensityModel feature_density, ClassProbModel instance_classifier);

  int classes() const { return classifier_.classes(); }
  int dim() const { return density_.dim(); }
  LabelDomain domain() const { return LabelDomain(classes()); }

  const DensityModel& feature_density() const noexcept { return density_; }
  const ClassProbModel& instance_classifier() const noexcept { return classifier_; }

 private:
  DensityModel density_;
  ClassProbModel classifier_;
};

// Refits the classifier on the pooled (instance, label) pairs. The feature
// density is fitted only when `feature_density` is empty; otherwise it is
// reused unchanged, since P(F) sees fully observed data.
FibParams fib_estimate(const Dataset& data, const Labeling& labels,
                       ClassifierKind classifier_kind, DensityKind density_kind,
                       const ClassifierConfig& config = {},
                       std::optional<DensityModel> feature_density = std::nullopt);

// Best feasible labeling with bag label b from an m x t matrix of
// log P(I=i|f_j). Ties toward lower labels / lower instance indices.
std::vector<Label> fib_best_feasible(const MatrixXd& log_proba, Label bag_label);
std::vector<Label> fib_e_step(const FibParams& params, const Bag& bag);

InferenceResult fib_infer(const FibParams& params, const MatrixXd& instances);

// sum_j log P(i_j|f_j) + log P(f_j). Requires feasible per-bag labelings
// whose max rule reproduces the bag label.
double fib_loglik(const FibParams& params, const Dataset& data, const Labeling& labels);
// The P(F) part of fib_loglik alone.
double fib_feature_loglik(const FibParams& params, const Dataset& data);

}  // namespace genmil
