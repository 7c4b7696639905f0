#include "genmil/fib.hpp"

#include <cmath>
#include <limits>

namespace genmil {

FibParams::FibParams(DensityModel feature_density, ClassProbModel instance_classifier)
    : density_(std::move(feature_density)), classifier_(std::move(instance_classifier)) {
  if (density_.dim() != classifier_.dim())
    throw Error(ErrorKind::kDimensionMismatch,
                "feature density has p=" + std::to_string(density_.dim()) +
                    " but classifier has p=" + std::to_string(classifier_.dim()));
}

FibParams fib_estimate(const Dataset& data, const Labeling& labels,
                       ClassifierKind classifier_kind, DensityKind density_kind,
                       const ClassifierConfig& config,
                       std::optional<DensityModel> feature_density) {
  if (labels.size() != data.size())
    throw Error(ErrorKind::kInvalidInput, "labeling/dataset bag count mismatch");
  std::vector<Label> pooled_labels;
  pooled_labels.reserve(data.instance_count());
  for (std::size_t v = 0; v < data.size(); ++v) {
    const Bag& bag = data.bag(v);
    if (static_cast<int>(labels[v].size()) != bag.size())
      throw Error(ErrorKind::kInvalidInput,
                  "bag " + std::to_string(v) + " label count does not match instance count");
    if (bag.label && bag_label_of(labels[v], data.domain()) != *bag.label)
      throw Error(ErrorKind::kInvalidState,
                  "bag " + std::to_string(v) + " labeling is not feasible for its bag label");
    pooled_labels.insert(pooled_labels.end(), labels[v].begin(), labels[v].end());
  }
  MatrixXd pooled = data.pooled_instances();
  if (!feature_density) feature_density = fit_density(density_kind, pooled);
  auto classifier = fit_classifier(classifier_kind, pooled, pooled_labels, data.domain(), config);
  return FibParams(std::move(*feature_density), std::move(classifier));
}

std::vector<Label> fib_best_feasible(const MatrixXd& log_proba, Label bag_label) {
  const auto m = log_proba.rows();
  LabelDomain(static_cast<int>(log_proba.cols())).check(bag_label);
  std::vector<Label> out(static_cast<std::size_t>(m), kNormalLabel);
  if (bag_label == kNormalLabel) return out;

  const auto b = bag_label - 1;
  bool any_abnormal = false;
  for (Eigen::Index j = 0; j < m; ++j)
    if (log_proba(j, b) > log_proba(j, 0)) {
      out[static_cast<std::size_t>(j)] = bag_label;
      any_abnormal = true;
    }
  if (!any_abnormal) {
    // Flip the instance losing the least by becoming b.
    Eigen::Index best_k = 0;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m; ++k) {
      const double gain = log_proba(k, b) - log_proba(k, 0);
      if (gain > best_gain) {
        best_gain = gain;
        best_k = k;
      }
    }
    out[static_cast<std::size_t>(best_k)] = bag_label;
  }
  return out;
}

std::vector<Label> fib_e_step(const FibParams& params, const Bag& bag) {
  if (!bag.label)
    throw Error(ErrorKind::kInvalidInput, "fib e-step needs a labeled bag");
  return fib_best_feasible(params.instance_classifier().predict_log_proba_rows(bag.instances),
                           *bag.label);
}

InferenceResult fib_infer(const FibParams& params, const MatrixXd& instances) {
  if (instances.rows() < 1)
    throw Error(ErrorKind::kInvalidInput, "bag has no instances");
  const MatrixXd lp = params.instance_classifier().predict_log_proba_rows(instances);
  const int t = params.classes();
  InferenceResult result;
  result.log_scores.resize(t);
  double best = -std::numeric_limits<double>::infinity();
  for (Label b = 1; b <= t; ++b) {
    auto labels = fib_best_feasible(lp, b);
    double score = 0.0;
    for (std::size_t j = 0; j < labels.size(); ++j)
      score += lp(static_cast<Eigen::Index>(j), labels[j] - 1);
    result.log_scores[b - 1] = score;
    if (b == 1 || score > best) {
      best = score;
      result.bag_label = b;
      result.instance_labels = std::move(labels);
    }
  }
  return result;
}

double fib_feature_loglik(const FibParams& params, const Dataset& data) {
  double total = 0.0;
  for (const Bag& bag : data.bags()) total += params.feature_density().log_pdf_rows(bag.instances).sum();
  return total;
}

double fib_loglik(const FibParams& params, const Dataset& data, const Labeling& labels) {
  if (labels.size() != data.size())
    throw Error(ErrorKind::kInvalidInput, "labeling/dataset bag count mismatch");
  double total = 0.0;
  for (std::size_t v = 0; v < data.size(); ++v) {
    const Bag& bag = data.bag(v);
    if (!bag.label)
      throw Error(ErrorKind::kInvalidInput, "bag " + std::to_string(v) + " is unlabeled");
    if (static_cast<int>(labels[v].size()) != bag.size() ||
        bag_label_of(labels[v], data.domain()) != *bag.label)
      throw Error(ErrorKind::kInvalidState,
                  "bag " + std::to_string(v) + " stored labels are infeasible for its bag label");
    const MatrixXd lp = params.instance_classifier().predict_log_proba_rows(bag.instances);
    for (int j = 0; j < bag.size(); ++j) total += lp(j, labels[v][static_cast<std::size_t>(j)] - 1);
  }
  return total + fib_feature_loglik(params, data);
}

}  // namespace genmil
