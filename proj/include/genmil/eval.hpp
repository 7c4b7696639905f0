#pragma once

#include <optional>
#include <string>
#include <vector>

#include "genmil/core.hpp"
#include "genmil/trainer.hpp"

namespace genmil {

// How "retained variance" is measured when choosing the PCA rank.
//   kVariance:      cumulative eigenvalues of the correlation matrix.
//   kSingularValue: cumulative singular values of the standardized data
//                   (square roots of those eigenvalues).
enum class SpectrumMeasure { kVariance, kSingularValue };

std::string_view to_string(SpectrumMeasure m);
SpectrumMeasure parse_spectrum_measure(std::string_view name);

struct PcaTransform {
  int input_dim = 0;
  std::vector<int> kept_features;  // non-constant input columns
  VectorXd center;                 // per input feature
  VectorXd scale;                  // per input feature; 0 for dropped ones
  MatrixXd components;             // kept_features.size() x q, orthonormal
  VectorXd spectrum;               // eigenvalues of every component, descending
  double retained_fraction = 0.0;
  SpectrumMeasure measure = SpectrumMeasure::kSingularValue;

  int output_dim() const noexcept { return static_cast<int>(components.cols()); }
  int dropped_features() const noexcept {
    return input_dim - static_cast<int>(kept_features.size());
  }
  MatrixXd apply(const MatrixXd& rows) const;
  Dataset apply(const Dataset& data) const;
};

// Standardizes features, drops constant ones, and keeps the smallest number
// of leading components whose cumulative share reaches `threshold`.
PcaTransform fit_pca(const MatrixXd& instances, double threshold,
                     SpectrumMeasure measure = SpectrumMeasure::kSingularValue);

struct FoldPrediction {
  std::size_t bag_index = 0;
  std::string bag_id;
  Label true_label = kNormalLabel;
  Label predicted_label = kNormalLabel;
  std::vector<Label> instance_labels;
  VectorXd log_scores;
  bool degenerate = false;
  std::string note;
};

struct EvalReport {
  std::string model_name;
  int classes = 0;
  int folds = 0;
  int evaluated_folds = 0;
  int degenerate_folds = 0;
  double bag_accuracy = 0.0;
  std::optional<double> instance_accuracy;
  std::optional<double> train_loglik;
  std::vector<FoldPrediction> predictions;
  Eigen::MatrixXi bag_confusion;  // rows = true label, cols = predicted
  std::optional<Eigen::MatrixXi> instance_confusion;
  std::vector<std::string> warnings;
};

struct EvalConfig {
  EmConfig em;
  std::optional<double> pca_threshold;
  SpectrumMeasure pca_measure = SpectrumMeasure::kSingularValue;
  // Folds run concurrently on this many threads.
  int threads = 1;
  bool compute_train_loglik = true;
};

std::string model_name(const EmConfig& em);

// Leave-one-bag-out: each bag is held out once, the model is trained on the
// rest (PCA fitted on the training bags only) and the held-out bag's
// instances are labeled by joint MAP inference.
EvalReport leave_one_bag_out(const Dataset& data, const EvalConfig& config);

// Non-MIL reference: QDA on (instance, bag label) pairs, bags labeled by
// majority vote of their instance predictions (ties toward lower labels).
EvalReport non_mil_baseline(const Dataset& data, const EvalConfig& config);

Label majority_vote(std::span<const Label> labels, int classes);

// Fits PCA (if configured) and trains on the full dataset.
struct FullFit {
  std::optional<PcaTransform> pca;
  EmResult result;
};
FullFit train_full(const Dataset& data, const EvalConfig& config);

}  // namespace genmil
