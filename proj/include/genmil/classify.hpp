#pragma once

#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "genmil/core.hpp"
#include "genmil/density.hpp"

namespace genmil {

enum class ClassifierKind { kLogistic, kKnn, kQda, kDiverseDensity };

std::string_view to_string(ClassifierKind kind);
ClassifierKind parse_classifier_kind(std::string_view name);

struct ClassifierConfig {
  double lr_ridge = 1e-4;
  double lr_tolerance = 1e-6;
  int lr_max_iterations = 10000;
  int knn_k = 7;
  double knn_alpha = 1.0;
  int dd_max_starts = 25;
  int dd_max_iterations = 200;
};

// Lower bound applied to every predicted log-probability so that empty or
// saturated classes never produce -inf.
inline constexpr double kLogProbFloor = -690.0;

// Row-wise log-softmax followed by the floor.
VectorXd normalize_log_proba(const VectorXd& scores);

// Multinomial logistic regression with class t as the zero-coefficient
// reference. weights is (t-1) x (p+1); column 0 holds the intercepts.
class LogisticModel {
 public:
  LogisticModel(MatrixXd weights, double ridge);

  static LogisticModel fit(const MatrixXd& x, std::span<const Label> y,
                           const LabelDomain& domain,
                           const ClassifierConfig& config);

  VectorXd predict_log_proba(const VectorXd& f) const;

  const MatrixXd& weights() const noexcept { return weights_; }
  double ridge() const noexcept { return ridge_; }
  int classes() const noexcept { return static_cast<int>(weights_.rows()) + 1; }
  int dim() const noexcept { return static_cast<int>(weights_.cols()) - 1; }

  // Mean negative log-likelihood plus (ridge/2)*||non-intercept weights||^2.
  static double objective(const MatrixXd& weights, const MatrixXd& x,
                          std::span<const Label> y, double ridge);
  static MatrixXd gradient(const MatrixXd& weights, const MatrixXd& x,
                           std::span<const Label> y, double ridge);

 private:
  MatrixXd weights_;
  double ridge_;
};

class KnnModel {
 public:
  KnnModel(MatrixXd support, std::vector<Label> labels, int classes, int k,
           double alpha);

  VectorXd predict_log_proba(const VectorXd& f) const;
  // Neighbour indices, nearest first, distance ties toward lower index.
  std::vector<int> neighbours(const VectorXd& f) const;

  const MatrixXd& support() const noexcept { return support_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }
  int classes() const noexcept { return classes_; }
  int k() const noexcept { return k_; }
  double alpha() const noexcept { return alpha_; }
  int dim() const noexcept { return static_cast<int>(support_.cols()); }

 private:
  MatrixXd support_;
  std::vector<Label> labels_;
  int classes_;
  int k_;
  double alpha_;
};

class QdaModel {
 public:
  // priors[c] == 0 marks an empty class; its density is ignored.
  QdaModel(VectorXd priors, std::vector<GaussianDensity> densities);

  static QdaModel fit(const MatrixXd& x, std::span<const Label> y,
                      const LabelDomain& domain);

  VectorXd predict_log_proba(const VectorXd& f) const;

  const VectorXd& priors() const noexcept { return priors_; }
  const std::vector<GaussianDensity>& densities() const noexcept { return densities_; }
  int classes() const noexcept { return static_cast<int>(priors_.size()); }
  int dim() const noexcept { return densities_.front().dim(); }

 private:
  VectorXd priors_;
  std::vector<GaussianDensity> densities_;
};

// Binary model P(I=2|f) = exp(-sum_k s_k^2 (f_k - w_k)^2).
class DiverseDensityModel {
 public:
  static constexpr double kClip = 1e-12;

  DiverseDensityModel(VectorXd target, VectorXd scales);

  static DiverseDensityModel fit(const MatrixXd& x, std::span<const Label> y,
                                 const LabelDomain& domain,
                                 const ClassifierConfig& config);

  // Unclipped exp(-sum s^2 (f-w)^2).
  double raw_positive_probability(const VectorXd& f) const;
  VectorXd predict_log_proba(const VectorXd& f) const;

  // Training objective over packed parameters (w, s): sum over positives of
  // log q plus sum over negatives of log(max(1 - q, kClip)).
  static double log_likelihood(const VectorXd& params, const MatrixXd& x,
                               std::span<const Label> y, VectorXd* gradient);

  const VectorXd& target() const noexcept { return target_; }
  const VectorXd& scales() const noexcept { return scales_; }
  int dim() const noexcept { return static_cast<int>(target_.size()); }

 private:
  VectorXd target_;
  VectorXd scales_;
};

class ClassProbModel {
 public:
  using Variant = std::variant<LogisticModel, KnnModel, QdaModel, DiverseDensityModel>;

  explicit ClassProbModel(Variant model) : model_(std::move(model)) {}

  ClassifierKind kind() const noexcept;
  const Variant& model() const noexcept { return model_; }
  int dim() const;
  int classes() const;

  // Entry c holds log P(I = c+1 | f).
  VectorXd predict_log_proba(const VectorXd& f) const;
  // One row of log-probabilities per input row.
  MatrixXd predict_log_proba_rows(const MatrixXd& rows) const;

 private:
  Variant model_;
};

ClassProbModel fit_classifier(ClassifierKind kind, const MatrixXd& x,
                              std::span<const Label> y,
                              const LabelDomain& domain,
                              const ClassifierConfig& config = {});

}  // namespace genmil
