#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "genmil/eval.hpp"
#include "genmil/trainer.hpp"

namespace genmil {

// Fields of the model file, a JSON document:
//   format      "genmil-model"
//   version     kModelFormatVersion
//   structure   "bif" | "fib"
//   classes, dim (input dimension, before PCA)
//   pca         null | {input_dim, kept_features, center, scale, components,
//                       spectrum, retained_fraction, measure}
//   bif         {bag_prior, instance_table, class_densities: [density]}
//   fib         {feature_density: density, classifier: classifier}
//   training    {density, feature_density, classifier, iterations, converged}
// density:    {kind: gauss|gauss-diag, mean, covariance}
//             {kind: kde, support, bandwidths}
//             {kind: copula|copula-diag, clip, correlation,
//              marginals: [{support, bandwidth}]}
// classifier: {kind: lr, weights, ridge} | {kind: knn, support, labels,
//              classes, k, alpha} | {kind: qda, priors, densities}
//             | {kind: dd, target, scales}
inline constexpr int kModelFormatVersion = 1;

struct SavedModel {
  MilModel model;
  std::optional<PcaTransform> pca;
  std::string density;
  std::string feature_density;
  std::string classifier;
  int iterations = 0;
  bool converged = false;

  int input_dim() const { return pca ? pca->input_dim : model_dim(model); }
};

std::string model_to_json(const SavedModel& model);
SavedModel model_from_json(const std::string& text);
void save_model(const SavedModel& model, const std::filesystem::path& path);
SavedModel load_model(const std::filesystem::path& path);

}  // namespace genmil
