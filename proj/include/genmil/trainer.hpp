#pragma once

#include <functional>
#include <string_view>
#include <variant>
#include <vector>

#include "genmil/bif.hpp"
#include "genmil/classify.hpp"
#include "genmil/core.hpp"
#include "genmil/density.hpp"
#include "genmil/fib.hpp"

namespace genmil {

enum class ModelKind { kBif, kFib };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

using MilModel = std::variant<BifParams, FibParams>;

struct IterationEvent {
  int iteration = 0;
  int labels_changed = 0;
  double loglik = 0.0;
  double objective = 0.0;
};

struct EmConfig {
  int max_iterations = 100;
  ModelKind model = ModelKind::kBif;
  // P(F|I) for BIF.
  DensityKind density = DensityKind::kGaussianDiag;
  // P(F) for FIB.
  DensityKind feature_density = DensityKind::kKde;
  ClassifierKind classifier = ClassifierKind::kLogistic;
  ClassifierConfig classifier_config;
  bool record_trajectory = true;
  // Worker threads for the E-step; results do not depend on this.
  int threads = 1;
  std::function<void(const IterationEvent&)> on_iteration;
};

struct EmResult {
  MilModel model;
  Labeling labels;
  int iteration_count = 0;
  bool converged = false;
  // Hard-assignment log-likelihood after each iteration.
  std::vector<double> loglik_trajectory;
  // Log-likelihood plus the instance-table pseudo-count prior (BIF); equal
  // to loglik_trajectory for FIB. This is what both EM steps maximize.
  std::vector<double> objective_trajectory;
};

// Hard EM: labels start at the bag label, then alternate M-step and E-step
// until no label changes or max_iterations is reached.
EmResult train(const Dataset& data, const EmConfig& config);

std::vector<Label> e_step(const MilModel& model, const Bag& bag);
InferenceResult infer(const MilModel& model, const MatrixXd& instances);
double model_loglik(const MilModel& model, const Dataset& data, const Labeling& labels);
int model_dim(const MilModel& model);
int model_classes(const MilModel& model);

}  // namespace genmil
