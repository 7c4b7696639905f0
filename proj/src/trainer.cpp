#include "genmil/trainer.hpp"

#include "parallel.hpp"

namespace genmil {

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::kBif ? "bif" : "fib";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "bif") return ModelKind::kBif;
  if (name == "fib") return ModelKind::kFib;
  throw Error(ErrorKind::kConfig, "unknown model kind '" + std::string(name) + "'");
}

std::vector<Label> e_step(const MilModel& model, const Bag& bag) {
  return std::visit(
      [&](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, BifParams>)
          return bif_e_step(m, bag);
        else
          return fib_e_step(m, bag);
      },
      model);
}

InferenceResult infer(const MilModel& model, const MatrixXd& instances) {
  return std::visit(
      [&](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, BifParams>)
          return bif_infer(m, instances);
        else
          return fib_infer(m, instances);
      },
      model);
}

double model_loglik(const MilModel& model, const Dataset& data, const Labeling& labels) {
  return std::visit(
      [&](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, BifParams>)
          return bif_loglik(m, data, labels);
        else
          return fib_loglik(m, data, labels);
      },
      model);
}

int model_dim(const MilModel& model) {
  return std::visit([](const auto& m) { return m.dim(); }, model);
}

int model_classes(const MilModel& model) {
  return std::visit([](const auto& m) { return m.classes(); }, model);
}

EmResult train(const Dataset& data, const EmConfig& config) {
  if (config.max_iterations < 1)
    throw Error(ErrorKind::kConfig, "max_iterations must be >= 1");
  if (!data.all_labeled())
    throw Error(ErrorKind::kInvalidInput, "training requires every bag to be labeled");
  if (config.model == ModelKind::kFib && config.classifier == ClassifierKind::kDiverseDensity &&
      data.domain().size() != 2)
    throw Error(ErrorKind::kUnsupportedDomain, "diverse density requires t = 2");

  Labeling labels = initial_labeling(data);
  std::optional<MilModel> model;
  std::optional<DensityModel> feature_density;
  std::vector<double> loglik_trajectory, objective_trajectory;
  bool converged = false;

  int it = 1;
  for (; it <= config.max_iterations; ++it) {
    try {
      if (config.model == ModelKind::kBif) {
        model.emplace(bif_estimate(data, labels, config.density));
      } else {
        auto fib = fib_estimate(data, labels, config.classifier, config.feature_density,
                                config.classifier_config, feature_density);
        if (!feature_density) feature_density = fib.feature_density();
        model.emplace(std::move(fib));
      }
    } catch (const Error& e) {
      throw Error(e.kind(), "M-step at iteration " + std::to_string(it) + ": " + e.what());
    }

    Labeling next(data.size());
    detail::parallel_for(data.size(), config.threads,
                         [&](std::size_t v) { next[v] = e_step(*model, data.bag(v)); });
    int changed = 0;
    for (std::size_t v = 0; v < data.size(); ++v)
      for (std::size_t j = 0; j < next[v].size(); ++j)
        changed += next[v][j] != labels[v][j] ? 1 : 0;
    labels = std::move(next);

    if (config.record_trajectory || config.on_iteration) {
      const double ll = model_loglik(*model, data, labels);
      double objective = ll;
      if (const auto* bif = std::get_if<BifParams>(&*model)) objective += bif_log_prior(*bif);
      if (config.record_trajectory) {
        loglik_trajectory.push_back(ll);
        objective_trajectory.push_back(objective);
      }
      if (config.on_iteration) config.on_iteration({it, changed, ll, objective});
    }
    if (changed == 0) {
      converged = true;
      break;
    }
  }
  return EmResult{.model = std::move(*model),
                  .labels = std::move(labels),
                  .iteration_count = std::min(it, config.max_iterations),
                  .converged = converged,
                  .loglik_trajectory = std::move(loglik_trajectory),
                  .objective_trajectory = std::move(objective_trajectory)};
}

}  // namespace genmil
