#include "genmil/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "parallel.hpp"

namespace genmil {

std::string_view to_string(SpectrumMeasure m) {
  return m == SpectrumMeasure::kVariance ? "variance" : "singular-value";
}

SpectrumMeasure parse_spectrum_measure(std::string_view name) {
  if (name == "variance") return SpectrumMeasure::kVariance;
  if (name == "singular-value") return SpectrumMeasure::kSingularValue;
  throw Error(ErrorKind::kConfig, "unknown PCA spectrum measure '" + std::string(name) + "'");
}

// --------------------------------------------------------------------- PCA

MatrixXd PcaTransform::apply(const MatrixXd& rows) const {
  if (rows.cols() != input_dim)
    throw Error(ErrorKind::kDimensionMismatch,
                "PCA expects " + std::to_string(input_dim) + " features, got " +
                    std::to_string(rows.cols()));
  MatrixXd z(rows.rows(), static_cast<Eigen::Index>(kept_features.size()));
  for (std::size_t c = 0; c < kept_features.size(); ++c) {
    const int k = kept_features[c];
    z.col(static_cast<Eigen::Index>(c)) = (rows.col(k).array() - center[k]) / scale[k];
  }
  return z * components;
}

Dataset PcaTransform::apply(const Dataset& data) const {
  return data.map_instances([this](const MatrixXd& m) { return apply(m); });
}

PcaTransform fit_pca(const MatrixXd& instances, double threshold, SpectrumMeasure measure) {
  if (instances.rows() < 2)
    throw Error(ErrorKind::kInsufficientData, "PCA needs at least 2 instances");
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw Error(ErrorKind::kConfig, "PCA threshold must lie in (0, 1]");
  const double n = static_cast<double>(instances.rows());
  const auto p = instances.cols();

  PcaTransform pca;
  pca.input_dim = static_cast<int>(p);
  pca.measure = measure;
  pca.center = instances.colwise().mean().transpose();
  pca.scale = VectorXd::Zero(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double sd = std::sqrt((instances.col(k).array() - pca.center[k]).square().sum() / (n - 1.0));
    if (sd > 1e-12 * (1.0 + std::abs(pca.center[k]))) {
      pca.scale[k] = sd;
      pca.kept_features.push_back(static_cast<int>(k));
    }
  }
  if (pca.kept_features.empty())
    throw Error(ErrorKind::kInsufficientData, "PCA: every feature is constant");

  const auto kept = static_cast<Eigen::Index>(pca.kept_features.size());
  MatrixXd z(instances.rows(), kept);
  for (Eigen::Index c = 0; c < kept; ++c) {
    const int k = pca.kept_features[static_cast<std::size_t>(c)];
    z.col(c) = (instances.col(k).array() - pca.center[k]) / pca.scale[k];
  }
  MatrixXd corr = z.transpose() * z / (n - 1.0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (corr + corr.transpose()));
  if (eig.info() != Eigen::Success)
    throw Error(ErrorKind::kInvalidState, "PCA eigendecomposition failed");

  // Eigen returns ascending order.
  VectorXd values = eig.eigenvalues().reverse().cwiseMax(0.0);
  // Roundoff-level eigenvalues count as zero so the square-root measure
  // cannot inflate them into a visible share.
  const double rank_tol = 16.0 * static_cast<double>(kept) *
                          std::numeric_limits<double>::epsilon() * values[0];
  values = (values.array() <= rank_tol).select(0.0, values);
  MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  VectorXd share = measure == SpectrumMeasure::kVariance ? values : VectorXd(values.cwiseSqrt());
  const double total = share.sum();
  Eigen::Index q = kept;
  double running = 0.0;
  for (Eigen::Index c = 0; c < kept; ++c) {
    running += share[c];
    if (running / total >= threshold - 1e-12) {
      q = c + 1;
      break;
    }
  }
  pca.retained_fraction = share.head(q).sum() / total;
  pca.spectrum = values;
  pca.components = vectors.leftCols(q);
  // Sign convention: the largest-magnitude loading of each component is positive.
  for (Eigen::Index c = 0; c < q; ++c) {
    Eigen::Index arg;
    pca.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (pca.components(arg, c) < 0.0) pca.components.col(c) *= -1.0;
  }
  return pca;
}

// -------------------------------------------------------------- Reporting

std::string model_name(const EmConfig& em) {
  if (em.model == ModelKind::kBif) return "BIF/" + std::string(to_string(em.density));
  return "FIB/" + std::string(to_string(em.classifier));
}

Label majority_vote(std::span<const Label> labels, int classes) {
  std::vector<int> votes(static_cast<std::size_t>(classes), 0);
  for (Label l : labels) ++votes.at(static_cast<std::size_t>(l - 1));
  // max_element returns the first maximum, i.e. the lowest label.
  return static_cast<Label>(std::max_element(votes.begin(), votes.end()) - votes.begin()) + 1;
}

namespace {

std::vector<bool> classes_present(const Dataset& data) {
  std::vector<bool> present(static_cast<std::size_t>(data.domain().size()), false);
  for (const auto& b : data.bags()) present[static_cast<std::size_t>(*b.label - 1)] = true;
  return present;
}

std::optional<std::string> missing_class(const Dataset& train, const std::vector<bool>& present) {
  const auto have = classes_present(train);
  for (std::size_t c = 0; c < present.size(); ++c)
    if (present[c] && !have[c])
      return "training bags lack class " + std::to_string(c + 1);
  return std::nullopt;
}

void check_eval_input(const Dataset& data) {
  if (data.size() < 2)
    throw Error(ErrorKind::kInsufficientData, "leave-one-bag-out needs at least 2 bags");
  if (!data.all_labeled())
    throw Error(ErrorKind::kInvalidInput, "evaluation requires every bag to be labeled");
}

void aggregate(const Dataset& data, EvalReport& report) {
  const int t = data.domain().size();
  report.classes = t;
  report.folds = static_cast<int>(data.size());
  report.bag_confusion = Eigen::MatrixXi::Zero(t, t);
  const bool gold = data.has_gold_labels();
  if (gold) report.instance_confusion = Eigen::MatrixXi::Zero(t, t);
  int correct = 0;
  long inst_total = 0, inst_correct = 0;
  for (const auto& pred : report.predictions) {
    if (pred.degenerate) {
      ++report.degenerate_folds;
      report.warnings.push_back("fold " + std::to_string(pred.bag_index) + " (" + pred.bag_id +
                                ") degenerate: " + pred.note);
      continue;
    }
    ++report.evaluated_folds;
    report.bag_confusion(pred.true_label - 1, pred.predicted_label - 1) += 1;
    correct += pred.true_label == pred.predicted_label ? 1 : 0;
    if (gold) {
      const auto& g = *data.bag(pred.bag_index).gold_labels;
      for (std::size_t j = 0; j < g.size(); ++j) {
        (*report.instance_confusion)(g[j] - 1, pred.instance_labels[j] - 1) += 1;
        inst_correct += g[j] == pred.instance_labels[j] ? 1 : 0;
        ++inst_total;
      }
    }
  }
  report.bag_accuracy = report.evaluated_folds > 0
                            ? static_cast<double>(correct) / report.evaluated_folds
                            : 0.0;
  if (gold && inst_total > 0)
    report.instance_accuracy = static_cast<double>(inst_correct) / static_cast<double>(inst_total);
}

}  // namespace

FullFit train_full(const Dataset& data, const EvalConfig& config) {
  std::optional<PcaTransform> pca;
  std::optional<Dataset> projected;
  if (config.pca_threshold) {
    pca = fit_pca(data.pooled_instances(), *config.pca_threshold, config.pca_measure);
    projected = pca->apply(data);
  }
  EmConfig em = config.em;
  em.on_iteration = nullptr;
  auto result = train(projected ? *projected : data, em);
  return {std::move(pca), std::move(result)};
}

EvalReport leave_one_bag_out(const Dataset& data, const EvalConfig& config) {
  check_eval_input(data);
  const auto present = classes_present(data);
  EvalReport report;
  report.model_name = model_name(config.em);
  report.predictions.resize(data.size());

  detail::parallel_for(data.size(), config.threads, [&](std::size_t v) {
    FoldPrediction& pred = report.predictions[v];
    const Bag& held_out = data.bag(v);
    pred.bag_index = v;
    pred.bag_id = held_out.id;
    pred.true_label = *held_out.label;

    Dataset training = data.without(v);
    if (auto why = missing_class(training, present)) {
      pred.degenerate = true;
      pred.note = *why;
      return;
    }
    EvalConfig fold = config;
    fold.em.threads = 1;
    fold.em.record_trajectory = false;
    try {
      FullFit fit = train_full(training, fold);
      const MatrixXd test = fit.pca ? fit.pca->apply(held_out.instances) : held_out.instances;
      InferenceResult inf = infer(fit.result.model, test);
      pred.predicted_label = inf.bag_label;
      pred.instance_labels = std::move(inf.instance_labels);
      pred.log_scores = std::move(inf.log_scores);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInsufficientData) throw;
      pred.degenerate = true;
      pred.note = e.what();
    }
  });
  aggregate(data, report);

  if (config.compute_train_loglik) {
    FullFit fit = train_full(data, config);
    const Dataset train_data = fit.pca ? fit.pca->apply(data) : data;
    report.train_loglik = model_loglik(fit.result.model, train_data, fit.result.labels);
    if (fit.pca && fit.pca->dropped_features() > 0)
      report.warnings.push_back("PCA dropped " + std::to_string(fit.pca->dropped_features()) +
                                " constant feature(s)");
    if (!fit.result.converged)
      report.warnings.push_back("full-data training did not converge in " +
                                std::to_string(fit.result.iteration_count) + " iterations");
  }
  return report;
}

EvalReport non_mil_baseline(const Dataset& data, const EvalConfig& config) {
  check_eval_input(data);
  const auto present = classes_present(data);
  const int t = data.domain().size();
  EvalReport report;
  report.model_name = "non-MIL/qda";
  report.predictions.resize(data.size());

  detail::parallel_for(data.size(), config.threads, [&](std::size_t v) {
    FoldPrediction& pred = report.predictions[v];
    const Bag& held_out = data.bag(v);
    pred.bag_index = v;
    pred.bag_id = held_out.id;
    pred.true_label = *held_out.label;

    Dataset training = data.without(v);
    if (auto why = missing_class(training, present)) {
      pred.degenerate = true;
      pred.note = *why;
      return;
    }
    MatrixXd x = training.pooled_instances();
    MatrixXd test = held_out.instances;
    if (config.pca_threshold) {
      auto pca = fit_pca(x, *config.pca_threshold, config.pca_measure);
      x = pca.apply(x);
      test = pca.apply(test);
    }
    std::vector<Label> y;
    y.reserve(static_cast<std::size_t>(x.rows()));
    for (const auto& b : training.bags()) y.insert(y.end(), static_cast<std::size_t>(b.size()), *b.label);
    try {
      auto qda = QdaModel::fit(x, y, training.domain());
      pred.instance_labels.resize(static_cast<std::size_t>(test.rows()));
      for (Eigen::Index j = 0; j < test.rows(); ++j) {
        VectorXd lp = qda.predict_log_proba(test.row(j).transpose());
        Eigen::Index arg = 0;
        for (Eigen::Index c = 1; c < t; ++c)
          if (lp[c] > lp[arg]) arg = c;
        pred.instance_labels[static_cast<std::size_t>(j)] = static_cast<Label>(arg + 1);
      }
      pred.predicted_label = majority_vote(pred.instance_labels, t);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInsufficientData) throw;
      pred.degenerate = true;
      pred.note = e.what();
    }
  });
  aggregate(data, report);
  return report;
}

}  // namespace genmil
