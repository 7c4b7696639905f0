#include "genmil/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lbfgs.hpp"

namespace genmil {

namespace {

void require_dim(int expected, Eigen::Index got) {
  if (got != expected)
    throw Error(ErrorKind::kDimensionMismatch,
                "expected " + std::to_string(expected) + " features, got " +
                    std::to_string(got));
}

std::vector<int> class_counts(std::span<const Label> y, const LabelDomain& domain) {
  std::vector<int> counts(static_cast<std::size_t>(domain.size()), 0);
  for (Label l : y) {
    domain.check(l);
    ++counts[static_cast<std::size_t>(l - 1)];
  }
  return counts;
}

void check_training_set(const MatrixXd& x, std::span<const Label> y,
                        const LabelDomain& domain) {
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw Error(ErrorKind::kInvalidInput, "classifier sample/label count mismatch");
  if (x.rows() < domain.size())
    throw Error(ErrorKind::kInsufficientData,
                "classifier needs at least t=" + std::to_string(domain.size()) +
                    " samples, got " + std::to_string(x.rows()));
  if (!x.allFinite())
    throw Error(ErrorKind::kInvalidInput, "classifier samples contain non-finite values");
}

void require_all_classes(const std::vector<int>& counts, const char* model) {
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0)
      throw Error(ErrorKind::kInsufficientData,
                  std::string(model) + ": class " + std::to_string(c + 1) +
                      " has no training samples");
}

// Softmax probabilities of all t classes; logits of the reference class are 0.
VectorXd softmax_with_reference(const MatrixXd& w, const VectorXd& f) {
  const auto k = w.rows();
  VectorXd z(k + 1);
  z.head(k) = w.col(0) + w.rightCols(w.cols() - 1) * f;
  z[k] = 0.0;
  const double hi = z.maxCoeff();
  VectorXd e = (z.array() - hi).exp();
  return e / e.sum();
}

}  // namespace

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::kLogistic: return "lr";
    case ClassifierKind::kKnn: return "knn";
    case ClassifierKind::kQda: return "qda";
    case ClassifierKind::kDiverseDensity: return "dd";
  }
  return "?";
}

ClassifierKind parse_classifier_kind(std::string_view name) {
  for (auto k : {ClassifierKind::kLogistic, ClassifierKind::kKnn,
                 ClassifierKind::kQda, ClassifierKind::kDiverseDensity})
    if (to_string(k) == name) return k;
  throw Error(ErrorKind::kConfig, "unknown classifier kind '" + std::string(name) + "'");
}

VectorXd normalize_log_proba(const VectorXd& scores) {
  const double hi = scores.maxCoeff();
  VectorXd out(scores.size());
  if (!std::isfinite(hi)) {
    out.setConstant(-std::log(static_cast<double>(scores.size())));
    return out;
  }
  const double lse = hi + std::log((scores.array() - hi).exp().sum());
  out = (scores.array() - lse).cwiseMax(kLogProbFloor);
  return out;
}

// ---------------------------------------------------------------- Logistic

LogisticModel::LogisticModel(MatrixXd weights, double ridge)
    : weights_(std::move(weights)), ridge_(ridge) {
  if (weights_.rows() < 1 || weights_.cols() < 2)
    throw Error(ErrorKind::kInvalidInput, "logistic weights shape");
  if (!weights_.allFinite())
    throw Error(ErrorKind::kInvalidInput, "logistic weights not finite");
}

double LogisticModel::objective(const MatrixXd& w, const MatrixXd& x,
                                std::span<const Label> y, double ridge) {
  const auto n = x.rows();
  const auto k = w.rows();
  double nll = 0.0;
  for (Eigen::Index s = 0; s < n; ++s) {
    VectorXd z(k + 1);
    z.head(k) = w.col(0) + w.rightCols(w.cols() - 1) * x.row(s).transpose();
    z[k] = 0.0;
    const double hi = z.maxCoeff();
    const double lse = hi + std::log((z.array() - hi).exp().sum());
    nll += lse - z[y[static_cast<std::size_t>(s)] - 1];
  }
  return nll / static_cast<double>(n) +
         0.5 * ridge * w.rightCols(w.cols() - 1).squaredNorm();
}

MatrixXd LogisticModel::gradient(const MatrixXd& w, const MatrixXd& x,
                                 std::span<const Label> y, double ridge) {
  const auto n = x.rows();
  const auto k = w.rows();
  MatrixXd g = MatrixXd::Zero(k, w.cols());
  for (Eigen::Index s = 0; s < n; ++s) {
    VectorXd f = x.row(s).transpose();
    VectorXd prob = softmax_with_reference(w, f);
    const Label label = y[static_cast<std::size_t>(s)];
    for (Eigen::Index c = 0; c < k; ++c) {
      const double r = prob[c] - (label == c + 1 ? 1.0 : 0.0);
      g(c, 0) += r;
      g.row(c).tail(w.cols() - 1) += r * f.transpose();
    }
  }
  g /= static_cast<double>(n);
  g.rightCols(w.cols() - 1) += ridge * w.rightCols(w.cols() - 1);
  return g;
}

LogisticModel LogisticModel::fit(const MatrixXd& x, std::span<const Label> y,
                                 const LabelDomain& domain,
                                 const ClassifierConfig& config) {
  check_training_set(x, y, domain);
  require_all_classes(class_counts(y, domain), "logistic regression");
  const int t = domain.size();
  const auto p = x.cols();
  const auto k = static_cast<Eigen::Index>(t - 1);
  const auto width = p + 1;
  const auto dim = k * width;
  const double n = static_cast<double>(x.rows());
  const double ridge = config.lr_ridge;

  MatrixXd design(x.rows(), width);
  design.col(0).setOnes();
  design.rightCols(p) = x;

  auto pack = [&](const MatrixXd& m) {
    VectorXd v(dim);
    for (Eigen::Index c = 0; c < k; ++c) v.segment(c * width, width) = m.row(c).transpose();
    return v;
  };
  auto unpack = [&](const VectorXd& v) {
    MatrixXd m(k, width);
    for (Eigen::Index c = 0; c < k; ++c) m.row(c) = v.segment(c * width, width).transpose();
    return m;
  };

  MatrixXd w = MatrixXd::Zero(k, width);
  double value = objective(w, x, y, ridge);
  for (int it = 0; it < config.lr_max_iterations; ++it) {
    // Gradient and Hessian of the penalized mean negative log-likelihood.
    VectorXd grad = VectorXd::Zero(dim);
    MatrixXd hess = MatrixXd::Zero(dim, dim);
    for (Eigen::Index s = 0; s < x.rows(); ++s) {
      VectorXd row = design.row(s).transpose();
      VectorXd prob = softmax_with_reference(w, x.row(s).transpose());
      const Label label = y[static_cast<std::size_t>(s)];
      MatrixXd outer = row * row.transpose();
      for (Eigen::Index c = 0; c < k; ++c) {
        grad.segment(c * width, width) += (prob[c] - (label == c + 1 ? 1.0 : 0.0)) * row;
        for (Eigen::Index d = 0; d < k; ++d) {
          const double coef = prob[c] * ((c == d ? 1.0 : 0.0) - prob[d]);
          hess.block(c * width, d * width, width, width) += coef * outer;
        }
      }
    }
    grad /= n;
    hess /= n;
    VectorXd packed = pack(w);
    for (Eigen::Index c = 0; c < k; ++c)
      for (Eigen::Index j = 1; j < width; ++j) {
        grad[c * width + j] += ridge * packed[c * width + j];
        hess(c * width + j, c * width + j) += ridge;
      }
    if (grad.norm() <= config.lr_tolerance) break;

    Eigen::LDLT<MatrixXd> ldlt(hess);
    VectorXd dir = ldlt.solve(-grad);
    double slope = grad.dot(dir);
    if (ldlt.info() != Eigen::Success || !dir.allFinite() || !(slope < 0.0)) {
      dir = -grad;
      slope = -grad.squaredNorm();
    }
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      MatrixXd cand = unpack(packed + step * dir);
      const double v = objective(cand, x, y, ridge);
      if (std::isfinite(v) && v <= value + 1e-4 * step * slope) {
        w = std::move(cand);
        value = v;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return LogisticModel(std::move(w), ridge);
}

VectorXd LogisticModel::predict_log_proba(const VectorXd& f) const {
  require_dim(dim(), f.size());
  const auto k = weights_.rows();
  VectorXd z(k + 1);
  z.head(k) = weights_.col(0) + weights_.rightCols(weights_.cols() - 1) * f;
  z[k] = 0.0;
  return normalize_log_proba(z);
}

// --------------------------------------------------------------------- KNN

KnnModel::KnnModel(MatrixXd support, std::vector<Label> labels, int classes,
                   int k, double alpha)
    : support_(std::move(support)), labels_(std::move(labels)),
      classes_(classes), k_(k), alpha_(alpha) {
  if (support_.rows() < 1 || static_cast<std::size_t>(support_.rows()) != labels_.size())
    throw Error(ErrorKind::kInvalidInput, "knn support/labels mismatch");
  if (k_ < 1 || k_ > support_.rows())
    throw Error(ErrorKind::kInvalidInput, "knn requires 1 <= k <= n");
  if (!(alpha_ > 0.0))
    throw Error(ErrorKind::kInvalidInput, "knn smoothing must be positive");
  LabelDomain domain(classes_);
  for (Label l : labels_) domain.check(l);
}

std::vector<int> KnnModel::neighbours(const VectorXd& f) const {
  require_dim(dim(), f.size());
  const auto n = support_.rows();
  std::vector<std::pair<double, int>> d(static_cast<std::size_t>(n));
  for (Eigen::Index s = 0; s < n; ++s)
    d[static_cast<std::size_t>(s)] = {(support_.row(s).transpose() - f).squaredNorm(),
                                      static_cast<int>(s)};
  std::partial_sort(d.begin(), d.begin() + k_, d.end());
  std::vector<int> out(static_cast<std::size_t>(k_));
  for (int i = 0; i < k_; ++i) out[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(i)].second;
  return out;
}

VectorXd KnnModel::predict_log_proba(const VectorXd& f) const {
  VectorXd counts = VectorXd::Constant(classes_, alpha_);
  for (int s : neighbours(f)) counts[labels_[static_cast<std::size_t>(s)] - 1] += 1.0;
  return normalize_log_proba(counts.array().log().matrix());
}

// --------------------------------------------------------------------- QDA

QdaModel::QdaModel(VectorXd priors, std::vector<GaussianDensity> densities)
    : priors_(std::move(priors)), densities_(std::move(densities)) {
  if (priors_.size() < 2 || static_cast<std::size_t>(priors_.size()) != densities_.size())
    throw Error(ErrorKind::kInvalidInput, "qda priors/densities mismatch");
  if ((priors_.array() < 0.0).any() || std::abs(priors_.sum() - 1.0) > 1e-9)
    throw Error(ErrorKind::kInvalidInput, "qda priors must form a distribution");
  for (const auto& d : densities_)
    if (d.dim() != densities_.front().dim())
      throw Error(ErrorKind::kDimensionMismatch, "qda class densities differ in dimension");
}

QdaModel QdaModel::fit(const MatrixXd& x, std::span<const Label> y,
                       const LabelDomain& domain) {
  check_training_set(x, y, domain);
  const int t = domain.size();
  const auto counts = class_counts(y, domain);
  const auto p = x.cols();

  std::vector<MatrixXd> per_class(static_cast<std::size_t>(t));
  for (int c = 0; c < t; ++c) per_class[static_cast<std::size_t>(c)].resize(counts[static_cast<std::size_t>(c)], p);
  std::vector<int> fill(static_cast<std::size_t>(t), 0);
  for (Eigen::Index s = 0; s < x.rows(); ++s) {
    const auto c = static_cast<std::size_t>(y[static_cast<std::size_t>(s)] - 1);
    per_class[c].row(fill[c]++) = x.row(s);
  }

  // Pooled within-class covariance for classes too small to fit their own.
  std::optional<MatrixXd> pooled;
  auto pooled_cov = [&]() -> const MatrixXd& {
    if (!pooled) {
      MatrixXd centered(x.rows(), p);
      Eigen::Index row = 0;
      for (const auto& m : per_class) {
        if (m.rows() == 0) continue;
        centered.middleRows(row, m.rows()) = m.rowwise() - m.colwise().mean();
        row += m.rows();
      }
      pooled = GaussianDensity::fit(centered, false).covariance();
    }
    return *pooled;
  };

  VectorXd priors(t);
  std::vector<GaussianDensity> densities;
  densities.reserve(static_cast<std::size_t>(t));
  for (int c = 0; c < t; ++c) {
    const auto& m = per_class[static_cast<std::size_t>(c)];
    priors[c] = static_cast<double>(m.rows()) / static_cast<double>(x.rows());
    if (m.rows() >= 2) {
      densities.push_back(GaussianDensity::fit(m, false));
    } else {
      VectorXd mean = m.rows() == 1 ? VectorXd(m.row(0).transpose())
                                    : VectorXd(x.colwise().mean().transpose());
      densities.emplace_back(std::move(mean), pooled_cov(), false);
    }
  }
  return QdaModel(std::move(priors), std::move(densities));
}

VectorXd QdaModel::predict_log_proba(const VectorXd& f) const {
  require_dim(dim(), f.size());
  VectorXd scores(classes());
  for (int c = 0; c < classes(); ++c)
    scores[c] = priors_[c] > 0.0
                    ? std::log(priors_[c]) + densities_[static_cast<std::size_t>(c)].log_pdf(f)
                    : -std::numeric_limits<double>::infinity();
  return normalize_log_proba(scores);
}

// -------------------------------------------------------- Diverse density

DiverseDensityModel::DiverseDensityModel(VectorXd target, VectorXd scales)
    : target_(std::move(target)), scales_(std::move(scales)) {
  if (target_.size() < 1 || target_.size() != scales_.size())
    throw Error(ErrorKind::kDimensionMismatch, "diverse density parameter shapes");
  if (!target_.allFinite() || !scales_.allFinite())
    throw Error(ErrorKind::kInvalidInput, "diverse density parameters not finite");
}

double DiverseDensityModel::raw_positive_probability(const VectorXd& f) const {
  require_dim(dim(), f.size());
  return std::exp(-(scales_.array().square() * (f - target_).array().square()).sum());
}

VectorXd DiverseDensityModel::predict_log_proba(const VectorXd& f) const {
  const double q = std::clamp(raw_positive_probability(f), kClip, 1.0 - kClip);
  VectorXd out(2);
  out << std::log1p(-q), std::log(q);
  return out;
}

double DiverseDensityModel::log_likelihood(const VectorXd& params,
                                           const MatrixXd& x,
                                           std::span<const Label> y,
                                           VectorXd* gradient) {
  const auto p = x.cols();
  const VectorXd w = params.head(p);
  const Eigen::ArrayXd s2 = params.tail(p).array().square();
  const MatrixXd diff = x.rowwise() - w.transpose();
  const MatrixXd diff2 = diff.array().square().matrix();
  const VectorXd dist = diff2 * s2.matrix();
  const double log_clip = std::log(kClip);

  // coef[r] = d(term_r)/d(dist_r); zero where the clip is active.
  VectorXd coef(x.rows());
  double ll = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (y[static_cast<std::size_t>(r)] == 2) {
      ll -= dist[r];
      coef[r] = -1.0;
      continue;
    }
    const double one_minus_q = -std::expm1(-dist[r]);
    if (one_minus_q <= kClip) {
      ll += log_clip;
      coef[r] = 0.0;
    } else {
      ll += std::log(one_minus_q);
      coef[r] = 1.0 / std::expm1(dist[r]);
    }
  }
  if (gradient) {
    // d(dist)/dw = -2 s^2 diff, d(dist)/ds = 2 s diff^2
    gradient->resize(2 * p);
    gradient->head(p) = -2.0 * (s2 * (diff.transpose() * coef).array()).matrix();
    gradient->tail(p) = 2.0 * (params.tail(p).array() * (diff2.transpose() * coef).array()).matrix();
  }
  return ll;
}

DiverseDensityModel DiverseDensityModel::fit(const MatrixXd& x,
                                             std::span<const Label> y,
                                             const LabelDomain& domain,
                                             const ClassifierConfig& config) {
  if (domain.size() != 2)
    throw Error(ErrorKind::kUnsupportedDomain,
                "diverse density requires t = 2, got t = " + std::to_string(domain.size()));
  check_training_set(x, y, domain);
  const auto counts = class_counts(y, domain);
  require_all_classes(counts, "diverse density");

  std::vector<Eigen::Index> positives;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    if (y[static_cast<std::size_t>(r)] == 2) positives.push_back(r);
  const int n_pos = static_cast<int>(positives.size());
  const int starts = std::min(n_pos, config.dd_max_starts);
  const auto p = x.cols();

  detail::Objective negated = [&](const VectorXd& params, VectorXd* grad) {
    const double v = log_likelihood(params, x, y, grad);
    if (grad) *grad = -*grad;
    return -v;
  };

  VectorXd best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < starts; ++j) {
    const auto idx = positives[static_cast<std::size_t>(
        static_cast<long long>(j) * n_pos / starts)];
    VectorXd init(2 * p);
    init.head(p) = x.row(idx).transpose();
    init.tail(p).setOnes();
    auto res = detail::lbfgs_minimize(negated, init, config.dd_max_iterations, 1e-6);
    const double ll = -res.value;
    if (ll > best_ll) {
      best_ll = ll;
      best = res.x;
    }
  }
  return DiverseDensityModel(best.head(p), best.tail(p).cwiseAbs());
}

// ---------------------------------------------------------- ClassProbModel

ClassifierKind ClassProbModel::kind() const noexcept {
  switch (model_.index()) {
    case 0: return ClassifierKind::kLogistic;
    case 1: return ClassifierKind::kKnn;
    case 2: return ClassifierKind::kQda;
    default: return ClassifierKind::kDiverseDensity;
  }
}

int ClassProbModel::dim() const {
  return std::visit([](const auto& m) { return m.dim(); }, model_);
}

int ClassProbModel::classes() const {
  return std::visit(
      [](const auto& m) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, DiverseDensityModel>)
          return 2;
        else
          return m.classes();
      },
      model_);
}

VectorXd ClassProbModel::predict_log_proba(const VectorXd& f) const {
  return std::visit([&](const auto& m) { return m.predict_log_proba(f); }, model_);
}

MatrixXd ClassProbModel::predict_log_proba_rows(const MatrixXd& rows) const {
  require_dim(dim(), rows.cols());
  MatrixXd out(rows.rows(), classes());
  for (Eigen::Index r = 0; r < rows.rows(); ++r)
    out.row(r) = predict_log_proba(rows.row(r).transpose()).transpose();
  return out;
}

ClassProbModel fit_classifier(ClassifierKind kind, const MatrixXd& x,
                              std::span<const Label> y,
                              const LabelDomain& domain,
                              const ClassifierConfig& config) {
  switch (kind) {
    case ClassifierKind::kLogistic:
      return ClassProbModel(LogisticModel::fit(x, y, domain, config));
    case ClassifierKind::kKnn: {
      check_training_set(x, y, domain);
      class_counts(y, domain);
      const int k = std::min<int>(config.knn_k, static_cast<int>(x.rows()));
      return ClassProbModel(KnnModel(x, std::vector<Label>(y.begin(), y.end()),
                                     domain.size(), k, config.knn_alpha));
    }
    case ClassifierKind::kQda:
      return ClassProbModel(QdaModel::fit(x, y, domain));
    case ClassifierKind::kDiverseDensity:
      return ClassProbModel(DiverseDensityModel::fit(x, y, domain, config));
  }
  throw Error(ErrorKind::kConfig, "unknown classifier kind");
}

}  // namespace genmil
