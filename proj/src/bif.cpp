#include "genmil/bif.hpp"

#include <cmath>
#include <limits>

namespace genmil {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_labeling(const Dataset& data, const Labeling& labels) {
  if (labels.size() != data.size())
    throw Error(ErrorKind::kInvalidInput, "labeling has " + std::to_string(labels.size()) +
                                              " bags, dataset has " + std::to_string(data.size()));
  for (std::size_t v = 0; v < data.size(); ++v) {
    const Bag& bag = data.bag(v);
    if (!bag.label)
      throw Error(ErrorKind::kInvalidInput, "bag " + std::to_string(v) + " is unlabeled");
    if (static_cast<int>(labels[v].size()) != bag.size())
      throw Error(ErrorKind::kInvalidInput,
                  "bag " + std::to_string(v) + " label count does not match instance count");
    for (Label i : labels[v])
      if (!is_compatible(i, *bag.label, data.domain()))
        throw Error(ErrorKind::kInvalidState,
                    "bag " + std::to_string(v) + ": instance label " + std::to_string(i) +
                        " incompatible with bag label " + std::to_string(*bag.label));
  }
}

// Categorical draw that can never return a zero-weight index.
int draw_categorical(const VectorXd& weights, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, weights.sum())(rng);
  double cum = 0.0;
  int last = -1;
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    cum += weights[k];
    last = static_cast<int>(k);
    if (u < cum) return last;
  }
  return last;
}

}  // namespace

BifParams::BifParams(VectorXd bag_prior, MatrixXd instance_table,
                     std::vector<DensityModel> class_densities)
    : bag_prior_(std::move(bag_prior)), table_(std::move(instance_table)),
      class_densities_(std::move(class_densities)) {
  const auto t = bag_prior_.size();
  LabelDomain domain(static_cast<int>(t));
  if (table_.rows() != t || table_.cols() != t)
    throw Error(ErrorKind::kDimensionMismatch, "instance table must be t x t");
  if (static_cast<Eigen::Index>(class_densities_.size()) != t)
    throw Error(ErrorKind::kDimensionMismatch, "need one class density per label");
  if ((bag_prior_.array() < 0.0).any() || std::abs(bag_prior_.sum() - 1.0) > 1e-12)
    throw Error(ErrorKind::kInvalidInput, "bag prior must be a distribution");
  for (Eigen::Index b = 0; b < t; ++b) {
    if ((table_.row(b).array() < 0.0).any() || std::abs(table_.row(b).sum() - 1.0) > 1e-12)
      throw Error(ErrorKind::kInvalidInput,
                  "instance table row " + std::to_string(b + 1) + " must sum to 1");
    for (Eigen::Index i = 0; i < t; ++i)
      if (!is_compatible(static_cast<Label>(i + 1), static_cast<Label>(b + 1), domain) &&
          table_(b, i) != 0.0)
        throw Error(ErrorKind::kConfig,
                    "instance table P(I=" + std::to_string(i + 1) + "|B=" + std::to_string(b + 1) +
                        ") must be 0 for an incompatible pair");
  }
  const int p = class_densities_.front().dim();
  for (const auto& d : class_densities_)
    if (d.dim() != p)
      throw Error(ErrorKind::kDimensionMismatch, "class densities differ in dimension");
}

MatrixXd BifParams::class_log_densities(const MatrixXd& instances) const {
  if (instances.cols() != dim())
    throw Error(ErrorKind::kDimensionMismatch,
                "model expects " + std::to_string(dim()) + " features, got " +
                    std::to_string(instances.cols()));
  MatrixXd out(instances.rows(), classes());
  for (int i = 0; i < classes(); ++i)
    out.col(i) = class_densities_[static_cast<std::size_t>(i)].log_pdf_rows(instances);
  return out;
}

BifParams bif_estimate(const Dataset& data, const Labeling& labels,
                       DensityKind density_kind) {
  check_labeling(data, labels);
  const int t = data.domain().size();
  const auto& domain = data.domain();

  VectorXd prior = VectorXd::Zero(t);
  MatrixXd counts = MatrixXd::Zero(t, t);
  std::vector<int> per_class(static_cast<std::size_t>(t), 0);
  for (std::size_t v = 0; v < data.size(); ++v) {
    const Label b = *data.bag(v).label;
    prior[b - 1] += 1.0;
    for (Label i : labels[v]) {
      counts(b - 1, i - 1) += 1.0;
      ++per_class[static_cast<std::size_t>(i - 1)];
    }
  }
  prior /= static_cast<double>(data.size());

  for (Label b = 1; b <= t; ++b)
    for (Label i = 1; i <= t; ++i)
      if (is_compatible(i, b, domain)) counts(b - 1, i - 1) += kCompatiblePseudoCount;
  MatrixXd table = counts;
  for (Eigen::Index b = 0; b < t; ++b) table.row(b) /= counts.row(b).sum();

  std::vector<MatrixXd> pooled(static_cast<std::size_t>(t));
  for (int i = 0; i < t; ++i) {
    const int need = min_samples(density_kind);
    if (per_class[static_cast<std::size_t>(i)] < need)
      throw Error(ErrorKind::kInsufficientData,
                  "class " + std::to_string(i + 1) + " has " +
                      std::to_string(per_class[static_cast<std::size_t>(i)]) +
                      " instances; " + std::string(to_string(density_kind)) + " needs " +
                      std::to_string(need));
    pooled[static_cast<std::size_t>(i)].resize(per_class[static_cast<std::size_t>(i)], data.dim());
  }
  std::vector<Eigen::Index> fill(static_cast<std::size_t>(t), 0);
  for (std::size_t v = 0; v < data.size(); ++v) {
    const Bag& bag = data.bag(v);
    for (int j = 0; j < bag.size(); ++j) {
      const auto c = static_cast<std::size_t>(labels[v][static_cast<std::size_t>(j)] - 1);
      pooled[c].row(fill[c]++) = bag.instances.row(j);
    }
  }
  std::vector<DensityModel> densities;
  densities.reserve(static_cast<std::size_t>(t));
  for (const auto& m : pooled) densities.push_back(fit_density(density_kind, m));
  return BifParams(std::move(prior), std::move(table), std::move(densities));
}

std::vector<Label> bif_e_step(const BifParams& params, const MatrixXd& class_log_density,
                              Label bag_label) {
  params.domain().check(bag_label);
  const int t = params.classes();
  VectorXd log_row(t);
  for (Label i = 1; i <= t; ++i) log_row[i - 1] = params.log_instance_prob(i, bag_label);

  std::vector<Label> out(static_cast<std::size_t>(class_log_density.rows()), kNormalLabel);
  for (Eigen::Index j = 0; j < class_log_density.rows(); ++j) {
    double best = kNegInf;
    Label arg = kNormalLabel;
    for (Label i = 1; i <= t; ++i) {
      if (log_row[i - 1] == kNegInf) continue;
      const double s = log_row[i - 1] + class_log_density(j, i - 1);
      if (s > best) {
        best = s;
        arg = i;
      }
    }
    out[static_cast<std::size_t>(j)] = arg;
  }
  return out;
}

std::vector<Label> bif_e_step(const BifParams& params, const Bag& bag) {
  if (!bag.label)
    throw Error(ErrorKind::kInvalidInput, "bif e-step needs a labeled bag");
  return bif_e_step(params, params.class_log_densities(bag.instances), *bag.label);
}

InferenceResult bif_infer(const BifParams& params, const MatrixXd& instances) {
  if (instances.rows() < 1)
    throw Error(ErrorKind::kInvalidInput, "bag has no instances");
  const int t = params.classes();
  const MatrixXd dens = params.class_log_densities(instances);
  InferenceResult result;
  result.log_scores = VectorXd::Constant(t, kNegInf);
  double best = kNegInf;
  for (Label b = 1; b <= t; ++b) {
    if (params.bag_prior()[b - 1] <= 0.0) continue;
    auto labels = bif_e_step(params, dens, b);
    double score = params.log_bag_prior(b);
    for (std::size_t j = 0; j < labels.size(); ++j)
      score += params.log_instance_prob(labels[j], b) +
               dens(static_cast<Eigen::Index>(j), labels[j] - 1);
    result.log_scores[b - 1] = score;
    if (score > best || result.instance_labels.empty()) {
      best = score;
      result.bag_label = b;
      result.instance_labels = std::move(labels);
    }
  }
  return result;
}

double bif_loglik(const BifParams& params, const Dataset& data, const Labeling& labels) {
  check_labeling(data, labels);
  double total = 0.0;
  for (std::size_t v = 0; v < data.size(); ++v) {
    const Bag& bag = data.bag(v);
    const Label b = *bag.label;
    const MatrixXd dens = params.class_log_densities(bag.instances);
    total += params.log_bag_prior(b);
    for (int j = 0; j < bag.size(); ++j) {
      const Label i = labels[v][static_cast<std::size_t>(j)];
      total += params.log_instance_prob(i, b) + dens(j, i - 1);
    }
  }
  return std::isnan(total) ? kNegInf : total;
}

double bif_log_prior(const BifParams& params) {
  const int t = params.classes();
  const auto domain = params.domain();
  double total = 0.0;
  for (Label b = 1; b <= t; ++b)
    for (Label i = 1; i <= t; ++i)
      if (is_compatible(i, b, domain))
        total += kCompatiblePseudoCount * params.log_instance_prob(i, b);
  return total;
}

SizeSampler uniform_bag_size(int m_min, int m_max) {
  if (m_min < 1 || m_min > m_max)
    throw Error(ErrorKind::kConfig, "bag size range must satisfy 1 <= m_min <= m_max");
  return [m_min, m_max](Rng& rng) {
    return std::uniform_int_distribution<int>(m_min, m_max)(rng);
  };
}

Dataset bif_sample(const BifParams& params, int bag_count,
                   const SizeSampler& size_sampler, std::uint64_t seed) {
  if (bag_count < 1)
    throw Error(ErrorKind::kInvalidInput, "bag_count must be >= 1");
  const int t = params.classes();
  Rng rng(seed);
  std::vector<VectorXd> rows;
  for (int b = 0; b < t; ++b) rows.emplace_back(params.instance_table().row(b).transpose());

  std::vector<Bag> bags;
  bags.reserve(static_cast<std::size_t>(bag_count));
  for (int v = 0; v < bag_count; ++v) {
    const Label b = draw_categorical(params.bag_prior(), rng) + 1;
    const int m = size_sampler(rng);
    if (m < 1) throw Error(ErrorKind::kConfig, "size sampler returned m < 1");
    Bag bag;
    bag.id = "bag" + std::to_string(v + 1);
    bag.label = b;
    bag.instances.resize(m, params.dim());
    std::vector<Label> gold(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
      const Label i = draw_categorical(rows[static_cast<std::size_t>(b - 1)], rng) + 1;
      gold[static_cast<std::size_t>(j)] = i;
      bag.instances.row(j) = params.density(i).sample(1, rng).row(0);
    }
    bag.gold_labels = std::move(gold);
    bags.push_back(std::move(bag));
  }
  return Dataset(std::move(bags), params.domain());
}

}  // namespace genmil
