#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "genmil/core.hpp"
#include "genmil/density.hpp"

namespace genmil {

// Parameters of the B -> I -> F structure: tabular bag prior, instance
// table clamped to the compatibility pattern, one density per instance label.
class BifParams {
 public:
  BifParams(VectorXd bag_prior, MatrixXd instance_table,
            std::vector<DensityModel> class_densities);

  int classes() const noexcept { return static_cast<int>(bag_prior_.size()); }
  int dim() const { return class_densities_.front().dim(); }
  LabelDomain domain() const { return LabelDomain(classes()); }

  const VectorXd& bag_prior() const noexcept { return bag_prior_; }
  // instance_table()(b-1, i-1) = P(I=i | B=b).
  const MatrixXd& instance_table() const noexcept { return table_; }
  const std::vector<DensityModel>& class_densities() const noexcept {
    return class_densities_;
  }
  const DensityModel& density(Label i) const {
    return class_densities_.at(static_cast<std::size_t>(i - 1));
  }

  double log_bag_prior(Label b) const { return std::log(bag_prior_[b - 1]); }
  double log_instance_prob(Label i, Label b) const {
    return std::log(table_(b - 1, i - 1));
  }
  // m x t matrix of log P(f_j | I = i).
  MatrixXd class_log_densities(const MatrixXd& instances) const;

 private:
  VectorXd bag_prior_;
  MatrixXd table_;
  std::vector<DensityModel> class_densities_;
};

// Pseudo-count added to every compatible (b, i) cell of the instance table.
inline constexpr double kCompatiblePseudoCount = 1.0;

BifParams bif_estimate(const Dataset& data, const Labeling& labels,
                       DensityKind density_kind);

// Per-instance argmax of log P(i|b) + log P(f|i); ties toward lower labels.
std::vector<Label> bif_e_step(const BifParams& params, const Bag& bag);
std::vector<Label> bif_e_step(const BifParams& params, const MatrixXd& class_log_density,
                              Label bag_label);

struct InferenceResult {
  Label bag_label = kNormalLabel;
  std::vector<Label> instance_labels;
  // log_scores[b-1] is the best joint log-score with bag label b.
  VectorXd log_scores;
};

InferenceResult bif_infer(const BifParams& params, const MatrixXd& instances);

// Hard-assignment log-likelihood; -inf when a configuration has zero mass.
double bif_loglik(const BifParams& params, const Dataset& data, const Labeling& labels);

// Log density of the pseudo-count prior on the instance table (up to a
// constant): sum over compatible cells of pseudo_count * log P(i|b). Adding
// it to bif_loglik gives the quantity each hard-EM step cannot decrease.
double bif_log_prior(const BifParams& params);

using SizeSampler = std::function<int(Rng&)>;
SizeSampler uniform_bag_size(int m_min, int m_max);

// Draws bags from the generative story; gold labels are retained.
Dataset bif_sample(const BifParams& params, int bag_count,
                   const SizeSampler& size_sampler, std::uint64_t seed);

}  // namespace genmil
