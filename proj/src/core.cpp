#include "genmil/core.hpp"

#include <algorithm>
#include <cmath>

namespace genmil {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidLabel: return "invalid-label";
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kInvalidState: return "invalid-state";
    case ErrorKind::kUnsupportedDomain: return "unsupported-domain";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kParse: return "parse-error";
    case ErrorKind::kConfig: return "config-error";
    case ErrorKind::kIo: return "io-error";
  }
  return "unknown";
}

LabelDomain::LabelDomain(int t) : t_(t) {
  if (t < 2)
    throw Error(ErrorKind::kInvalidInput,
                "label domain needs t >= 2, got " + std::to_string(t));
}

void LabelDomain::check(Label l) const {
  if (!contains(l))
    throw Error(ErrorKind::kInvalidLabel,
                "label " + std::to_string(l) + " outside {1.." +
                    std::to_string(t_) + "}");
}

Dataset::Dataset(std::vector<Bag> bags, LabelDomain domain)
    : bags_(std::move(bags)), domain_(domain) {
  if (bags_.empty())
    throw Error(ErrorKind::kInvalidInput, "dataset has no bags");
  p_ = bags_.front().dim();
  for (std::size_t i = 0; i < bags_.size(); ++i) {
    const Bag& b = bags_[i];
    if (b.size() < 1)
      throw Error(ErrorKind::kInvalidInput,
                  "bag " + std::to_string(i) + " has no instances");
    if (b.dim() != p_)
      throw Error(ErrorKind::kDimensionMismatch,
                  "bag " + std::to_string(i) + " has dimension " +
                      std::to_string(b.dim()) + ", expected " +
                      std::to_string(p_));
    if (!b.instances.allFinite())
      throw Error(ErrorKind::kInvalidInput,
                  "bag " + std::to_string(i) + " has non-finite features");
    if (b.label) domain_.check(*b.label);
    if (b.gold_labels) {
      if (static_cast<int>(b.gold_labels->size()) != b.size())
        throw Error(ErrorKind::kInvalidInput,
                    "bag " + std::to_string(i) + " gold label count mismatch");
      for (Label l : *b.gold_labels) domain_.check(l);
    }
  }
}

std::size_t Dataset::instance_count() const {
  std::size_t n = 0;
  for (const auto& b : bags_) n += static_cast<std::size_t>(b.size());
  return n;
}

bool Dataset::all_labeled() const {
  return std::all_of(bags_.begin(), bags_.end(),
                     [](const Bag& b) { return b.label.has_value(); });
}

bool Dataset::has_gold_labels() const {
  return std::all_of(bags_.begin(), bags_.end(),
                     [](const Bag& b) { return b.gold_labels.has_value(); });
}

MatrixXd Dataset::pooled_instances() const {
  MatrixXd out(static_cast<Eigen::Index>(instance_count()), p_);
  Eigen::Index row = 0;
  for (const auto& b : bags_) {
    out.middleRows(row, b.size()) = b.instances;
    row += b.size();
  }
  return out;
}

Dataset Dataset::without(std::size_t index) const {
  std::vector<Bag> out;
  out.reserve(bags_.size() - 1);
  for (std::size_t i = 0; i < bags_.size(); ++i)
    if (i != index) out.push_back(bags_[i]);
  return Dataset(std::move(out), domain_);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Bag> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(bags_.at(i));
  return Dataset(std::move(out), domain_);
}

bool is_compatible(Label i, Label b, const LabelDomain& domain) {
  domain.check(i);
  domain.check(b);
  return i == kNormalLabel || i == b;
}

bool is_feasible(std::span<const Label> labels, const LabelDomain& domain) {
  return bag_label_of(labels, domain) != kInfeasibleLabel;
}

Label bag_label_of(std::span<const Label> labels, const LabelDomain& domain) {
  if (labels.empty())
    throw Error(ErrorKind::kInvalidInput, "empty label sequence");
  Label abnormal = kNormalLabel;
  for (Label l : labels) {
    domain.check(l);
    if (l == kNormalLabel) continue;
    if (abnormal == kNormalLabel)
      abnormal = l;
    else if (abnormal != l)
      return kInfeasibleLabel;
  }
  return abnormal;
}

Labeling initial_labeling(const Dataset& data) {
  Labeling out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Bag& b = data.bag(i);
    if (!b.label)
      throw Error(ErrorKind::kInvalidInput,
                  "bag " + std::to_string(i) + " is unlabeled");
    out.emplace_back(static_cast<std::size_t>(b.size()), *b.label);
  }
  return out;
}

}  // namespace genmil
