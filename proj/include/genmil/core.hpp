#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace genmil {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Instance and bag labels live in {1..t}. 0 is reserved for the infeasible
// bag "label" produced by the deterministic max rule.
using Label = int;
inline constexpr Label kNormalLabel = 1;
inline constexpr Label kInfeasibleLabel = 0;

enum class ErrorKind {
  kInvalidLabel,
  kInvalidInput,
  kInsufficientData,
  kInvalidState,
  kUnsupportedDomain,
  kDimensionMismatch,
  kParse,
  kConfig,
  kIo,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class LabelDomain {
 public:
  explicit LabelDomain(int t);

  int size() const noexcept { return t_; }
  bool contains(Label l) const noexcept { return l >= 1 && l <= t_; }
  // Throws kInvalidLabel if l is outside {1..t}.
  void check(Label l) const;

  friend bool operator==(const LabelDomain&, const LabelDomain&) = default;

 private:
  int t_;
};

struct Bag {
  std::string id;
  std::optional<Label> label;  // absent for unlabeled (inference) bags
  MatrixXd instances;          // m x p, one instance per row
  std::optional<std::vector<Label>> gold_labels;

  int size() const noexcept { return static_cast<int>(instances.rows()); }
  int dim() const noexcept { return static_cast<int>(instances.cols()); }
};

class Dataset {
 public:
  Dataset(std::vector<Bag> bags, LabelDomain domain);

  const std::vector<Bag>& bags() const noexcept { return bags_; }
  const Bag& bag(std::size_t i) const { return bags_.at(i); }
  std::size_t size() const noexcept { return bags_.size(); }
  int dim() const noexcept { return p_; }
  const LabelDomain& domain() const noexcept { return domain_; }

  std::size_t instance_count() const;
  bool all_labeled() const;
  bool has_gold_labels() const;

  // Every instance stacked in bag order.
  MatrixXd pooled_instances() const;
  // New dataset with the given bags removed/kept, same domain.
  Dataset without(std::size_t index) const;
  Dataset subset(std::span<const std::size_t> indices) const;
  // Applies f to every bag's instance matrix; f may change p.
  template <typename F>
  Dataset map_instances(F&& f) const {
    std::vector<Bag> out = bags_;
    for (auto& b : out) b.instances = f(b.instances);
    return Dataset(std::move(out), domain_);
  }

 private:
  std::vector<Bag> bags_;
  LabelDomain domain_;
  int p_ = 0;
};

// One label vector per bag, parallel to Dataset::bags().
using Labeling = std::vector<std::vector<Label>>;

bool is_compatible(Label i, Label b, const LabelDomain& domain);
bool is_feasible(std::span<const Label> labels, const LabelDomain& domain);
// max_j labels[j] when feasible, kInfeasibleLabel otherwise.
Label bag_label_of(std::span<const Label> labels, const LabelDomain& domain);

// Labeling with every instance set to its bag label.
Labeling initial_labeling(const Dataset& data);

}  // namespace genmil
