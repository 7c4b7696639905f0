#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "genmil/bif.hpp"
#include "genmil/core.hpp"
#include "genmil/eval.hpp"

namespace genmil {

// ------------------------------------------------------------- Bag CSV
//
// Header: bag_id,bag_label,instance_label,f_1,...,f_p
// One row per instance. Empty bag_label marks an unlabeled bag; empty
// instance_label means no gold label. Rows are grouped by bag_id in order
// of first appearance. t is the largest label seen (at least 2) unless
// `classes` is given.

Dataset read_bag_csv(std::istream& in, std::optional<int> classes = std::nullopt,
                     const std::string& source = "<stream>");
Dataset load_bag_csv(const std::filesystem::path& path,
                     std::optional<int> classes = std::nullopt);
void write_bag_csv(const Dataset& data, std::ostream& out);
void save_bag_csv(const Dataset& data, const std::filesystem::path& path);

// Shortest round-trip representation used by every text output.
std::string format_double(double v);

// ---------------------------------------------------------------- MUSK1
//
// UCI "clean1" rows: molecule,conformation,f1..f166,class with class 0/1
// (optionally written "0." / "1."). Molecules become bags; class 0 maps to
// label 1 (normal) and class 1 to label 2.

inline constexpr int kMuskFeatures = 166;
Dataset read_musk1(std::istream& in, const std::string& source = "<stream>");
Dataset load_musk1(const std::filesystem::path& path);

// ------------------------------------------------------------ Generator

struct ClassDensitySpec {
  VectorXd mean;
  MatrixXd covariance;
  bool diagonal = false;
};

struct GeneratorConfig {
  int t = 3;
  int p = 8;
  VectorXd bag_prior;
  MatrixXd instance_table;  // (b-1, i-1) = P(I=i|B=b)
  std::vector<ClassDensitySpec> classes;
  int bag_count = 80;
  int bag_size_min = 15;
  int bag_size_max = 25;
  std::uint64_t seed = 1;
  // When set, disordered bags are redrawn until their share of normal
  // instances lies in [first, second].
  std::optional<std::pair<double, double>> normal_fraction_range;
};

GeneratorConfig parse_generator_config(const std::string& json_text);
GeneratorConfig load_generator_config(const std::filesystem::path& path);
std::string generator_config_to_json(const GeneratorConfig& config);

// Three-class, p=8 design with unit-variance classes whose means are at
// least 7 standard deviations apart and disordered bags holding 30-70%
// normal instances.
GeneratorConfig default_synthetic_config(std::uint64_t seed = 1);

BifParams generator_params(const GeneratorConfig& config);
Dataset generate_synthetic(const GeneratorConfig& config);

// ------------------------------------------------------------- Reports

void write_report(const EvalReport& report, std::ostream& out);

// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace genmil
