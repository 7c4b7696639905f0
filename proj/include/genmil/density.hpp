#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <variant>
#include <vector>

#include "genmil/core.hpp"

namespace genmil {

using Rng = std::mt19937_64;

enum class DensityKind {
  kGaussian,      // full covariance
  kGaussianDiag,  // independent dimensions
  kKde,           // product-kernel KDE
  kCopula,        // Gaussian copula over KDE marginals
  kCopulaDiag,    // KDE marginals with the independence copula
};

std::string_view to_string(DensityKind kind);
DensityKind parse_density_kind(std::string_view name);

// Minimum number of samples each density kind can be fitted on.
int min_samples(DensityKind kind);

namespace density_constants {
inline constexpr double kVarianceFloor = 1e-9;
inline constexpr double kBandwidthFloor = 1e-9;
inline constexpr double kRidgeScale = 1e-6;
// Oversmoothing constant for a Gaussian kernel.
inline constexpr double kMspConstant = 1.144;
inline constexpr double kInverseCdfTolerance = 1e-9;
}  // namespace density_constants

double normal_cdf(double z);
double normal_quantile(double u);

class GaussianDensity {
 public:
  // Covariance must be symmetric positive definite.
  GaussianDensity(VectorXd mean, MatrixXd covariance, bool diagonal_only);

  // MLE fit (denominator n), variance floor, ridge only when Cholesky fails.
  static GaussianDensity fit(const MatrixXd& samples, bool diagonal_only);

  double log_pdf(const VectorXd& f) const;
  MatrixXd sample(int count, Rng& rng) const;

  const VectorXd& mean() const noexcept { return mean_; }
  const MatrixXd& covariance() const noexcept { return cov_; }
  bool diagonal_only() const noexcept { return diagonal_; }
  int dim() const noexcept { return static_cast<int>(mean_.size()); }

 private:
  VectorXd mean_;
  MatrixXd cov_;
  bool diagonal_;
  MatrixXd chol_;  // lower factor
  double log_det_ = 0.0;
};

class KdeDensity {
 public:
  KdeDensity(MatrixXd support, VectorXd bandwidths);

  // Maximal-smoothing bandwidth h_k = 1.144 * sd_k * n^(-1/(p+4)).
  static KdeDensity fit(const MatrixXd& samples);
  static VectorXd msp_bandwidths(const MatrixXd& samples);

  double log_pdf(const VectorXd& f) const;
  MatrixXd sample(int count, Rng& rng) const;

  // One-dimensional only.
  double cdf(double x) const;
  double pdf_1d(double x) const;
  double log_pdf_1d(double x) const;
  // Bisection on [min - 10h, max + 10h].
  double inverse_cdf(double u) const;

  const MatrixXd& support() const noexcept { return support_; }
  const VectorXd& bandwidths() const noexcept { return bandwidths_; }
  int dim() const noexcept { return static_cast<int>(support_.cols()); }
  int support_size() const noexcept { return static_cast<int>(support_.rows()); }

 private:
  void require_1d(const char* op) const;

  MatrixXd support_;
  VectorXd bandwidths_;
  MatrixXd scaled_t_;  // (support / h)^T, p x n
  double log_norm_ = 0.0;
};

class CopulaDensity {
 public:
  // clip is the pseudo-observation clipping level applied to marginal CDFs.
  CopulaDensity(std::vector<KdeDensity> marginals, MatrixXd correlation,
                double clip);

  // independent = true keeps identity correlation (product of marginals).
  static CopulaDensity fit(const MatrixXd& samples, bool independent);

  double log_pdf(const VectorXd& f) const;
  // Gaussian-copula log density at the normal scores z.
  double log_copula(const VectorXd& z) const;
  VectorXd normal_scores(const VectorXd& f) const;
  MatrixXd sample(int count, Rng& rng) const;

  const std::vector<KdeDensity>& marginals() const noexcept { return marginals_; }
  const MatrixXd& correlation() const noexcept { return corr_; }
  double clip() const noexcept { return clip_; }
  int dim() const noexcept { return static_cast<int>(marginals_.size()); }

 private:
  std::vector<KdeDensity> marginals_;
  MatrixXd corr_;
  double clip_;
  MatrixXd chol_;
  MatrixXd precision_minus_identity_;
  double log_det_ = 0.0;
};

// Sample correlation shrunk toward identity by the smallest lambda in
// {0, 0.01, 0.02, ...} that leaves it positive definite.
MatrixXd regularized_correlation(const MatrixXd& scores);

class DensityModel {
 public:
  using Variant = std::variant<GaussianDensity, KdeDensity, CopulaDensity>;

  DensityModel(DensityKind kind, Variant model);

  DensityKind kind() const noexcept { return kind_; }
  const Variant& model() const noexcept { return model_; }
  int dim() const;

  double log_pdf(const VectorXd& f) const;
  // log_pdf of every row.
  VectorXd log_pdf_rows(const MatrixXd& rows) const;
  MatrixXd sample(int count, Rng& rng) const;
  MatrixXd sample(int count, std::uint64_t seed) const;

 private:
  DensityKind kind_;
  Variant model_;
};

// Throws kInsufficientData when samples.rows() < min_samples(kind).
DensityModel fit_density(DensityKind kind, const MatrixXd& samples);

}  // namespace genmil
