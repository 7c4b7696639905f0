#include "genmil/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace genmil {

namespace dc = density_constants;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_sum_exp(const Eigen::ArrayXd& v) {
  const double hi = v.maxCoeff();
  if (!std::isfinite(hi)) return hi;
  return hi + std::log((v - hi).exp().sum());
}

void require_rows(const MatrixXd& samples, int needed, const char* what) {
  if (samples.rows() < needed)
    throw Error(ErrorKind::kInsufficientData,
                std::string(what) + " needs at least " +
                    std::to_string(needed) + " samples, got " +
                    std::to_string(samples.rows()));
  if (!samples.allFinite())
    throw Error(ErrorKind::kInvalidInput,
                std::string(what) + " samples contain non-finite values");
}

void require_dim(int expected, Eigen::Index got) {
  if (got != expected)
    throw Error(ErrorKind::kDimensionMismatch,
                "expected a " + std::to_string(expected) +
                    "-vector, got dimension " + std::to_string(got));
}

}  // namespace

std::string_view to_string(DensityKind kind) {
  switch (kind) {
    case DensityKind::kGaussian: return "gauss";
    case DensityKind::kGaussianDiag: return "gauss-diag";
    case DensityKind::kKde: return "kde";
    case DensityKind::kCopula: return "copula";
    case DensityKind::kCopulaDiag: return "copula-diag";
  }
  return "?";
}

DensityKind parse_density_kind(std::string_view name) {
  for (auto k : {DensityKind::kGaussian, DensityKind::kGaussianDiag,
                 DensityKind::kKde, DensityKind::kCopula,
                 DensityKind::kCopulaDiag})
    if (to_string(k) == name) return k;
  throw Error(ErrorKind::kConfig,
              "unknown density kind '" + std::string(name) + "'");
}

int min_samples(DensityKind kind) {
  switch (kind) {
    case DensityKind::kCopula:
    case DensityKind::kCopulaDiag:
      return 3;
    default:
      return 2;
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double u) {
  if (u <= 0.0) return -std::numeric_limits<double>::infinity();
  if (u >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

// ---------------------------------------------------------------- Gaussian

GaussianDensity::GaussianDensity(VectorXd mean, MatrixXd covariance,
                                 bool diagonal_only)
    : mean_(std::move(mean)), cov_(std::move(covariance)),
      diagonal_(diagonal_only) {
  const auto p = mean_.size();
  if (p < 1 || cov_.rows() != p || cov_.cols() != p)
    throw Error(ErrorKind::kDimensionMismatch, "gaussian mean/covariance shape");
  if (!mean_.allFinite() || !cov_.allFinite())
    throw Error(ErrorKind::kInvalidInput, "gaussian parameters not finite");
  if (diagonal_) {
    MatrixXd d = cov_.diagonal().asDiagonal();
    if (d != cov_)
      throw Error(ErrorKind::kInvalidInput,
                  "diagonal gaussian has off-diagonal covariance");
  }
  if (!cov_.isApprox(cov_.transpose(), 1e-12))
    throw Error(ErrorKind::kInvalidInput, "gaussian covariance not symmetric");
  Eigen::LLT<MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::kInvalidInput,
                "gaussian covariance not positive definite");
  chol_ = llt.matrixL();
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
}

GaussianDensity GaussianDensity::fit(const MatrixXd& samples,
                                     bool diagonal_only) {
  require_rows(samples, 2, "gaussian fit");
  const double n = static_cast<double>(samples.rows());
  VectorXd mean = samples.colwise().mean().transpose();
  MatrixXd centered = samples.rowwise() - mean.transpose();
  MatrixXd cov = (centered.transpose() * centered) / n;
  cov = 0.5 * (cov + cov.transpose());
  if (diagonal_only) {
    VectorXd var = cov.diagonal();
    cov = var.asDiagonal();
  }
  for (Eigen::Index k = 0; k < cov.rows(); ++k)
    cov(k, k) = std::max(cov(k, k), dc::kVarianceFloor);

  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    double ridge = dc::kRidgeScale * cov.diagonal().mean();
    MatrixXd base = cov;
    for (int attempt = 0; attempt < 12; ++attempt, ridge *= 10.0) {
      cov = base;
      cov.diagonal().array() += ridge;
      llt.compute(cov);
      if (llt.info() == Eigen::Success) break;
    }
  }
  return GaussianDensity(std::move(mean), std::move(cov), diagonal_only);
}

double GaussianDensity::log_pdf(const VectorXd& f) const {
  require_dim(dim(), f.size());
  VectorXd z = chol_.triangularView<Eigen::Lower>().solve(f - mean_);
  return -0.5 * (dim() * kLog2Pi + log_det_ + z.squaredNorm());
}

MatrixXd GaussianDensity::sample(int count, Rng& rng) const {
  std::normal_distribution<double> normal;
  MatrixXd out(count, dim());
  VectorXd z(dim());
  for (int r = 0; r < count; ++r) {
    for (int k = 0; k < dim(); ++k) z[k] = normal(rng);
    out.row(r) = (mean_ + chol_ * z).transpose();
  }
  return out;
}

// --------------------------------------------------------------------- KDE

KdeDensity::KdeDensity(MatrixXd support, VectorXd bandwidths)
    : support_(std::move(support)), bandwidths_(std::move(bandwidths)) {
  if (support_.rows() < 1 || support_.cols() < 1)
    throw Error(ErrorKind::kInvalidInput, "kde needs at least one support point");
  if (bandwidths_.size() != support_.cols())
    throw Error(ErrorKind::kDimensionMismatch, "kde bandwidth count");
  if (!(bandwidths_.array() > 0.0).all() || !bandwidths_.allFinite())
    throw Error(ErrorKind::kInvalidInput, "kde bandwidths must be positive");
  scaled_t_ = (support_ * bandwidths_.cwiseInverse().asDiagonal()).transpose();
  log_norm_ = -std::log(static_cast<double>(support_.rows())) -
              bandwidths_.array().log().sum() - 0.5 * dim() * kLog2Pi;
}

VectorXd KdeDensity::msp_bandwidths(const MatrixXd& samples) {
  const double n = static_cast<double>(samples.rows());
  const double p = static_cast<double>(samples.cols());
  VectorXd mean = samples.colwise().mean().transpose();
  VectorXd sd = ((samples.rowwise() - mean.transpose()).array().square()
                     .colwise().sum() / (n - 1.0)).sqrt().transpose();
  const double rate = std::pow(n, -1.0 / (p + 4.0));
  VectorXd h = dc::kMspConstant * rate * sd;
  return h.cwiseMax(dc::kBandwidthFloor);
}

KdeDensity KdeDensity::fit(const MatrixXd& samples) {
  require_rows(samples, 2, "kde fit");
  return KdeDensity(samples, msp_bandwidths(samples));
}

double KdeDensity::log_pdf(const VectorXd& f) const {
  require_dim(dim(), f.size());
  VectorXd g = f.cwiseQuotient(bandwidths_);
  Eigen::ArrayXd e = -0.5 * (scaled_t_.colwise() - g).colwise().squaredNorm().transpose().array();
  return log_sum_exp(e) + log_norm_;
}

MatrixXd KdeDensity::sample(int count, Rng& rng) const {
  std::uniform_int_distribution<int> pick(0, support_size() - 1);
  std::normal_distribution<double> normal;
  MatrixXd out(count, dim());
  for (int r = 0; r < count; ++r) {
    const int s = pick(rng);
    for (int k = 0; k < dim(); ++k)
      out(r, k) = support_(s, k) + bandwidths_[k] * normal(rng);
  }
  return out;
}

void KdeDensity::require_1d(const char* op) const {
  if (dim() != 1)
    throw Error(ErrorKind::kDimensionMismatch,
                std::string(op) + " requires a one-dimensional kde, got p=" +
                    std::to_string(dim()));
}

double KdeDensity::cdf(double x) const {
  require_1d("kde cdf");
  const double h = bandwidths_[0];
  double acc = 0.0;
  for (Eigen::Index s = 0; s < support_.rows(); ++s)
    acc += normal_cdf((x - support_(s, 0)) / h);
  return acc / static_cast<double>(support_.rows());
}

double KdeDensity::log_pdf_1d(double x) const {
  require_1d("kde pdf");
  Eigen::ArrayXd e = -0.5 * ((x / bandwidths_[0]) - scaled_t_.row(0).array()).square().transpose();
  return log_sum_exp(e) + log_norm_;
}

double KdeDensity::pdf_1d(double x) const { return std::exp(log_pdf_1d(x)); }

double KdeDensity::inverse_cdf(double u) const {
  require_1d("kde inverse cdf");
  const double h = bandwidths_[0];
  double lo = support_.col(0).minCoeff() - 10.0 * h;
  double hi = support_.col(0).maxCoeff() + 10.0 * h;
  while (hi - lo > dc::kInverseCdfTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (cdf(mid) < u)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// ------------------------------------------------------------------ Copula

MatrixXd regularized_correlation(const MatrixXd& scores) {
  const auto p = scores.cols();
  const double n = static_cast<double>(scores.rows());
  VectorXd mean = scores.colwise().mean().transpose();
  MatrixXd centered = scores.rowwise() - mean.transpose();
  MatrixXd cov = centered.transpose() * centered / n;
  VectorXd sd = cov.diagonal().cwiseSqrt();
  MatrixXd corr = MatrixXd::Identity(p, p);
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = 0; b < p; ++b)
      if (a != b && sd[a] > 0.0 && sd[b] > 0.0)
        corr(a, b) = cov(a, b) / (sd[a] * sd[b]);
  corr = 0.5 * (corr + corr.transpose());
  corr.diagonal().setOnes();

  const MatrixXd identity = MatrixXd::Identity(p, p);
  for (int step = 0; step <= 100; ++step) {
    const double lambda = 0.01 * step;
    MatrixXd r = (1.0 - lambda) * corr + lambda * identity;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(r, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() > 1e-10) return r;
  }
  return identity;
}

CopulaDensity::CopulaDensity(std::vector<KdeDensity> marginals,
                             MatrixXd correlation, double clip)
    : marginals_(std::move(marginals)), corr_(std::move(correlation)),
      clip_(clip) {
  const auto p = static_cast<Eigen::Index>(marginals_.size());
  if (p < 1) throw Error(ErrorKind::kInvalidInput, "copula needs marginals");
  for (const auto& m : marginals_)
    if (m.dim() != 1)
      throw Error(ErrorKind::kDimensionMismatch, "copula marginals must be 1-D");
  if (corr_.rows() != p || corr_.cols() != p)
    throw Error(ErrorKind::kDimensionMismatch, "copula correlation shape");
  if (!(clip_ > 0.0 && clip_ < 0.5))
    throw Error(ErrorKind::kInvalidInput, "copula clip must lie in (0, 0.5)");
  Eigen::LLT<MatrixXd> llt(corr_);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::kInvalidInput,
                "copula correlation not positive definite");
  chol_ = llt.matrixL();
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
  precision_minus_identity_ =
      llt.solve(MatrixXd::Identity(p, p)) - MatrixXd::Identity(p, p);
}

CopulaDensity CopulaDensity::fit(const MatrixXd& samples, bool independent) {
  require_rows(samples, 3, "copula fit");
  const auto n = samples.rows();
  const auto p = samples.cols();
  const double clip = 1.0 / (2.0 * static_cast<double>(n));
  std::vector<KdeDensity> marginals;
  marginals.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index k = 0; k < p; ++k)
    marginals.push_back(KdeDensity::fit(samples.col(k)));
  if (independent)
    return CopulaDensity(std::move(marginals), MatrixXd::Identity(p, p), clip);

  MatrixXd scores(n, p);
  for (Eigen::Index k = 0; k < p; ++k)
    for (Eigen::Index s = 0; s < n; ++s) {
      const double u = std::clamp(marginals[k].cdf(samples(s, k)), clip, 1.0 - clip);
      scores(s, k) = normal_quantile(u);
    }
  return CopulaDensity(std::move(marginals), regularized_correlation(scores), clip);
}

VectorXd CopulaDensity::normal_scores(const VectorXd& f) const {
  require_dim(dim(), f.size());
  VectorXd z(dim());
  for (int k = 0; k < dim(); ++k) {
    const double u = std::clamp(marginals_[k].cdf(f[k]), clip_, 1.0 - clip_);
    z[k] = normal_quantile(u);
  }
  return z;
}

double CopulaDensity::log_copula(const VectorXd& z) const {
  return -0.5 * log_det_ - 0.5 * z.dot(precision_minus_identity_ * z);
}

double CopulaDensity::log_pdf(const VectorXd& f) const {
  require_dim(dim(), f.size());
  double acc = 0.0;
  for (int k = 0; k < dim(); ++k) acc += marginals_[k].log_pdf_1d(f[k]);
  if (precision_minus_identity_.isZero(0.0) && log_det_ == 0.0) return acc;
  return acc + log_copula(normal_scores(f));
}

MatrixXd CopulaDensity::sample(int count, Rng& rng) const {
  std::normal_distribution<double> normal;
  MatrixXd out(count, dim());
  VectorXd e(dim());
  for (int r = 0; r < count; ++r) {
    for (int k = 0; k < dim(); ++k) e[k] = normal(rng);
    VectorXd z = chol_ * e;
    for (int k = 0; k < dim(); ++k)
      out(r, k) = marginals_[k].inverse_cdf(normal_cdf(z[k]));
  }
  return out;
}

// ------------------------------------------------------------ DensityModel

DensityModel::DensityModel(DensityKind kind, Variant model)
    : kind_(kind), model_(std::move(model)) {}

int DensityModel::dim() const {
  return std::visit([](const auto& m) { return m.dim(); }, model_);
}

double DensityModel::log_pdf(const VectorXd& f) const {
  return std::visit([&](const auto& m) { return m.log_pdf(f); }, model_);
}

VectorXd DensityModel::log_pdf_rows(const MatrixXd& rows) const {
  if (rows.cols() != dim())
    throw Error(ErrorKind::kDimensionMismatch,
                "expected " + std::to_string(dim()) + " features, got " +
                    std::to_string(rows.cols()));
  VectorXd out(rows.rows());
  for (Eigen::Index r = 0; r < rows.rows(); ++r)
    out[r] = log_pdf(rows.row(r).transpose());
  return out;
}

MatrixXd DensityModel::sample(int count, Rng& rng) const {
  if (count < 1)
    throw Error(ErrorKind::kInvalidInput, "sample count must be >= 1");
  return std::visit([&](const auto& m) { return m.sample(count, rng); }, model_);
}

MatrixXd DensityModel::sample(int count, std::uint64_t seed) const {
  Rng rng(seed);
  return sample(count, rng);
}

DensityModel fit_density(DensityKind kind, const MatrixXd& samples) {
  require_rows(samples, min_samples(kind),
               std::string(to_string(kind)).c_str());
  switch (kind) {
    case DensityKind::kGaussian:
      return {kind, GaussianDensity::fit(samples, false)};
    case DensityKind::kGaussianDiag:
      return {kind, GaussianDensity::fit(samples, true)};
    case DensityKind::kKde:
      return {kind, KdeDensity::fit(samples)};
    case DensityKind::kCopula:
      return {kind, CopulaDensity::fit(samples, false)};
    case DensityKind::kCopulaDiag:
      return {kind, CopulaDensity::fit(samples, true)};
  }
  throw Error(ErrorKind::kConfig, "unknown density kind");
}

}  // namespace genmil
