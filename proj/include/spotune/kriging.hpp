#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace spotune {

struct KrigingConfig {
  // Normalization box on the raw scale. Empty: per-dimension data range.
  std::vector<double> lower;
  std::vector<double> upper;
  // Dimensions holding categorical level indices (0/1 distance). Empty: none.
  std::vector<bool> categorical;
  double log10_theta_min = -4.0;
  double log10_theta_max = 2.0;
  double log10_lambda_min = -6.0;
  double log10_lambda_max = 0.0;
  // false: the nugget is fixed at 0 (escalated only if factorization fails).
  bool use_lambda = true;
  // Likelihood evaluations spent by DE; 0 means 500 * (d + 1).
  std::size_t mle_budget = 0;
  std::uint64_t seed = 0;
};

struct KrigingPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

// Ordinary Kriging with anisotropic Gaussian correlation
// exp(-sum_j theta_j d_j^2) and a nugget lambda on the correlation diagonal.
// Immutable once built.
class KrigingModel {
 public:
  KrigingPrediction predict(std::span<const double> x) const;
  // Mean only; O(n d).
  double predict_mean(std::span<const double> x) const;

  const std::vector<double>& theta() const { return theta_; }
  double lambda() const { return lambda_; }
  double mu() const { return mu_; }
  double sigma2() const { return sigma2_; }
  double log_likelihood() const { return log_likelihood_; }
  bool reinterpolated() const { return reinterpolated_; }
  std::size_t dimension() const { return static_cast<std::size_t>(x_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }
  // Training inputs normalized to [0, 1] (categorical columns left as indices).
  const Eigen::MatrixXd& normalized_inputs() const { return x_; }
  const Eigen::VectorXd& targets() const { return y_; }

 private:
  friend class KrigingBuilder;
  friend KrigingModel reinterpolate(const KrigingModel& model);

  Eigen::VectorXd normalize(std::span<const double> x) const;
  Eigen::VectorXd correlations(const Eigen::VectorXd& xn, const Eigen::MatrixXd& sites) const;

  std::vector<double> theta_;
  double lambda_ = 0.0;
  double mu_ = 0.0;
  double sigma2_ = 0.0;
  double log_likelihood_ = 0.0;
  bool reinterpolated_ = false;

  std::vector<double> offset_;
  std::vector<double> scale_;
  std::vector<bool> categorical_;

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::LLT<Eigen::MatrixXd> chol_;  // of R + lambda I
  Eigen::VectorXd alpha_;             // (R + lambda I)^-1 (y - mu)
  Eigen::VectorXd rinv_one_;          // (R + lambda I)^-1 1
  double one_rinv_one_ = 1.0;

  // Interpolating structure over unique sites, used for variance after
  // reinterpolation.
  Eigen::MatrixXd sites_;
  Eigen::LLT<Eigen::MatrixXd> site_chol_;
  Eigen::VectorXd site_rinv_one_;
  double site_one_rinv_one_ = 1.0;
};

// Maximum-likelihood fit: (theta, lambda) maximize the concentrated
// log-likelihood, searched on the log10 scale by differential evolution.
// Throws FitError when the correlation matrix stays singular at the largest
// admissible nugget.
KrigingModel fit_kriging(const std::vector<std::vector<double>>& x, std::span<const double> y,
                         const KrigingConfig& config);

// Same model with hyperparameters supplied instead of estimated.
KrigingModel fit_kriging_fixed(const std::vector<std::vector<double>>& x, std::span<const double> y,
                               std::span<const double> theta, double lambda,
                               const KrigingConfig& config);

// Concentrated log-likelihood of (theta, lambda) for the given data, with the
// same normalization the fit would use. -infinity if R + lambda I is not
// numerically positive definite.
double kriging_log_likelihood(const std::vector<std::vector<double>>& x, std::span<const double> y,
                              std::span<const double> theta, double lambda,
                              const KrigingConfig& config);

// Keeps the smoothed mean of a nugget model but makes it interpolate those
// smoothed values: variance vanishes at every training site.
KrigingModel reinterpolate(const KrigingModel& model);

}  // namespace spotune
