#include "spotune/kriging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spotune/errors.hpp"
#include "spotune/optim.hpp"

namespace spotune {

namespace {

// Reciprocal condition estimate below which R + lambda I counts as singular.
constexpr double kMinRcond = 1e-10;
constexpr double kSigmaFloor = 1e-300;
constexpr double kFirstEscalatedNugget = 1e-12;

}  // namespace

class KrigingBuilder {
 public:
  KrigingBuilder(const std::vector<std::vector<double>>& x, std::span<const double> y,
                 const KrigingConfig& config)
      : config_(config) {
    n_ = x.size();
    if (n_ != y.size()) throw ConfigError("Kriging: number of inputs and targets differ");
    if (n_ < 2) throw FitError("Kriging: need at least two training points");
    d_ = x.front().size();
    if (d_ == 0) throw ConfigError("Kriging: zero-dimensional inputs");
    for (const auto& row : x) {
      if (row.size() != d_) throw ConfigError("Kriging: ragged input matrix");
    }
    for (double v : y) {
      if (!std::isfinite(v)) throw ConfigError("Kriging: targets must be finite");
    }
    categorical_ = config.categorical.empty() ? std::vector<bool>(d_, false) : config.categorical;
    if (categorical_.size() != d_) throw ConfigError("Kriging: categorical mask has wrong length");

    offset_.assign(d_, 0.0);
    scale_.assign(d_, 1.0);
    const bool box = !config.lower.empty();
    if (box && (config.lower.size() != d_ || config.upper.size() != d_))
      throw ConfigError("Kriging: normalization box has wrong length");
    for (std::size_t j = 0; j < d_; ++j) {
      if (categorical_[j]) continue;
      double lo, hi;
      if (box) {
        lo = config.lower[j];
        hi = config.upper[j];
      } else {
        lo = hi = x[0][j];
        for (const auto& row : x) {
          lo = std::min(lo, row[j]);
          hi = std::max(hi, row[j]);
        }
      }
      offset_[j] = lo;
      scale_[j] = hi > lo ? hi - lo : 1.0;
    }

    x_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(d_));
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < d_; ++j) x_(i, j) = normalize_coord(x[i][j], j);
    }
    y_ = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n_));

    bool distinct = false;
    for (std::size_t i = 1; i < n_ && !distinct; ++i) distinct = !(x_.row(i) == x_.row(0));
    if (!distinct) throw FitError("Kriging: need at least two distinct training points");

    // Squared per-dimension distances of every pair (i < k).
    dist_.resize(static_cast<Eigen::Index>(n_ * (n_ - 1) / 2), static_cast<Eigen::Index>(d_));
    Eigen::Index p = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = i + 1; k < n_; ++k, ++p) {
        for (std::size_t j = 0; j < d_; ++j) dist_(p, j) = coord_distance2(x_(i, j), x_(k, j), j);
      }
    }
  }

  std::size_t dimension() const { return d_; }

  double log_likelihood(std::span<const double> theta, double lambda) const {
    Eigen::LLT<Eigen::MatrixXd> llt;
    if (!factor(theta, lambda, llt)) return -std::numeric_limits<double>::infinity();
    const auto stats = concentrate(llt);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * static_cast<double>(n_) * std::log(std::max(stats.sigma2, kSigmaFloor)) - 0.5 * logdet;
  }

  KrigingModel build(std::span<const double> theta, double lambda) const {
    Eigen::LLT<Eigen::MatrixXd> llt;
    const double max_lambda = std::pow(10.0, config_.log10_lambda_max);
    while (!factor(theta, lambda, llt)) {
      lambda = lambda > 0.0 ? lambda * 10.0 : kFirstEscalatedNugget;
      if (lambda > max_lambda * (1.0 + 1e-12))
        throw FitError("Kriging: correlation matrix singular even at the maximum nugget");
    }
    KrigingModel m;
    m.theta_.assign(theta.begin(), theta.end());
    m.lambda_ = lambda;
    m.offset_ = offset_;
    m.scale_ = scale_;
    m.categorical_ = categorical_;
    m.x_ = x_;
    m.y_ = y_;
    const auto stats = concentrate(llt);
    m.mu_ = stats.mu;
    m.sigma2_ = stats.sigma2;
    m.alpha_ = stats.alpha;
    m.rinv_one_ = stats.rinv_one;
    m.one_rinv_one_ = stats.one_rinv_one;
    m.log_likelihood_ = -0.5 * static_cast<double>(n_) * std::log(std::max(stats.sigma2, kSigmaFloor)) -
                        llt.matrixLLT().diagonal().array().log().sum();
    m.chol_ = std::move(llt);
    return m;
  }

  KrigingModel fit() const {
    const std::size_t dims = d_ + (config_.use_lambda ? 1 : 0);
    std::vector<double> lo(dims, config_.log10_theta_min), hi(dims, config_.log10_theta_max);
    if (config_.use_lambda) {
      lo.back() = config_.log10_lambda_min;
      hi.back() = config_.log10_lambda_max;
    }
    std::vector<double> theta(d_);
    auto unpack = [&](std::span<const double> z) {
      for (std::size_t j = 0; j < d_; ++j) theta[j] = std::pow(10.0, z[j]);
      return config_.use_lambda ? std::pow(10.0, z[d_]) : 0.0;
    };
    DEConfig de;
    de.max_evals = config_.mle_budget ? config_.mle_budget : 500 * (d_ + 1);
    de.seed = config_.seed;
    const auto best = de_minimize(
        [&](std::span<const double> z) {
          const double lambda = unpack(z);
          return -log_likelihood(theta, lambda);
        },
        lo, hi, de);
    const double lambda = unpack(best.x_best);
    return build(theta, lambda);
  }

 private:
  struct Concentrated {
    double mu;
    double sigma2;
    double one_rinv_one;
    Eigen::VectorXd alpha;
    Eigen::VectorXd rinv_one;
  };

  double normalize_coord(double v, std::size_t j) const {
    return categorical_[j] ? std::nearbyint(v) : (v - offset_[j]) / scale_[j];
  }

  double coord_distance2(double a, double b, std::size_t j) const {
    if (categorical_[j]) return a == b ? 0.0 : 1.0;
    return (a - b) * (a - b);
  }

  bool factor(std::span<const double> theta, double lambda, Eigen::LLT<Eigen::MatrixXd>& llt) const {
    const Eigen::Map<const Eigen::VectorXd> th(theta.data(), static_cast<Eigen::Index>(d_));
    const Eigen::VectorXd corr = (-(dist_ * th)).array().exp();
    Eigen::MatrixXd r(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    Eigen::Index p = 0;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      r(i, i) = 1.0 + lambda;
      for (Eigen::Index k = i + 1; k < r.rows(); ++k, ++p) r(i, k) = r(k, i) = corr(p);
    }
    llt.compute(r);
    return llt.info() == Eigen::Success && llt.rcond() >= kMinRcond;
  }

  Concentrated concentrate(const Eigen::LLT<Eigen::MatrixXd>& llt) const {
    Concentrated c;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n_));
    c.rinv_one = llt.solve(ones);
    c.one_rinv_one = c.rinv_one.sum();
    c.mu = c.rinv_one.dot(y_) / c.one_rinv_one;
    const Eigen::VectorXd resid = y_.array() - c.mu;
    c.alpha = llt.solve(resid);
    c.sigma2 = std::max(0.0, resid.dot(c.alpha) / static_cast<double>(n_));
    return c;
  }

  const KrigingConfig& config_;
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<bool> categorical_;
  std::vector<double> offset_;
  std::vector<double> scale_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd dist_;
};

// ---------------------------------------------------------------------------

Eigen::VectorXd KrigingModel::normalize(std::span<const double> x) const {
  if (x.size() != dimension()) throw ConfigError("Kriging: query has wrong dimension");
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) {
    v(static_cast<Eigen::Index>(j)) = categorical_[j] ? std::nearbyint(x[j]) : (x[j] - offset_[j]) / scale_[j];
  }
  return v;
}

Eigen::VectorXd KrigingModel::correlations(const Eigen::VectorXd& xn, const Eigen::MatrixXd& sites) const {
  Eigen::VectorXd r(sites.rows());
  for (Eigen::Index i = 0; i < sites.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < sites.cols(); ++j) {
      const double diff = xn(j) - sites(i, j);
      s += theta_[static_cast<std::size_t>(j)] *
           (categorical_[static_cast<std::size_t>(j)] ? (diff == 0.0 ? 0.0 : 1.0) : diff * diff);
    }
    r(i) = std::exp(-s);
  }
  return r;
}

double KrigingModel::predict_mean(std::span<const double> x) const {
  return mu_ + correlations(normalize(x), x_).dot(alpha_);
}

KrigingPrediction KrigingModel::predict(std::span<const double> x) const {
  const Eigen::VectorXd xn = normalize(x);
  const Eigen::VectorXd r = correlations(xn, x_);
  KrigingPrediction out;
  out.mean = mu_ + r.dot(alpha_);
  double reduction, gls;
  if (reinterpolated_) {
    const Eigen::VectorXd r0 = correlations(xn, sites_);
    reduction = site_chol_.matrixL().solve(r0).squaredNorm();
    gls = 1.0 - site_rinv_one_.dot(r0);
    gls = gls * gls / site_one_rinv_one_;
  } else {
    reduction = chol_.matrixL().solve(r).squaredNorm();
    gls = 1.0 - rinv_one_.dot(r);
    gls = gls * gls / one_rinv_one_;
  }
  out.variance = std::max(0.0, sigma2_ * (1.0 - reduction + gls));
  return out;
}

KrigingModel fit_kriging(const std::vector<std::vector<double>>& x, std::span<const double> y,
                         const KrigingConfig& config) {
  if (x.empty()) throw FitError("Kriging: no training data");
  return KrigingBuilder(x, y, config).fit();
}

KrigingModel fit_kriging_fixed(const std::vector<std::vector<double>>& x, std::span<const double> y,
                               std::span<const double> theta, double lambda,
                               const KrigingConfig& config) {
  if (x.empty()) throw FitError("Kriging: no training data");
  KrigingBuilder b(x, y, config);
  if (theta.size() != b.dimension()) throw ConfigError("Kriging: theta has wrong length");
  if (!(lambda >= 0.0)) throw ConfigError("Kriging: nugget must be non-negative");
  return b.build(theta, lambda);
}

double kriging_log_likelihood(const std::vector<std::vector<double>>& x, std::span<const double> y,
                              std::span<const double> theta, double lambda,
                              const KrigingConfig& config) {
  KrigingBuilder b(x, y, config);
  return b.log_likelihood(theta, lambda);
}

KrigingModel reinterpolate(const KrigingModel& model) {
  KrigingModel m = model;
  if (model.lambda_ == 0.0) return m;

  const Eigen::Index n = model.x_.rows();
  // Correlation without the nugget over all training points.
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) c.col(i) = model.correlations(model.x_.row(i).transpose(), model.x_);
  m.sigma2_ = std::max(0.0, model.alpha_.dot(c * model.alpha_) / static_cast<double>(n));

  std::vector<Eigen::Index> unique;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool dup = std::any_of(unique.begin(), unique.end(),
                                 [&](Eigen::Index u) { return model.x_.row(u) == model.x_.row(i); });
    if (!dup) unique.push_back(i);
  }
  const auto nu = static_cast<Eigen::Index>(unique.size());
  m.sites_.resize(nu, model.x_.cols());
  Eigen::MatrixXd r0(nu, nu);
  for (Eigen::Index a = 0; a < nu; ++a) {
    m.sites_.row(a) = model.x_.row(unique[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < nu; ++b) r0(a, b) = c(unique[static_cast<std::size_t>(a)], unique[static_cast<std::size_t>(b)]);
  }
  // The nugget-free matrix can be numerically indefinite; add the smallest
  // jitter that lets the factorization through.
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd rj = r0;
    rj.diagonal().array() += jitter;
    m.site_chol_.compute(rj);
    if (m.site_chol_.info() == Eigen::Success) break;
    jitter = jitter == 0.0 ? 1e-14 : jitter * 10.0;
    if (jitter > model.lambda_) throw FitError("Kriging: reinterpolation failed to factorize");
  }
  m.site_rinv_one_ = m.site_chol_.solve(Eigen::VectorXd::Ones(nu));
  m.site_one_rinv_one_ = m.site_rinv_one_.sum();
  m.reinterpolated_ = true;
  return m;
}

}  // namespace spotune
