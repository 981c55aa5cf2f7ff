#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rblab/random.hpp"

namespace rblab {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

template <typename Scalar>
constexpr Scalar log_two_pi = Scalar(1.8378770664093454835606594728112353L);

template <typename Scalar>
bool is_symmetric(const Matrix<Scalar>& m, Scalar tol) {
  const Scalar scale = std::max<Scalar>(Scalar(1), m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Cholesky factorization that rejects non-square, asymmetric or
/// non-positive-definite input. The single PD check of the library.
template <typename Scalar>
Eigen::LLT<Matrix<Scalar>> checked_cholesky(const Matrix<Scalar>& cov, const char* what) {
  if (cov.rows() != cov.cols() || cov.rows() == 0)
    throw std::invalid_argument(std::string(what) + ": covariance must be square and non-empty");
  if (!cov.allFinite()) throw std::invalid_argument(std::string(what) + ": covariance has non-finite entries");
  if (!is_symmetric<Scalar>(cov, Scalar(1e-12)))
    throw std::invalid_argument(std::string(what) + ": covariance is not symmetric");
  Eigen::LLT<Matrix<Scalar>> llt(cov);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > Scalar(0)).all())
    throw std::invalid_argument(std::string(what) + ": covariance is not positive definite");
  return llt;
}

template <typename Scalar>
Scalar log_det_from(const Eigen::LLT<Matrix<Scalar>>& llt) {
  return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

/// log(sum(exp(v))) with the maximum shifted out; -inf for an all -inf input.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.derived().array() - top).exp().sum());
}

/// One weighted multivariate normal. Construction factors the covariance;
/// a component that exists is always positive definite.
template <typename Scalar>
class GaussianComponent {
 public:
  GaussianComponent(Scalar weight, Vector<Scalar> mean, Matrix<Scalar> covariance)
      : weight_(weight), mean_(std::move(mean)), covariance_(std::move(covariance)) {
    if (!(weight_ >= Scalar(0) && weight_ <= Scalar(1)))
      throw std::invalid_argument("GaussianComponent: weight must lie in [0, 1]");
    if (mean_.size() == 0 || covariance_.rows() != mean_.size())
      throw std::invalid_argument("GaussianComponent: mean length and covariance order differ");
    llt_ = detail::checked_cholesky<Scalar>(covariance_, "GaussianComponent");
    log_det_ = detail::log_det_from(llt_);
    log_norm_ = Scalar(-0.5) * (Scalar(dim()) * detail::log_two_pi<Scalar> + log_det_);
  }

  Scalar weight() const { return weight_; }
  const Vector<Scalar>& mean() const { return mean_; }
  const Matrix<Scalar>& covariance() const { return covariance_; }
  Index dim() const { return mean_.size(); }
  Scalar log_det() const { return log_det_; }
  Matrix<Scalar> cholesky_lower() const { return llt_.matrixL(); }

  GaussianComponent with_weight(Scalar w) const {
    GaussianComponent c = *this;
    if (!(w >= Scalar(0) && w <= Scalar(1)))
      throw std::invalid_argument("GaussianComponent: weight must lie in [0, 1]");
    c.weight_ = w;
    return c;
  }

  /// log N(x; mean, covariance), weight not included.
  template <typename Derived>
  Scalar log_density(const Eigen::MatrixBase<Derived>& x) const {
    Vector<Scalar> z = x - mean_;
    llt_.matrixL().solveInPlace(z);
    return log_norm_ - Scalar(0.5) * z.squaredNorm();
  }

  /// log N for every row of an n×d matrix.
  Vector<Scalar> log_density_rows(const Matrix<Scalar>& rows) const {
    Matrix<Scalar> z = (rows.rowwise() - mean_.transpose()).transpose();
    llt_.matrixL().solveInPlace(z);
    return (log_norm_ - Scalar(0.5) * z.colwise().squaredNorm().array()).transpose();
  }

  /// mean + L z for a standard normal draw z.
  template <typename Derived>
  Vector<Scalar> transform_standard(const Eigen::MatrixBase<Derived>& z) const {
    return mean_ + llt_.matrixL() * z;
  }

 private:
  Scalar weight_;
  Vector<Scalar> mean_;
  Matrix<Scalar> covariance_;
  Eigen::LLT<Matrix<Scalar>> llt_;
  Scalar log_det_{};
  Scalar log_norm_{};
};

/// Finite Gaussian mixture. Weights sum to one; every component shares the
/// mixture dimension.
template <typename Scalar>
class GaussianMixture {
 public:
  using Component = GaussianComponent<Scalar>;

  explicit GaussianMixture(std::vector<Component> components) : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("GaussianMixture: needs at least one component");
    const Index d = components_.front().dim();
    Scalar total = 0;
    for (const auto& c : components_) {
      if (c.dim() != d) throw std::invalid_argument("GaussianMixture: components differ in dimension");
      total += c.weight();
    }
    if (std::abs(total - Scalar(1)) > Scalar(1e-10))
      throw std::invalid_argument("GaussianMixture: weights must sum to 1 (got " + std::to_string(double(total)) + ")");
  }

  /// Single component with weight one.
  static GaussianMixture gaussian(Vector<Scalar> mean, Matrix<Scalar> covariance) {
    return GaussianMixture({Component(Scalar(1), std::move(mean), std::move(covariance))});
  }

  Index dim() const { return components_.front().dim(); }
  Index size() const { return Index(components_.size()); }
  const std::vector<Component>& components() const { return components_; }
  const Component& component(Index k) const { return components_.at(std::size_t(k)); }

  Vector<Scalar> weights() const {
    Vector<Scalar> w(size());
    for (Index k = 0; k < size(); ++k) w(k) = components_[std::size_t(k)].weight();
    return w;
  }

  Vector<Scalar> mean() const {
    Vector<Scalar> mu = Vector<Scalar>::Zero(dim());
    for (const auto& c : components_) mu += c.weight() * c.mean();
    return mu;
  }

  /// w·(Σ_k + μ_k μ_kᵀ) − μμᵀ
  Matrix<Scalar> covariance() const {
    const Vector<Scalar> mu = mean();
    Matrix<Scalar> s = Matrix<Scalar>::Zero(dim(), dim());
    for (const auto& c : components_) s += c.weight() * (c.covariance() + c.mean() * c.mean().transpose());
    return s - mu * mu.transpose();
  }

  template <typename Derived>
  Scalar log_pdf(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != dim()) throw std::invalid_argument("log_pdf: dimension mismatch");
    Vector<Scalar> terms(size());
    for (Index k = 0; k < size(); ++k) {
      const auto& c = components_[std::size_t(k)];
      terms(k) = c.weight() > Scalar(0) ? std::log(c.weight()) + c.log_density(x)
                                        : -std::numeric_limits<Scalar>::infinity();
    }
    return log_sum_exp(terms);
  }

  /// n×K matrix of log w_k + log N(x_r; μ_k, Σ_k).
  Matrix<Scalar> weighted_log_densities(const Matrix<Scalar>& rows) const {
    if (rows.cols() != dim()) throw std::invalid_argument("log_pdf: dimension mismatch");
    Matrix<Scalar> out(rows.rows(), size());
    for (Index k = 0; k < size(); ++k) {
      const auto& c = components_[std::size_t(k)];
      if (c.weight() > Scalar(0))
        out.col(k) = c.log_density_rows(rows).array() + std::log(c.weight());
      else
        out.col(k).setConstant(-std::numeric_limits<Scalar>::infinity());
    }
    return out;
  }

  /// log_pdf of every row.
  Vector<Scalar> log_pdf_rows(const Matrix<Scalar>& rows) const {
    const Matrix<Scalar> terms = weighted_log_densities(rows);
    Vector<Scalar> out(rows.rows());
    for (Index r = 0; r < rows.rows(); ++r) out(r) = log_sum_exp(terms.row(r));
    return out;
  }

 private:
  std::vector<Component> components_;
};

using GaussianComponentd = GaussianComponent<double>;
using Gmm = GaussianMixture<double>;

enum class Provenance { anchor, synthetic, resampled };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::anchor: return "anchor";
    case Provenance::synthetic: return "synthetic";
    case Provenance::resampled: return "resampled";
  }
  return "unknown";
}

/// n×d sample matrix with where it came from.
template <typename Scalar>
struct Dataset {
  Matrix<Scalar> rows;
  Provenance provenance = Provenance::resampled;
  Seed seed = 0;
  std::vector<int> component_labels;  // empty when unknown

  Index size() const { return rows.rows(); }
  Index dim() const { return rows.cols(); }
  bool has_labels() const { return !component_labels.empty(); }
};

using DatasetMatrix = Dataset<double>;

/// Draws n rows: a categorical draw over the weights, then mean + L z.
template <typename Scalar>
Dataset<Scalar> sample(const GaussianMixture<Scalar>& g, Index n, Seed seed,
                       Provenance provenance = Provenance::resampled) {
  if (n < 1) throw std::invalid_argument("sample: n must be at least 1");
  Engine engine = make_engine(seed);
  std::vector<double> w;
  for (const auto& c : g.components()) w.push_back(double(c.weight()));
  std::discrete_distribution<int> pick(w.begin(), w.end());
  std::normal_distribution<Scalar> normal;

  Dataset<Scalar> out;
  out.rows.resize(n, g.dim());
  out.component_labels.resize(std::size_t(n));
  out.provenance = provenance;
  out.seed = seed;
  Vector<Scalar> z(g.dim());
  for (Index r = 0; r < n; ++r) {
    const int k = pick(engine);
    for (Index j = 0; j < z.size(); ++j) z(j) = normal(engine);
    out.rows.row(r) = g.component(k).transform_standard(z).transpose();
    out.component_labels[std::size_t(r)] = k;
  }
  return out;
}

/// Differential entropy of N(·, Σ) in nats: ½ ln((2πe)^d det Σ).
template <typename Derived>
typename Derived::Scalar gaussian_entropy(const Eigen::MatrixBase<Derived>& covariance) {
  using Scalar = typename Derived::Scalar;
  const Matrix<Scalar> cov = covariance;
  const auto llt = detail::checked_cholesky<Scalar>(cov, "gaussian_entropy");
  const Scalar d = Scalar(cov.rows());
  return Scalar(0.5) * (d * (detail::log_two_pi<Scalar> + Scalar(1)) + detail::log_det_from(llt));
}

/// Closed-form KL(N(μ0, Σ0) ‖ N(μ1, Σ1)) in nats.
template <typename Scalar>
Scalar gaussian_kl(const Vector<Scalar>& mean0, const Matrix<Scalar>& cov0,
                   const Vector<Scalar>& mean1, const Matrix<Scalar>& cov1) {
  const Index d = mean0.size();
  if (mean1.size() != d || cov0.rows() != d || cov1.rows() != d)
    throw std::invalid_argument("gaussian_kl: dimension mismatch");
  const auto llt0 = detail::checked_cholesky<Scalar>(cov0, "gaussian_kl");
  const auto llt1 = detail::checked_cholesky<Scalar>(cov1, "gaussian_kl");
  const Scalar trace_term = llt1.solve(cov0).trace();
  const Vector<Scalar> diff = mean1 - mean0;
  const Scalar quad = diff.dot(llt1.solve(diff));
  const Scalar kl = Scalar(0.5) * (trace_term + quad - Scalar(d) + detail::log_det_from(llt1) -
                                   detail::log_det_from(llt0));
  return std::max(kl, Scalar(0));
}

}  // namespace rblab
