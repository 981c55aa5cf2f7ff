#pragma once
// Reference computations used only by the tests. They avoid the library's
// code paths: densities use explicit inverses and determinants in plain
// (non-log) space, HSIC is a literal quadruple sum, and so on.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

struct Gaussian {
  double weight;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline double normal_density(const Gaussian& g, const Eigen::VectorXd& x) {
  const double d = double(x.size());
  const Eigen::VectorXd diff = x - g.mean;
  const double quad = diff.dot(g.cov.inverse() * diff);
  return std::exp(-0.5 * quad) / std::sqrt(std::pow(2 * std::numbers::pi, d) * g.cov.determinant());
}

/// KL(N0 ‖ N1) = ½[tr(Σ1⁻¹Σ0) + (μ1−μ0)ᵀΣ1⁻¹(μ1−μ0) − d + ln(det Σ1 / det Σ0)].
inline double gaussian_kl(const Eigen::VectorXd& m0, const Eigen::MatrixXd& c0, const Eigen::VectorXd& m1,
                          const Eigen::MatrixXd& c1) {
  const Eigen::MatrixXd inv1 = c1.inverse();
  const Eigen::VectorXd diff = m1 - m0;
  return 0.5 * ((inv1 * c0).trace() + diff.dot(inv1 * diff) - double(m0.size()) +
                std::log(c1.determinant() / c0.determinant()));
}

/// Σ_k w_k N(x; μ_k, Σ_k) by direct summation.
inline double mixture_density(const std::vector<Gaussian>& comps, const Eigen::VectorXd& x) {
  double s = 0;
  for (const auto& c : comps) s += c.weight * normal_density(c, x);
  return s;
}

/// Responsibilities by direct division, no log space.
inline Eigen::MatrixXd responsibilities(const std::vector<Gaussian>& comps, const Eigen::MatrixXd& rows) {
  Eigen::MatrixXd r(rows.rows(), Eigen::Index(comps.size()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const Eigen::VectorXd x = rows.row(i).transpose();
    double total = 0;
    for (std::size_t k = 0; k < comps.size(); ++k) total += r(i, Eigen::Index(k)) = comps[k].weight * normal_density(comps[k], x);
    r.row(i) /= total;
  }
  return r;
}

inline double median_nonzero_distance(const Eigen::MatrixXd& rows) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = std::sqrt((rows.row(i) - rows.row(j)).array().square().sum());
      if (v > 0) d.push_back(v);
    }
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  return m % 2 ? d[m / 2] : (d[m / 2 - 1] + d[m / 2]) / 2;
}

/// (1/n²)·Σ_{ijkl} K_ij H_jk L_kl H_li with Gaussian kernels exp(−‖a−b‖²/(2s²)).
inline double hsic_quadruple_loop(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::Index n = x.rows();
  const double sx = median_nonzero_distance(x), sy = median_nonzero_distance(y);
  Eigen::MatrixXd k(n, n), l(n, n), h(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      k(i, j) = std::exp(-(x.row(i) - x.row(j)).squaredNorm() / (2 * sx * sx));
      l(i, j) = std::exp(-(y.row(i) - y.row(j)).squaredNorm() / (2 * sy * sy));
      h(i, j) = (i == j ? 1.0 : 0.0) - 1.0 / double(n);
    }
  double s = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) s += k(i, j) * h(j, a) * l(a, b) * h(b, i);
  return s / double(n * n);
}

/// Kozachenko–Leonenko k-nearest-neighbour differential entropy (nats).
inline double knn_entropy(const Eigen::MatrixXd& rows, int k = 3) {
  const Eigen::Index n = rows.rows();
  const double d = double(rows.cols());
  auto digamma_int = [](Eigen::Index m) {
    double s = -0.57721566490153286061;
    for (Eigen::Index j = 1; j < m; ++j) s += 1.0 / double(j);
    return s;
  };
  const double log_unit_ball = d / 2 * std::log(std::numbers::pi) - std::lgamma(d / 2 + 1);
  double sum_log = 0;
  std::vector<double> dist(std::size_t(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t t = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) dist[t++] = (rows.row(i) - rows.row(j)).norm();
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    sum_log += std::log(dist[std::size_t(k - 1)]);
  }
  return digamma_int(n) - digamma_int(k) + log_unit_ball + d * sum_log / double(n);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail of χ² with one degree of freedom.
inline double chi2_df1_survival(double x) { return std::erfc(std::sqrt(x / 2)); }

/// One-sample Kolmogorov–Smirnov test against U(0,1); returns the p-value
/// from the asymptotic distribution with Stephens' small-sample correction.
inline double ks_uniform_pvalue(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = double(u.size());
  double dmax = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dmax = std::max(dmax, double(i + 1) / n - u[i]);
    dmax = std::max(dmax, u[i] - double(i) / n);
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * dmax;
  double q = 0;
  for (int j = 1; j <= 100; ++j) q += 2 * ((j % 2) ? 1 : -1) * std::exp(-2.0 * j * j * lambda * lambda);
  return std::clamp(q, 0.0, 1.0);
}

/// Random SPD matrix A·Aᵀ + shift·I.
template <typename Rng>
Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index d, double shift = 0.5) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = z(rng);
  return a * a.transpose() + shift * Eigen::MatrixXd::Identity(d, d);
}

template <typename Rng>
Eigen::VectorXd random_vector(Rng& rng, Eigen::Index d, double scale = 1) {
  std::normal_distribution<double> z(0, scale);
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = z(rng);
  return v;
}

}  // namespace oracle
