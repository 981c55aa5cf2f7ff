#pragma once

#include <optional>

#include "rblab/gmm.hpp"

namespace rblab {

/// Monte-Carlo result: mean and its standard error (sample std / √n).
struct McEstimate {
  double value = 0;
  double std_error = 0;
  Index n_samples = 0;
  Seed seed = 0;
};

struct HsicResult {
  double statistic = 0;
  double bandwidth_x = 0;
  double bandwidth_y = 0;
  std::optional<double> permutation_p;
  int n_permutations = 0;
};

enum class TvMethod { grid, importance };

/// KL(p ‖ q) = E_p[log p − log q] with x ~ p.
McEstimate mc_kl(const Gmm& p, const Gmm& q, Index n, Seed seed);

/// −E_p[log p].
McEstimate mc_entropy(const Gmm& p, Index n, Seed seed);

/// H(anchor) − H(gen); the two entropies use independent sub-streams and
/// the standard errors add in quadrature.
McEstimate delta_h(const Gmm& anchor_model, const Gmm& gen_model, Index n, Seed seed);

/// Total variation distance. grid: midpoint rule over a box covering ±8σ of
/// every component with `budget` cells per axis (d ≤ 2). importance:
/// ½·E_p|1 − q/p| from `budget` draws of p.
McEstimate tv_distance(const Gmm& p, const Gmm& q, TvMethod method, Index budget, Seed seed);

/// Biased HSIC V-statistic with Gaussian kernels and median-distance
/// bandwidths. Rows of x and y are paired. n_permutations = 0 skips the
/// permutation test.
HsicResult hsic(const DatasetMatrix& x, const DatasetMatrix& y, int n_permutations, Seed seed);

/// Median of the nonzero pairwise Euclidean distances between rows.
double median_nonzero_distance(const Eigen::MatrixXd& rows);

}  // namespace rblab
