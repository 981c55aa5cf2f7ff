#pragma once

#include <vector>

#include "oracles.hpp"
#include "rblab/gmm.hpp"

namespace test {

inline std::vector<oracle::Gaussian> to_oracle(const rblab::Gmm& g) {
  std::vector<oracle::Gaussian> out;
  for (const auto& c : g.components()) out.push_back({c.weight(), c.mean(), c.covariance()});
  return out;
}

inline rblab::Gmm from_oracle(const std::vector<oracle::Gaussian>& comps) {
  std::vector<rblab::GaussianComponentd> out;
  for (const auto& c : comps) out.emplace_back(c.weight, c.mean, c.cov);
  return rblab::Gmm(std::move(out));
}

inline rblab::Gmm gaussian_1d(double mean, double var) {
  return rblab::Gmm::gaussian(Eigen::VectorXd::Constant(1, mean), Eigen::MatrixXd::Constant(1, 1, var));
}

/// Mixture with `k` components in dimension `d`, random means and SPD covariances.
template <typename Rng>
rblab::Gmm random_gmm(Rng& rng, int k, Eigen::Index d, double spread = 3) {
  std::vector<oracle::Gaussian> comps;
  std::uniform_real_distribution<double> w(0.2, 1.0);
  double total = 0;
  for (int i = 0; i < k; ++i) {
    comps.push_back({w(rng), oracle::random_vector(rng, d, spread), oracle::random_spd(rng, d)});
    total += comps.back().weight;
  }
  for (auto& c : comps) c.weight /= total;
  // Renormalize exactly so the weights pass the sum-to-one check.
  double s = 0;
  for (int i = 0; i + 1 < k; ++i) s += comps[std::size_t(i)].weight;
  comps.back().weight = 1 - s;
  return from_oracle(comps);
}

}  // namespace test
