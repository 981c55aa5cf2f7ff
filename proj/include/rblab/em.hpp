#pragma once

#include <vector>

#include "rblab/gmm.hpp"

namespace rblab {

enum class InitMethod { kmeans_pp, random_points };

struct FitConfig {
  int n_components = 1;
  int max_iter = 500;
  double rel_tol = 1e-7;    // relative change of the mean log-likelihood
  double reg_covar = 1e-6;  // added to every covariance diagonal
  int n_restarts = 4;
  InitMethod init_method = InitMethod::kmeans_pp;
  Seed seed = 0;

  void validate() const;
};

struct FittedGmm {
  Gmm model;
  double final_log_likelihood;  // mean per-sample, of `model` on the training rows
  int n_iter;
  bool converged;
  int restart_index;
  std::vector<double> log_likelihood_trace;  // initial model first, one entry per EM step
};

/// Posterior component memberships, row r column k, normalized in log space.
Eigen::MatrixXd responsibilities(const Gmm& model, const DatasetMatrix& data);

/// Mean per-sample log-likelihood of the rows under `model`.
double mean_log_likelihood(const Gmm& model, const Eigen::MatrixXd& rows);

/// Best-of-restarts EM. Restart i seeds from derive_seed(config.seed, {i}).
FittedGmm fit_gmm(const DatasetMatrix& data, const FitConfig& config);

const char* to_string(InitMethod m);
InitMethod init_method_from_string(const std::string& s);

}  // namespace rblab
