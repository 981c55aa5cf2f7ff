#pragma once

#include "rblab/gmm.hpp"

namespace rblab {

/// Parameters of the simulated generation process: a ground-truth mixture
/// with K anchor-sampled and J unsampled components, and a generative model
/// that adds L task-irrelevant components.
struct GenerationConfig {
  int dim = 2;
  int k_anchor = 2;
  int j_unsampled = 2;
  int l_irrelevant = 2;
  int n_per_anchor_component = 50;
  int n_resample = 1000;
  double noise_scale = 0.0;  // std of the additive revision noise
  double mean_box = 10.0;    // means ~ U[-mean_box, mean_box]^d
  double cov_scale = 1.0;
  Seed master_seed = 0;

  void validate() const;
  int gt_components() const { return k_anchor + j_unsampled; }
  int model_components() const { return k_anchor + j_unsampled + l_irrelevant; }
};

/// Invertible affine map x ↦ A x + b.
class AffineTransform {
 public:
  AffineTransform(Eigen::MatrixXd matrix, Eigen::VectorXd offset);

  static AffineTransform identity(Index d);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::VectorXd& offset() const { return offset_; }
  Index dim() const { return offset_.size(); }
  double log_abs_det() const { return log_abs_det_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return matrix_ * x + offset_; }
  Eigen::VectorXd inverse_apply(const Eigen::VectorXd& y) const { return lu_.solve(y - offset_); }

 private:
  Eigen::MatrixXd matrix_;
  Eigen::VectorXd offset_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  double log_abs_det_;
};

/// Ground truth G: K+J components with uniform-box means, random SPD
/// covariances cov_scale·(AAᵀ + dI)/d and equal weights. The first K are the
/// anchor-sampled part.
Gmm build_gt_gmm(const GenerationConfig& config);

/// Generative model M: every component of G plus L irrelevant ones placed by
/// the same rule, weights uniform over K+J+L.
Gmm build_model_m(const Gmm& gt, const GenerationConfig& config);

/// N draws from each of the first K components of G.
DatasetMatrix sample_anchor(const Gmm& gt, const GenerationConfig& config);

/// n_resample draws from M plus N(0, noise_scale² I) per row.
DatasetMatrix sample_synthetic(const Gmm& m, const GenerationConfig& config);

/// The first-k restriction of a mixture, re-weighted to sum to one.
Gmm restrict_to_first(const Gmm& g, int k);

/// Distribution of x + ε with ε ~ N(0, noise_scale² I): every covariance
/// gains noise_scale² I.
Gmm convolve_isotropic_noise(const Gmm& g, double noise_scale);

/// log density of t(X) for X ~ base: log f_base(t⁻¹(x)) − log|det A|.
double pushforward_log_pdf(const Gmm& base, const AffineTransform& t, const Eigen::VectorXd& x);

}  // namespace rblab
