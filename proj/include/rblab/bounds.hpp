#pragma once

// Right-hand sides of the information-flow generalization bounds, evaluated
// as plain arithmetic over user-supplied quantities. Nothing here estimates
// mutual information from a trained network.

namespace rblab {

/// Symbolic inputs of the bound formulas. Entropies and informations are in
/// nats. `depth` is the number of contraction layers of the trained network
/// (not the mixture's irrelevant-component count).
struct BoundParams {
  double delta_i = 0;      // information gain ΔI
  double b_syn = 0;        // compression bottleneck
  double h_e_m = 0;        // entropy of the model factor e_M
  double delta_eps_p = 0;  // curation / prompting efficiency term
  double sigma = 1;        // sub-Gaussian parameter of the loss
  double eta = 0.5;        // contraction coefficient, in (0, 1)
  int depth = 1;
  int n_samples = 1;  // synthetic set size
  int m_samples = 1;  // anchor set size
  double loss_bound = 1;  // C
  double alpha = 0;
  double eps_w_p = 0;
  double lambda_eff = 1;
  double h_anchor_given_w = 0;
  double h_gen_given_w = 0;
  double h_anchor = 0;
  double h_gen = 0;
  double mi_anchor_w = 0;
  double tv_task = 0;
  double tv_gen = 0;

  void validate() const;
};

/// exp(−(depth/2)·ln(1/η)), written as η^(depth/2).
double contraction_factor(const BoundParams& p);

/// exp(−(depth/2)·ln(1/η))·√(2σ²·mi/n).
double mi_generalization_bound(const BoundParams& p, double mi_s_w);

/// −ΔI + B_syn + H(e_M) + δ_{ε,p}: upper bound on I(S_gen, W).
double synthetic_mi_bound(const BoundParams& p);

struct SyntheticBound {
  double value;
  double divergence_term;   // C·(tv_task + tv_gen)
  double information_term;  // mi_generalization_bound at the clamped bracket
  bool bracket_clamped;     // synthetic_mi_bound was negative and replaced by 0
};

/// Divergence term plus the information term with mi = max(0, synthetic_mi_bound).
SyntheticBound synthetic_error_bound(const BoundParams& p);

/// ΔI − (α+1)·H(S_anchor|W) + 2ΔH + H(S_gen|W) + ε_{W,p}, ΔH = h_anchor − h_gen.
double ggmi_bound(const BoundParams& p);

/// exp(−(depth/2)·ln(1/η))·√(2σ²·I(S_anchor, W′)/m).
double anchor_error_bound(const BoundParams& p);

}  // namespace rblab
