#include "rblab/bounds.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rblab {

void BoundParams::validate() const {
  if (!(eta > 0 && eta < 1)) throw std::invalid_argument("bounds: eta must lie in (0, 1)");
  if (!(alpha >= 0)) throw std::invalid_argument("bounds: alpha must be nonnegative");
  if (!(lambda_eff >= 1)) throw std::invalid_argument("bounds: lambda_eff must be at least 1");
  if (!(tv_task >= 0 && tv_task <= 1) || !(tv_gen >= 0 && tv_gen <= 1))
    throw std::invalid_argument("bounds: TV distances must lie in [0, 1]");
  if (n_samples < 1 || m_samples < 1 || depth < 1)
    throw std::invalid_argument("bounds: n_samples, m_samples and depth must be at least 1");
  if (!(sigma >= 0)) throw std::invalid_argument("bounds: sigma must be nonnegative");
  if (!(loss_bound >= 0)) throw std::invalid_argument("bounds: loss_bound must be nonnegative");
}

double contraction_factor(const BoundParams& p) {
  if (!(p.eta > 0 && p.eta < 1)) throw std::invalid_argument("bounds: eta must lie in (0, 1)");
  return std::pow(p.eta, double(p.depth) / 2.0);
}

double mi_generalization_bound(const BoundParams& p, double mi_s_w) {
  if (!(mi_s_w >= 0)) throw std::invalid_argument("mi_generalization_bound: mutual information must be nonnegative");
  if (p.n_samples < 1) throw std::invalid_argument("mi_generalization_bound: n_samples must be at least 1");
  return contraction_factor(p) * std::sqrt(2.0 * p.sigma * p.sigma * mi_s_w / double(p.n_samples));
}

double synthetic_mi_bound(const BoundParams& p) {
  return -p.delta_i + p.b_syn + p.h_e_m + p.delta_eps_p;
}

SyntheticBound synthetic_error_bound(const BoundParams& p) {
  const double bracket = synthetic_mi_bound(p);
  const bool clamped = bracket < 0;
  SyntheticBound b;
  b.divergence_term = p.loss_bound * (p.tv_task + p.tv_gen);
  b.information_term = mi_generalization_bound(p, clamped ? 0.0 : bracket);
  b.value = b.divergence_term + b.information_term;
  b.bracket_clamped = clamped;
  return b;
}

double ggmi_bound(const BoundParams& p) {
  if (!(p.alpha >= 0)) throw std::invalid_argument("ggmi_bound: alpha must be nonnegative");
  const double delta_h = p.h_anchor - p.h_gen;
  return p.delta_i - (p.alpha + 1.0) * p.h_anchor_given_w + 2.0 * delta_h + p.h_gen_given_w + p.eps_w_p;
}

double anchor_error_bound(const BoundParams& p) {
  if (!(p.mi_anchor_w >= 0)) throw std::invalid_argument("anchor_error_bound: mi_anchor_w must be nonnegative");
  if (p.m_samples < 1) throw std::invalid_argument("anchor_error_bound: m_samples must be at least 1");
  return contraction_factor(p) * std::sqrt(2.0 * p.sigma * p.sigma * p.mi_anchor_w / double(p.m_samples));
}

}  // namespace rblab
