#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rblab/bounds.hpp"
#include "rblab/em.hpp"
#include "rblab/estimators.hpp"
#include "rblab/generation.hpp"

namespace rblab {

// ---------------------------------------------------------------------------
// KL-Gap sweep

enum class SweepVariable { K, J, L };

const char* to_string(SweepVariable v);
SweepVariable sweep_variable_from_string(const std::string& s);

struct SweepSpec {
  SweepVariable variable = SweepVariable::J;
  std::vector<int> values = default_values();
  int rounds = 100;
  int resamples_per_round = 100;
  Index eval_samples = 1000;  // draws per resampled KL evaluation
  GenerationConfig base_config;
  FitConfig fit_config;
  Seed seed = 0;

  static std::vector<int> default_values();
  void validate() const;
};

struct RoundResult {
  int value;
  int round;
  Seed seed;
  double kl_anchor;  // mean over resamples of KL(π_anchor ‖ G)
  double kl_gen;     // mean over resamples of KL(π_gen ‖ G)
  double kl_gap;
  FittedGmm anchor_fit;
  FittedGmm gen_fit;
};

struct SweepPoint {
  int value;
  double mean_gap;
  double std_gap;  // sample std across rounds, 0 for a single round
  std::vector<double> gaps;
  std::vector<Seed> seeds;
};

struct SweepResult {
  SweepVariable variable;
  std::vector<SweepPoint> points;
  std::vector<RoundResult> rounds;  // ordered by (value index, round)
};

/// Seed of one (variable, value, round) cell.
Seed round_seed(const SweepSpec& spec, int value, int round);

/// One round: rebuild G and M with the swept variable set to `value`, draw
/// anchor and synthetic data, fit both with K+J+L components and average the
/// KL gap over the resampled evaluations.
RoundResult run_kl_gap_round(const SweepSpec& spec, int value, int round);

using SweepProgress = std::function<void(const RoundResult&)>;

/// Rounds run on up to `threads` workers; the result does not depend on the
/// thread count or schedule.
SweepResult run_kl_gap_sweep(const SweepSpec& spec, int threads = 1, const SweepProgress& progress = {});

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Risk decomposition check on finite supports

/// One discrete instance: target D, model output D_M, generation output
/// D_gen over the same atoms, the loss of a fixed predictor at each atom
/// (values in [0, loss_bound]) and an i.i.d. sample of atom indices from D_gen.
struct DiscreteSetup {
  Eigen::VectorXd d, d_m, d_gen;
  Eigen::VectorXd loss;
  double loss_bound = 1;
  std::vector<int> sample;
};

struct DecompositionTerms {
  double lhs;               // |R_D − R̂_S|
  double tv_task;           // TV(D, D_M)
  double tv_gen;            // TV(D_M, D_gen)
  double gen_error;         // |R_{D_gen} − R̂_S|
  double rhs;               // C·(tv_task + tv_gen) + gen_error
  double slack() const { return rhs - lhs; }
};

double discrete_tv(const Eigen::VectorXd& p, const Eigen::VectorXd& q);
DecompositionTerms evaluate_decomposition(const DiscreteSetup& setup);
DiscreteSetup random_discrete_setup(Engine& engine, int max_atoms, double loss_bound);

struct DecompositionReport {
  int trials = 0;
  int violations = 0;
  std::vector<bool> holds;
  double min_slack = 0;
  double mean_slack = 0;
  double max_slack = 0;
  Seed seed = 0;
};

/// Rounding allowance when comparing the two sides.
inline constexpr double kDecompositionTolerance = 1e-12;

DecompositionReport verify_risk_decomposition(int trial_count, Seed seed, int max_atoms = 20, double loss_bound = 1.0);

// ---------------------------------------------------------------------------
// Bound ledger

struct EstimatorBudgets {
  Index kl_samples = 100000;
  Index entropy_samples = 100000;
  Index tv_cells = 400;  // per axis for the grid method, draws otherwise
  int hsic_permutations = 200;
};

/// Everything one generation run produced.
struct RunOutputs {
  Gmm gt;
  Gmm model_m;
  Gmm d_gen;  // model_m with the revision noise folded in
  DatasetMatrix anchor;
  DatasetMatrix synthetic;
  Gmm fitted_anchor;
  Gmm fitted_gen;
};

struct MeasuredEntry {
  double value;
  double std_error;
  Seed seed;
  Index budget;
  std::optional<double> p_value = std::nullopt;  // permutation p for HSIC
};

struct BoundLedger {
  std::map<std::string, MeasuredEntry> measured;
  std::map<std::string, double> symbolic;
  bool bracket_clamped = false;
};

/// Symbolic side only: the five calculators at `params`. The
/// mi_generalization entry uses the clamped synthetic_mi bracket as its
/// mutual information.
std::map<std::string, double> evaluate_symbolic(const BoundParams& params, bool* bracket_clamped = nullptr);

BoundLedger build_bound_ledger(const RunOutputs& run, const BoundParams& params, const EstimatorBudgets& budgets,
                               Seed seed);

/// Fit both datasets with K+J+L components (anchor and synthetic fits use
/// separate sub-streams of fit.seed).
RunOutputs fit_run(Gmm gt, Gmm model, DatasetMatrix anchor, DatasetMatrix synthetic, const GenerationConfig& generation,
                   const FitConfig& fit);

/// Simulate and fit one configuration end to end.
RunOutputs simulate_run(const GenerationConfig& generation, const FitConfig& fit);

}  // namespace rblab
