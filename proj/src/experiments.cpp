#include "rblab/experiments.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <thread>

namespace rblab {

namespace {

constexpr std::uint64_t kSweepStream = tag("kl_gap_sweep");
constexpr std::uint64_t kFitAnchor = tag("fit_anchor");
constexpr std::uint64_t kFitGen = tag("fit_gen");
constexpr std::uint64_t kEvalAnchor = tag("eval_anchor");
constexpr std::uint64_t kEvalGen = tag("eval_gen");

void set_variable(GenerationConfig& cfg, SweepVariable v, int value) {
  switch (v) {
    case SweepVariable::K: cfg.k_anchor = value; break;
    case SweepVariable::J: cfg.j_unsampled = value; break;
    case SweepVariable::L: cfg.l_irrelevant = value; break;
  }
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * double(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

const char* to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::K: return "K";
    case SweepVariable::J: return "J";
    case SweepVariable::L: return "L";
  }
  return "?";
}

SweepVariable sweep_variable_from_string(const std::string& s) {
  if (s == "K" || s == "k") return SweepVariable::K;
  if (s == "J" || s == "j") return SweepVariable::J;
  if (s == "L" || s == "l") return SweepVariable::L;
  throw std::invalid_argument("unknown sweep variable '" + s + "' (expected K, J or L)");
}

std::vector<int> SweepSpec::default_values() {
  std::vector<int> v(14);
  std::iota(v.begin(), v.end(), 2);
  return v;
}

void SweepSpec::validate() const {
  if (values.empty()) throw std::invalid_argument("sweep: values must be nonempty");
  for (int v : values) {
    if (v < 0) throw std::invalid_argument("sweep: values must be nonnegative");
    if (variable == SweepVariable::K && v < 1) throw std::invalid_argument("sweep: K values must be at least 1");
  }
  if (rounds < 1) throw std::invalid_argument("sweep: rounds must be at least 1");
  if (resamples_per_round < 1) throw std::invalid_argument("sweep: resamples_per_round must be at least 1");
  if (eval_samples < 100) throw std::invalid_argument("sweep: eval_samples must be at least 100");
  base_config.validate();
  fit_config.validate();
}

Seed round_seed(const SweepSpec& spec, int value, int round) {
  return derive_seed(spec.seed, {kSweepStream, std::uint64_t(spec.variable), std::uint64_t(value),
                                 std::uint64_t(round)});
}

RoundResult run_kl_gap_round(const SweepSpec& spec, int value, int round) {
  const Seed seed = round_seed(spec, value, round);
  try {
    GenerationConfig cfg = spec.base_config;
    set_variable(cfg, spec.variable, value);
    cfg.master_seed = seed;
    const Gmm gt = build_gt_gmm(cfg);
    const Gmm model = build_model_m(gt, cfg);
    const DatasetMatrix anchor = sample_anchor(gt, cfg);
    const DatasetMatrix synthetic = sample_synthetic(model, cfg);

    FitConfig fit = spec.fit_config;
    fit.n_components = cfg.model_components();
    fit.seed = derive_seed(seed, {kFitAnchor});
    FittedGmm anchor_fit = fit_gmm(anchor, fit);
    fit.seed = derive_seed(seed, {kFitGen});
    FittedGmm gen_fit = fit_gmm(synthetic, fit);

    double kl_anchor = 0, kl_gen = 0;
    for (int i = 0; i < spec.resamples_per_round; ++i) {
      kl_anchor += mc_kl(anchor_fit.model, gt, spec.eval_samples, derive_seed(seed, {kEvalAnchor, std::uint64_t(i)})).value;
      kl_gen += mc_kl(gen_fit.model, gt, spec.eval_samples, derive_seed(seed, {kEvalGen, std::uint64_t(i)})).value;
    }
    kl_anchor /= spec.resamples_per_round;
    kl_gen /= spec.resamples_per_round;
    return {value, round, seed, kl_anchor, kl_gen, kl_anchor - kl_gen, std::move(anchor_fit), std::move(gen_fit)};
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("kl-gap ") + to_string(spec.variable) + "=" + std::to_string(value) +
                             " round " + std::to_string(round) + ": " + e.what());
  }
}

SweepResult run_kl_gap_sweep(const SweepSpec& spec, int threads, const SweepProgress& progress) {
  spec.validate();
  const std::size_t per_value = std::size_t(spec.rounds);
  const std::size_t tasks = spec.values.size() * per_value;
  std::vector<std::optional<RoundResult>> slots(tasks);
  std::vector<std::exception_ptr> errors(tasks);
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;

  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      try {
        slots[t] = run_kl_gap_round(spec, spec.values[t / per_value], int(t % per_value));
        if (progress) {
          std::lock_guard lock(progress_mutex);
          progress(*slots[t]);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads, int(tasks)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  SweepResult result{spec.variable, {}, {}};
  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    SweepPoint point{spec.values[v], 0, 0, {}, {}};
    for (std::size_t r = 0; r < per_value; ++r) {
      const RoundResult& rr = *slots[v * per_value + r];
      point.gaps.push_back(rr.kl_gap);
      point.seeds.push_back(rr.seed);
    }
    double sum = 0;
    for (double g : point.gaps) sum += g;
    point.mean_gap = sum / double(point.gaps.size());
    if (point.gaps.size() > 1) {
      double ss = 0;
      for (double g : point.gaps) ss += (g - point.mean_gap) * (g - point.mean_gap);
      point.std_gap = std::sqrt(ss / double(point.gaps.size() - 1));
    }
    result.points.push_back(std::move(point));
  }
  for (auto& slot : slots) result.rounds.push_back(std::move(*slot));
  return result;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length series");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = double(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------

double discrete_tv(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw std::invalid_argument("discrete_tv: support sizes differ");
  return 0.5 * (p - q).cwiseAbs().sum();
}

DecompositionTerms evaluate_decomposition(const DiscreteSetup& s) {
  const Index atoms = s.d.size();
  if (s.d_m.size() != atoms || s.d_gen.size() != atoms || s.loss.size() != atoms)
    throw std::invalid_argument("evaluate_decomposition: support sizes differ");
  if (s.sample.empty()) throw std::invalid_argument("evaluate_decomposition: empty sample");
  if ((s.loss.array() < 0).any() || (s.loss.array() > s.loss_bound).any())
    throw std::invalid_argument("evaluate_decomposition: loss outside [0, C]");

  double empirical = 0;
  for (int z : s.sample) empirical += s.loss(z);
  empirical /= double(s.sample.size());

  DecompositionTerms t;
  t.lhs = std::abs(s.d.dot(s.loss) - empirical);
  t.tv_task = discrete_tv(s.d, s.d_m);
  t.tv_gen = discrete_tv(s.d_m, s.d_gen);
  t.gen_error = std::abs(s.d_gen.dot(s.loss) - empirical);
  t.rhs = s.loss_bound * (t.tv_task + t.tv_gen) + t.gen_error;
  return t;
}

DiscreteSetup random_discrete_setup(Engine& engine, int max_atoms, double loss_bound) {
  if (max_atoms < 1) throw std::invalid_argument("random_discrete_setup: max_atoms must be at least 1");
  std::uniform_int_distribution<int> atom_count(1, max_atoms);
  std::uniform_int_distribution<int> sample_size(1, 50);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int atoms = atom_count(engine);

  auto simplex = [&] {
    Eigen::VectorXd p(atoms);
    for (int i = 0; i < atoms; ++i) p(i) = expo(engine);
    return Eigen::VectorXd(p / p.sum());
  };
  DiscreteSetup s;
  s.d = simplex();
  s.d_m = simplex();
  s.d_gen = simplex();
  s.loss_bound = loss_bound;
  s.loss.resize(atoms);
  for (int i = 0; i < atoms; ++i) s.loss(i) = loss_bound * unit(engine);

  std::discrete_distribution<int> draw(s.d_gen.data(), s.d_gen.data() + atoms);
  const int n = sample_size(engine);
  for (int i = 0; i < n; ++i) s.sample.push_back(draw(engine));
  return s;
}

DecompositionReport verify_risk_decomposition(int trial_count, Seed seed, int max_atoms, double loss_bound) {
  if (trial_count < 1) throw std::invalid_argument("verify: trial_count must be at least 1");
  DecompositionReport report;
  report.trials = trial_count;
  report.seed = seed;
  report.min_slack = std::numeric_limits<double>::infinity();
  report.max_slack = -std::numeric_limits<double>::infinity();
  double sum = 0;
  for (int t = 0; t < trial_count; ++t) {
    Engine engine = make_engine(derive_seed(seed, {std::uint64_t(t)}));
    const DecompositionTerms terms = evaluate_decomposition(random_discrete_setup(engine, max_atoms, loss_bound));
    const double slack = terms.slack();
    const bool ok = slack >= -kDecompositionTolerance;
    report.holds.push_back(ok);
    if (!ok) ++report.violations;
    report.min_slack = std::min(report.min_slack, slack);
    report.max_slack = std::max(report.max_slack, slack);
    sum += slack;
  }
  report.mean_slack = sum / trial_count;
  return report;
}

// ---------------------------------------------------------------------------

std::map<std::string, double> evaluate_symbolic(const BoundParams& params, bool* bracket_clamped) {
  params.validate();
  const double bracket = synthetic_mi_bound(params);
  const SyntheticBound synthetic = synthetic_error_bound(params);
  if (bracket_clamped) *bracket_clamped = synthetic.bracket_clamped;
  return {{"mi_generalization", mi_generalization_bound(params, std::max(bracket, 0.0))},
          {"synthetic_mi", bracket},
          {"synthetic_error", synthetic.value},
          {"anchor_error", anchor_error_bound(params)},
          {"ggmi", ggmi_bound(params)}};
}

BoundLedger build_bound_ledger(const RunOutputs& run, const BoundParams& params, const EstimatorBudgets& budgets,
                               Seed seed) {
  BoundLedger ledger;
  ledger.symbolic = evaluate_symbolic(params, &ledger.bracket_clamped);

  auto measure = [&](const std::string& name, auto&& fn) {
    try {
      ledger.measured.emplace(name, fn(derive_seed(seed, {tag(name)})));
    } catch (const std::exception& e) {
      throw std::runtime_error("ledger field " + name + ": " + e.what());
    }
  };
  auto entry = [](const McEstimate& e) { return MeasuredEntry{e.value, e.std_error, e.seed, e.n_samples}; };

  measure("h_anchor_est", [&](Seed s) { return entry(mc_entropy(run.fitted_anchor, budgets.entropy_samples, s)); });
  measure("h_gen_est", [&](Seed s) { return entry(mc_entropy(run.fitted_gen, budgets.entropy_samples, s)); });
  measure("delta_h_est",
          [&](Seed s) { return entry(delta_h(run.fitted_anchor, run.fitted_gen, budgets.entropy_samples, s)); });
  measure("kl_gap", [&](Seed s) {
    const McEstimate a = mc_kl(run.fitted_anchor, run.gt, budgets.kl_samples, derive_seed(s, {0}));
    const McEstimate g = mc_kl(run.fitted_gen, run.gt, budgets.kl_samples, derive_seed(s, {1}));
    return MeasuredEntry{a.value - g.value, std::hypot(a.std_error, g.std_error), s, budgets.kl_samples};
  });
  measure("hsic_anchor_gen", [&](Seed s) {
    const Index n = std::min(run.anchor.size(), run.synthetic.size());
    DatasetMatrix x = run.anchor, y = run.synthetic;
    x.rows.conservativeResize(n, Eigen::NoChange);
    y.rows.conservativeResize(n, Eigen::NoChange);
    x.component_labels.clear();
    y.component_labels.clear();
    const HsicResult h = hsic(x, y, budgets.hsic_permutations, s);
    MeasuredEntry e{h.statistic, 0.0, s, Index(budgets.hsic_permutations)};
    e.p_value = h.permutation_p;
    return e;
  });
  const TvMethod tv_method = run.gt.dim() <= 2 ? TvMethod::grid : TvMethod::importance;
  measure("tv_task_est", [&](Seed s) { return entry(tv_distance(run.gt, run.model_m, tv_method, budgets.tv_cells, s)); });
  measure("tv_gen_est", [&](Seed s) { return entry(tv_distance(run.model_m, run.d_gen, tv_method, budgets.tv_cells, s)); });
  return ledger;
}

RunOutputs fit_run(Gmm gt, Gmm model, DatasetMatrix anchor, DatasetMatrix synthetic, const GenerationConfig& generation,
                   const FitConfig& fit) {
  FitConfig fc = fit;
  fc.n_components = generation.model_components();
  fc.seed = derive_seed(fit.seed, {kFitAnchor});
  Gmm fitted_anchor = fit_gmm(anchor, fc).model;
  fc.seed = derive_seed(fit.seed, {kFitGen});
  Gmm fitted_gen = fit_gmm(synthetic, fc).model;
  Gmm d_gen = convolve_isotropic_noise(model, generation.noise_scale);
  return {std::move(gt),        std::move(model),         std::move(d_gen),          std::move(anchor),
          std::move(synthetic), std::move(fitted_anchor), std::move(fitted_gen)};
}

RunOutputs simulate_run(const GenerationConfig& generation, const FitConfig& fit) {
  Gmm gt = build_gt_gmm(generation);
  Gmm model = build_model_m(gt, generation);
  DatasetMatrix anchor = sample_anchor(gt, generation);
  DatasetMatrix synthetic = sample_synthetic(model, generation);
  return fit_run(std::move(gt), std::move(model), std::move(anchor), std::move(synthetic), generation, fit);
}

}  // namespace rblab
