// rblab: simulate, fit, sweep, estimate, verify and bound-ledger commands.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rblab/experiments.hpp"
#include "rblab/io.hpp"
#include "rblab/run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rblab;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFailure = 2;

/// A command with everything needed to run it again: the effective config
/// and the command-specific inputs. Replay rebuilds one from a manifest.
struct Invocation {
  std::string command;
  RunConfig config;
  json inputs = json::object();
};

struct Outcome {
  int code = kOk;
  json seeds = json::object();
  json outputs = json::array();
  json diagnostics = json::object();
};

fs::path output_dir(const RunConfig& config) {
  const fs::path dir = config.output_dir.empty() ? fs::path(".") : fs::path(config.output_dir);
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw std::invalid_argument("output directory does not exist: " + dir.string());
  return dir;
}

std::string manifest_name(std::string command) {
  for (char& c : command)
    if (c == '-') c = '_';
  return "manifest_" + command + ".json";
}

std::string csv_text(const DatasetMatrix& data) {
  std::ostringstream out;
  write_csv(out, data);
  return out.str();
}

void emit(Outcome& outcome, const fs::path& path, const std::string& contents) {
  write_file_atomic(path, contents);
  outcome.outputs.push_back(path.filename().string());
}

std::string fmt(double v) { return format_real(v); }

json fit_diagnostics(const FittedGmm& f) {
  return {{"final_log_likelihood", f.final_log_likelihood},
          {"n_iter", f.n_iter},
          {"converged", f.converged},
          {"restart_index", f.restart_index},
          {"log_likelihood_trace", f.log_likelihood_trace}};
}

json restart_seeds(const FitConfig& fit) {
  json seeds = json::array();
  for (int r = 0; r < fit.n_restarts; ++r) seeds.push_back(derive_seed(fit.seed, {std::uint64_t(r)}));
  return seeds;
}

// ---------------------------------------------------------------------------
// Commands

Outcome run_simulate(const Invocation& inv) {
  const fs::path dir = output_dir(inv.config);
  const GenerationConfig& gen = inv.config.generation;
  gen.validate();
  const Gmm gt = build_gt_gmm(gen);
  const Gmm model = build_model_m(gt, gen);
  const DatasetMatrix anchor = sample_anchor(gt, gen);
  const DatasetMatrix synthetic = sample_synthetic(model, gen);

  const std::string gt_text = to_json(gt).dump(2) + "\n";
  const std::string model_text = to_json(model).dump(2) + "\n";
  const std::string anchor_text = csv_text(anchor);
  const std::string synthetic_text = csv_text(synthetic);

  Outcome out;
  emit(out, dir / "gt.json", gt_text);
  emit(out, dir / "model_m.json", model_text);
  emit(out, dir / "anchor.csv", anchor_text);
  emit(out, dir / "synthetic.csv", synthetic_text);
  out.seeds = {{"master", gen.master_seed}, {"anchor", anchor.seed}, {"synthetic", synthetic.seed}};
  out.diagnostics = {{"anchor_rows", anchor.size()},
                     {"synthetic_rows", synthetic.size()},
                     {"gt_components", gt.size()},
                     {"model_components", model.size()}};
  std::cout << "anchor rows\t" << anchor.size() << "\nsynthetic rows\t" << synthetic.size() << "\n";
  return out;
}

Outcome run_fit(const Invocation& inv) {
  const fs::path dir = output_dir(inv.config);
  const DatasetMatrix data = read_csv(fs::path(inv.inputs.at("data").get<std::string>()));
  const FittedGmm fitted = fit_gmm(data, inv.config.fit);

  Outcome out;
  emit(out, dir / inv.inputs.at("model_out").get<std::string>(), to_json(fitted.model).dump(2) + "\n");
  out.seeds = {{"fit", inv.config.fit.seed}, {"restarts", restart_seeds(inv.config.fit)}};
  out.diagnostics = fit_diagnostics(fitted);
  std::cout << "log_likelihood\t" << fmt(fitted.final_log_likelihood) << "\nconverged\t"
            << (fitted.converged ? "true" : "false") << "\niterations\t" << fitted.n_iter << "\nrestart\t"
            << fitted.restart_index << "\n";
  return out;
}

SweepSpec sweep_spec(const RunConfig& config) {
  SweepSpec spec = config.sweep;
  spec.base_config = config.generation;
  spec.fit_config = config.fit;
  return spec;
}

Outcome run_kl_gap(const Invocation& inv) {
  const fs::path dir = output_dir(inv.config);
  const SweepSpec spec = sweep_spec(inv.config);
  spec.validate();
  const std::string var = to_string(spec.variable);
  const std::size_t total = spec.values.size() * std::size_t(spec.rounds);
  std::size_t done = 0;
  const SweepResult result = run_kl_gap_sweep(spec, inv.config.threads, [&](const RoundResult& r) {
    std::cerr << "kl-gap " << var << "=" << r.value << " round " << r.round + 1 << "/" << spec.rounds << " gap "
              << fmt(r.kl_gap) << " (" << ++done << "/" << total << ")\n";
  });

  std::ostringstream raw;
  raw << "variable,value,round,kl_anchor,kl_gen,kl_gap,seed\n";
  json round_seeds = json::array();
  for (const auto& r : result.rounds) {
    raw << var << ',' << r.value << ',' << r.round << ',' << fmt(r.kl_anchor) << ',' << fmt(r.kl_gen) << ','
        << fmt(r.kl_gap) << ',' << r.seed << '\n';
    round_seeds.push_back(r.seed);
  }
  std::ostringstream agg;
  agg << "variable,value,mean_gap,std_gap,n_rounds\n";
  std::vector<double> xs, ys;
  for (const auto& p : result.points) {
    agg << var << ',' << p.value << ',' << fmt(p.mean_gap) << ',' << fmt(p.std_gap) << ',' << p.gaps.size() << '\n';
    xs.push_back(p.value);
    ys.push_back(p.mean_gap);
  }

  Outcome out;
  emit(out, dir / ("kl_gap_" + var + "_rounds.csv"), raw.str());
  emit(out, dir / ("kl_gap_" + var + ".csv"), agg.str());
  out.seeds = {{"sweep", spec.seed}, {"rounds", std::move(round_seeds)}};
  out.diagnostics["kl_evaluation_sets"] = "independent draws for the anchor and generated terms";
  if (xs.size() >= 2) {
    const double rho = spearman(xs, ys);
    out.diagnostics["spearman_rho"] = rho;
    std::cout << "spearman_rho\t" << fmt(rho) << "\n";
  }
  return out;
}

McEstimate estimate_mc(const std::string& kind, const std::vector<std::string>& files, const RunConfig& config,
                       const std::string& method) {
  const EstimatorBudgets& b = config.budgets;
  auto need = [&](std::size_t n) {
    if (files.size() != n)
      throw std::invalid_argument("estimate " + kind + ": expected " + std::to_string(n) + " input files, got " +
                                  std::to_string(files.size()));
  };
  if (kind == "kl") {
    need(2);
    return mc_kl(load_gmm(files[0]), load_gmm(files[1]), b.kl_samples, config.seed);
  }
  if (kind == "entropy") {
    need(1);
    return mc_entropy(load_gmm(files[0]), b.entropy_samples, config.seed);
  }
  if (kind == "delta-h") {
    need(2);
    return delta_h(load_gmm(files[0]), load_gmm(files[1]), b.entropy_samples, config.seed);
  }
  if (kind == "tv") {
    need(2);
    TvMethod m;
    if (method == "grid")
      m = TvMethod::grid;
    else if (method == "importance")
      m = TvMethod::importance;
    else
      throw std::invalid_argument("estimate tv: method must be grid or importance");
    return tv_distance(load_gmm(files[0]), load_gmm(files[1]), m, b.tv_cells, config.seed);
  }
  throw std::invalid_argument("estimate: unknown kind '" + kind + "'");
}

Outcome run_estimate(const Invocation& inv) {
  const fs::path dir = output_dir(inv.config);
  const std::string kind = inv.inputs.at("kind").get<std::string>();
  const auto files = inv.inputs.at("files").get<std::vector<std::string>>();
  Outcome out;
  json result;
  if (kind == "hsic") {
    if (files.size() != 2) throw std::invalid_argument("estimate hsic: expected 2 input files");
    const DatasetMatrix x = read_csv(fs::path(files[0]));
    const DatasetMatrix y = read_csv(fs::path(files[1]));
    const HsicResult h = hsic(x, y, inv.config.budgets.hsic_permutations, inv.config.seed);
    result = {{"statistic", h.statistic},
              {"bandwidth_x", h.bandwidth_x},
              {"bandwidth_y", h.bandwidth_y},
              {"n_permutations", h.n_permutations}};
    if (h.permutation_p) result["permutation_p"] = *h.permutation_p;
    std::cout << fmt(h.statistic) << '\t' << (h.permutation_p ? fmt(*h.permutation_p) : std::string("nan")) << "\n";
  } else {
    const McEstimate e = estimate_mc(kind, files, inv.config, inv.inputs.value("method", std::string("grid")));
    result = {{"value", e.value}, {"std_error", e.std_error}, {"n_samples", e.n_samples}, {"seed", e.seed}};
    std::cout << fmt(e.value) << '\t' << fmt(e.std_error) << "\n";
  }
  result["kind"] = kind;
  emit(out, dir / ("estimate_" + kind + ".json"), result.dump(2) + "\n");
  out.seeds = {{"estimate", inv.config.seed}};
  out.diagnostics = result;
  return out;
}

Outcome run_verify(const Invocation& inv) {
  const fs::path dir = output_dir(inv.config);
  const int trials = inv.inputs.at("trials").get<int>();
  if (trials < 1) throw std::invalid_argument("verify: trials must be at least 1");
  const int max_atoms = inv.inputs.at("max_atoms").get<int>();
  const double loss_bound = inv.inputs.at("loss_bound").get<double>();
  const DecompositionReport report = verify_risk_decomposition(trials, inv.config.seed, max_atoms, loss_bound);
  json result = {{"trials", report.trials},         {"violations", report.violations},
                 {"min_slack", report.min_slack},   {"mean_slack", report.mean_slack},
                 {"max_slack", report.max_slack},   {"seed", report.seed},
                 {"tolerance", kDecompositionTolerance}};
  Outcome out;
  emit(out, dir / "verify.json", result.dump(2) + "\n");
  out.seeds = {{"verify", report.seed}};
  out.diagnostics = result;
  std::cout << "trials\t" << report.trials << "\nviolations\t" << report.violations << "\nmin_slack\t"
            << fmt(report.min_slack) << "\nmean_slack\t" << fmt(report.mean_slack) << "\nmax_slack\t"
            << fmt(report.max_slack) << "\n";
  if (report.violations > 0) {
    std::cerr << "verify: " << report.violations << " of " << report.trials << " trials violate the bound\n";
    out.code = kFailure;
  }
  return out;
}

Outcome run_bounds(const Invocation& inv) {
  const fs::path dir = output_dir(inv.config);
  if (!inv.config.bound_params)
    throw std::invalid_argument("bounds: no bound parameters (use --params or a bound_params config section)");
  const BoundParams& params = *inv.config.bound_params;
  params.validate();
  BoundLedger ledger;
  Outcome out;
  fs::path run_dir;
  if (inv.inputs.contains("run_dir")) {
    run_dir = inv.inputs.at("run_dir").get<std::string>();
    if (!fs::is_directory(run_dir)) {
      std::cerr << "warning: run directory " << run_dir.string() << " not found; measured section omitted\n";
      run_dir.clear();
    }
  }
  if (!run_dir.empty()) {
    GenerationConfig generation = inv.config.generation;
    if (fs::exists(run_dir / "manifest_simulate.json"))
      generation = manifest_from_json(json::parse(read_file(run_dir / "manifest_simulate.json"))).config.generation;
    RunOutputs run = fit_run(load_gmm(run_dir / "gt.json"), load_gmm(run_dir / "model_m.json"),
                             read_csv(run_dir / "anchor.csv"), read_csv(run_dir / "synthetic.csv"), generation,
                             inv.config.fit);
    ledger = build_bound_ledger(run, params, inv.config.budgets, inv.config.seed);
    out.seeds = {{"ledger", inv.config.seed}, {"fit", inv.config.fit.seed}};
  } else {
    ledger.symbolic = evaluate_symbolic(params, &ledger.bracket_clamped);
  }
  const json text = to_json(ledger);
  emit(out, dir / "bounds.json", text.dump(2) + "\n");
  out.diagnostics = text;
  std::cout << text.dump(2) << "\n";
  return out;
}

Outcome dispatch(const Invocation& inv) {
  inv.config.validate();
  if (inv.command == "simulate") return run_simulate(inv);
  if (inv.command == "fit") return run_fit(inv);
  if (inv.command == "kl-gap") return run_kl_gap(inv);
  if (inv.command == "estimate") return run_estimate(inv);
  if (inv.command == "verify") return run_verify(inv);
  if (inv.command == "bounds") return run_bounds(inv);
  throw std::invalid_argument("unknown command '" + inv.command + "'");
}

/// Runs the command and writes its manifest next to the outputs.
int execute(const Invocation& inv) {
  const std::string started = utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  Outcome outcome = dispatch(inv);
  Manifest m;
  m.command = inv.command;
  m.config = inv.config;
  m.inputs = inv.inputs;
  m.seeds = std::move(outcome.seeds);
  m.outputs = std::move(outcome.outputs);
  m.diagnostics = std::move(outcome.diagnostics);
  m.started_at = started;
  m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file_atomic(output_dir(inv.config) / manifest_name(inv.command), to_json(m).dump(2) + "\n");
  return outcome.code;
}

std::string absolute_path(const std::string& p) { return fs::absolute(fs::path(p)).lexically_normal().string(); }

// ---------------------------------------------------------------------------
// Flags. Optional overrides are applied on top of the config file.

/// Value of an option that may be registered on several subcommands; true
/// when any of them was given.
template <typename T>
struct Flag {
  T value{};
  std::vector<CLI::Option*> options;

  explicit operator bool() const {
    for (const auto* o : options)
      if (o->count() > 0) return true;
    return false;
  }
  const T& operator*() const { return value; }
};

template <typename T>
CLI::Option* add_flag(CLI::App* app, const std::string& name, Flag<T>& flag, const std::string& description) {
  CLI::Option* o = app->add_option(name, flag.value, description);
  flag.options.push_back(o);
  return o;
}

template <typename T>
void override_with(const Flag<T>& flag, T& target) {
  if (flag) target = *flag;
}

struct GenerationFlags {
  Flag<int> dim, k, j, l, n, n_resample;
  Flag<double> noise, mean_box, cov_scale;

  void add(CLI::App* app) {
    add_flag(app, "--dim", dim, "Data dimension");
    add_flag(app, "-K,--k-anchor", k, "Anchor-sampled ground-truth components");
    add_flag(app, "-J,--j-unsampled", j, "Unsampled ground-truth components");
    add_flag(app, "-L,--l-irrelevant", l, "Task-irrelevant model components");
    add_flag(app, "--n-per-component", n, "Anchor draws per anchor component");
    add_flag(app, "--n-resample", n_resample, "Synthetic draws");
    add_flag(app, "--noise", noise, "Revision noise std");
    add_flag(app, "--mean-box", mean_box, "Component means ~ U[-box, box]^d");
    add_flag(app, "--cov-scale", cov_scale, "Covariance scale");
  }
  void apply_to(GenerationConfig& g) const {
    override_with(dim, g.dim);
    override_with(k, g.k_anchor);
    override_with(j, g.j_unsampled);
    override_with(l, g.l_irrelevant);
    override_with(n, g.n_per_anchor_component);
    override_with(n_resample, g.n_resample);
    override_with(noise, g.noise_scale);
    override_with(mean_box, g.mean_box);
    override_with(cov_scale, g.cov_scale);
  }
};

struct FitFlags {
  Flag<int> components, max_iter, restarts;
  Flag<double> tol, reg_covar;
  Flag<std::string> init;

  void add(CLI::App* app, bool with_components) {
    if (with_components) add_flag(app, "-k,--components", components, "Mixture components");
    add_flag(app, "--max-iter", max_iter, "EM iteration cap");
    add_flag(app, "--tol", tol, "Relative log-likelihood tolerance");
    add_flag(app, "--reg-covar", reg_covar, "Added to covariance diagonals");
    add_flag(app, "--restarts", restarts, "Independent initializations");
    add_flag(app, "--init", init, "kmeans_pp or random_points")->check(CLI::IsMember({"kmeans_pp", "kmeans++", "random_points"}));
  }
  void apply_to(FitConfig& f) const {
    override_with(components, f.n_components);
    override_with(max_iter, f.max_iter);
    override_with(restarts, f.n_restarts);
    override_with(tol, f.rel_tol);
    override_with(reg_covar, f.reg_covar);
    if (init) f.init_method = init_method_from_string(*init);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated synthetic-data generation: mixtures, EM fits, KL-gap sweeps and bound ledgers"};
  app.set_version_flag("--version", library_version());
  app.require_subcommand(1);
  app.fallthrough();

  Flag<std::string> config_path, output;
  Flag<Seed> seed;
  Flag<int> threads;
  add_flag(&app, "--config", config_path, "Config file (JSON); a run manifest also works");
  add_flag(&app, "--seed", seed, "Master seed for every section");
  add_flag(&app, "--output", output, "Output directory (default $RBLAB_OUTPUT, then .)");
  add_flag(&app, "--threads", threads, "Worker cap; results do not depend on it")->check(CLI::PositiveNumber);

  GenerationFlags gen_flags;
  FitFlags fit_flags;

  auto* simulate = app.add_subcommand("simulate", "Write G, M, anchor and synthetic data");
  gen_flags.add(simulate);

  auto* fit = app.add_subcommand("fit", "Fit a mixture to a dataset CSV");
  std::string fit_data, model_out = "fitted.json";
  fit->add_option("data", fit_data, "Dataset CSV")->required();
  fit->add_option("--model-out", model_out, "Model file name inside the output directory");
  fit_flags.add(fit, true);

  auto* kl_gap = app.add_subcommand("kl-gap", "Sweep K, J or L and record the KL gap");
  Flag<std::string> variable;
  Flag<std::vector<int>> values;
  Flag<int> rounds, resamples;
  Flag<Index> eval_samples;
  add_flag(kl_gap, "--variable", variable, "K, J or L")->check(CLI::IsMember({"K", "J", "L"}));
  add_flag(kl_gap, "--values", values, "Values of the swept variable (comma or space separated)")->delimiter(',');
  add_flag(kl_gap, "--rounds", rounds, "Rounds per value");
  add_flag(kl_gap, "--resamples", resamples, "KL evaluations averaged per round");
  add_flag(kl_gap, "--eval-samples", eval_samples, "Draws per KL evaluation");
  gen_flags.add(kl_gap);
  fit_flags.add(kl_gap, false);

  auto* estimate = app.add_subcommand("estimate", "Estimate kl, entropy, tv, hsic or delta-h");
  std::string kind;
  std::vector<std::string> files;
  Flag<Index> samples;
  Flag<int> permutations;
  std::string tv_method = "grid";
  estimate->add_option("kind", kind, "kl, entropy, tv, hsic or delta-h")
      ->required()
      ->check(CLI::IsMember({"kl", "entropy", "tv", "hsic", "delta-h"}));
  estimate->add_option("inputs", files, "Model files (kl, entropy, tv, delta-h) or dataset CSVs (hsic)")->required();
  add_flag(estimate, "--samples", samples, "Monte-Carlo draws, or grid cells per axis for tv");
  add_flag(estimate, "--permutations", permutations, "HSIC permutation count");
  estimate->add_option("--method", tv_method, "tv method")->check(CLI::IsMember({"grid", "importance"}));

  auto* verify = app.add_subcommand("verify", "Check the TV risk decomposition on random discrete problems");
  int trials = 1000, max_atoms = 20;
  double loss_bound = 1.0;
  verify->add_option("--trials", trials, "Randomized trials");
  verify->add_option("--max-atoms", max_atoms, "Largest support size");
  verify->add_option("--loss-bound", loss_bound, "Loss range C");

  auto* bounds = app.add_subcommand("bounds", "Evaluate the bound ledger");
  Flag<std::string> params_path, run_dir;
  add_flag(bounds, "--params", params_path, "Bound parameter file (JSON)");
  add_flag(bounds, "--run-dir", run_dir, "Output directory of a simulate run, for the measured section");
  fit_flags.add(bounds, false);

  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  std::string manifest_path;
  replay->add_option("manifest", manifest_path, "Manifest file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    Invocation inv;
    if (replay->parsed()) {
      if (config_path || seed) throw std::invalid_argument("replay: --config and --seed cannot be combined with replay");
      const Manifest m = manifest_from_json(json::parse(read_file(manifest_path)));
      inv.command = m.command;
      inv.config = m.config;
      inv.inputs = m.inputs;
    } else {
      if (config_path) inv.config = load_run_config(*config_path);
      if (seed) inv.config.reseed(*seed);
      inv.command = app.get_subcommands().front()->get_name();
      if (simulate->parsed() || kl_gap->parsed()) gen_flags.apply_to(inv.config.generation);
      fit_flags.apply_to(inv.config.fit);
      if (kl_gap->parsed()) {
        if (variable) inv.config.sweep.variable = sweep_variable_from_string(*variable);
        override_with(values, inv.config.sweep.values);
        override_with(rounds, inv.config.sweep.rounds);
        override_with(resamples, inv.config.sweep.resamples_per_round);
        override_with(eval_samples, inv.config.sweep.eval_samples);
      }
      if (fit->parsed()) inv.inputs = {{"data", absolute_path(fit_data)}, {"model_out", model_out}};
      if (estimate->parsed()) {
        std::vector<std::string> abs;
        for (const auto& f : files) abs.push_back(absolute_path(f));
        inv.inputs = {{"kind", kind}, {"files", abs}, {"method", tv_method}};
        if (samples) {
          if (kind == "kl")
            inv.config.budgets.kl_samples = *samples;
          else if (kind == "tv")
            inv.config.budgets.tv_cells = *samples;
          else
            inv.config.budgets.entropy_samples = *samples;
        }
        override_with(permutations, inv.config.budgets.hsic_permutations);
      }
      if (verify->parsed())
        inv.inputs = {{"trials", trials}, {"max_atoms", max_atoms}, {"loss_bound", loss_bound}};
      if (bounds->parsed()) {
        if (params_path)
          inv.config.bound_params = bound_params_from_json(json::parse(read_file(*params_path)));
        if (run_dir) inv.inputs["run_dir"] = absolute_path(*run_dir);
      }
      if (inv.config.output_dir.empty())
        if (const char* env = std::getenv("RBLAB_OUTPUT"); env && *env) inv.config.output_dir = env;
    }
    if (output) inv.config.output_dir = *output;
    if (threads) inv.config.threads = *threads;
    return execute(inv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
