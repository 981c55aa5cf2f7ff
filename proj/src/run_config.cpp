#include "rblab/run_config.hpp"

#include <chrono>
#include <ctime>
#include <initializer_list>
#include <stdexcept>

#include "rblab/io.hpp"

namespace rblab {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void require_object(const json& j, const char* section) {
  if (!j.is_object()) throw std::invalid_argument(std::string("config: section '") + section + "' must be an object");
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* section) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw std::invalid_argument(std::string("config: unknown key '") + it.key() + "' in " + section);
  }
}

template <typename F>
auto guarded(const char* section, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: bad value in ") + section + ": " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  generation.validate();
  fit.validate();
  if (bound_params) bound_params->validate();
  if (budgets.kl_samples < 100 || budgets.entropy_samples < 100)
    throw std::invalid_argument("config: kl_samples and entropy_samples must be at least 100");
  if (budgets.tv_cells < 2) throw std::invalid_argument("config: tv_cells must be at least 2");
  if (budgets.hsic_permutations < 0) throw std::invalid_argument("config: hsic_permutations must be nonnegative");
  if (threads < 1) throw std::invalid_argument("config: threads must be at least 1");
}

void RunConfig::reseed(Seed s) {
  seed = s;
  generation.master_seed = s;
  fit.seed = s;
  sweep.seed = s;
}

json to_json(const GenerationConfig& c) {
  return {{"dim", c.dim},
          {"k_anchor", c.k_anchor},
          {"j_unsampled", c.j_unsampled},
          {"l_irrelevant", c.l_irrelevant},
          {"n_per_anchor_component", c.n_per_anchor_component},
          {"n_resample", c.n_resample},
          {"noise_scale", c.noise_scale},
          {"mean_box", c.mean_box},
          {"cov_scale", c.cov_scale},
          {"master_seed", c.master_seed}};
}

json to_json(const FitConfig& c) {
  return {{"n_components", c.n_components}, {"max_iter", c.max_iter},   {"rel_tol", c.rel_tol},
          {"reg_covar", c.reg_covar},       {"n_restarts", c.n_restarts}, {"init_method", to_string(c.init_method)},
          {"seed", c.seed}};
}

json to_json(const SweepSpec& c) {
  return {{"variable", to_string(c.variable)},
          {"values", c.values},
          {"rounds", c.rounds},
          {"resamples_per_round", c.resamples_per_round},
          {"eval_samples", c.eval_samples},
          {"seed", c.seed}};
}

json to_json(const EstimatorBudgets& c) {
  return {{"kl_samples", c.kl_samples},
          {"entropy_samples", c.entropy_samples},
          {"tv_cells", c.tv_cells},
          {"hsic_permutations", c.hsic_permutations}};
}

json to_json(const BoundParams& c) {
  return {{"delta_i", c.delta_i},
          {"b_syn", c.b_syn},
          {"h_e_m", c.h_e_m},
          {"delta_eps_p", c.delta_eps_p},
          {"sigma", c.sigma},
          {"eta", c.eta},
          {"depth", c.depth},
          {"n_samples", c.n_samples},
          {"m_samples", c.m_samples},
          {"loss_bound", c.loss_bound},
          {"alpha", c.alpha},
          {"eps_w_p", c.eps_w_p},
          {"lambda_eff", c.lambda_eff},
          {"h_anchor_given_w", c.h_anchor_given_w},
          {"h_gen_given_w", c.h_gen_given_w},
          {"h_anchor", c.h_anchor},
          {"h_gen", c.h_gen},
          {"mi_anchor_w", c.mi_anchor_w},
          {"tv_task", c.tv_task},
          {"tv_gen", c.tv_gen}};
}

json to_json(const RunConfig& c) {
  json j = {{"generation", to_json(c.generation)},
            {"fit", to_json(c.fit)},
            {"sweep", to_json(c.sweep)},
            {"budgets", to_json(c.budgets)},
            {"output_dir", c.output_dir},
            {"seed", c.seed},
            {"threads", c.threads}};
  if (c.bound_params) j["bound_params"] = to_json(*c.bound_params);
  return j;
}

json to_json(const BoundLedger& ledger) {
  json measured = json::object();
  for (const auto& [name, e] : ledger.measured) {
    json m = {{"value", e.value}, {"std_error", e.std_error}, {"seed", e.seed}, {"budget", e.budget}};
    if (e.p_value) m["permutation_p"] = *e.p_value;
    measured[name] = std::move(m);
  }
  json out = {{"symbolic", ledger.symbolic}, {"bracket_clamped", ledger.bracket_clamped}};
  if (!ledger.measured.empty()) out["measured"] = std::move(measured);
  return out;
}

GenerationConfig generation_from_json(const json& j, GenerationConfig c) {
  require_object(j, "generation");
  reject_unknown(j,
                 {"dim", "k_anchor", "j_unsampled", "l_irrelevant", "n_per_anchor_component", "n_resample",
                  "noise_scale", "mean_box", "cov_scale", "master_seed"},
                 "generation");
  return guarded("generation", [&] {
    read(j, "dim", c.dim);
    read(j, "k_anchor", c.k_anchor);
    read(j, "j_unsampled", c.j_unsampled);
    read(j, "l_irrelevant", c.l_irrelevant);
    read(j, "n_per_anchor_component", c.n_per_anchor_component);
    read(j, "n_resample", c.n_resample);
    read(j, "noise_scale", c.noise_scale);
    read(j, "mean_box", c.mean_box);
    read(j, "cov_scale", c.cov_scale);
    read(j, "master_seed", c.master_seed);
    return c;
  });
}

FitConfig fit_from_json(const json& j, FitConfig c) {
  require_object(j, "fit");
  reject_unknown(j, {"n_components", "max_iter", "rel_tol", "reg_covar", "n_restarts", "init_method", "seed"}, "fit");
  return guarded("fit", [&] {
    read(j, "n_components", c.n_components);
    read(j, "max_iter", c.max_iter);
    read(j, "rel_tol", c.rel_tol);
    read(j, "reg_covar", c.reg_covar);
    read(j, "n_restarts", c.n_restarts);
    if (auto it = j.find("init_method"); it != j.end()) c.init_method = init_method_from_string(it->get<std::string>());
    read(j, "seed", c.seed);
    return c;
  });
}

EstimatorBudgets budgets_from_json(const json& j, EstimatorBudgets c) {
  require_object(j, "budgets");
  reject_unknown(j, {"kl_samples", "entropy_samples", "tv_cells", "hsic_permutations"}, "budgets");
  return guarded("budgets", [&] {
    read(j, "kl_samples", c.kl_samples);
    read(j, "entropy_samples", c.entropy_samples);
    read(j, "tv_cells", c.tv_cells);
    read(j, "hsic_permutations", c.hsic_permutations);
    return c;
  });
}

BoundParams bound_params_from_json(const json& j, BoundParams c) {
  require_object(j, "bound_params");
  reject_unknown(j,
                 {"delta_i", "b_syn", "h_e_m", "delta_eps_p", "sigma", "eta", "depth", "n_samples", "m_samples",
                  "loss_bound", "alpha", "eps_w_p", "lambda_eff", "h_anchor_given_w", "h_gen_given_w", "h_anchor",
                  "h_gen", "mi_anchor_w", "tv_task", "tv_gen"},
                 "bound_params");
  return guarded("bound_params", [&] {
    read(j, "delta_i", c.delta_i);
    read(j, "b_syn", c.b_syn);
    read(j, "h_e_m", c.h_e_m);
    read(j, "delta_eps_p", c.delta_eps_p);
    read(j, "sigma", c.sigma);
    read(j, "eta", c.eta);
    read(j, "depth", c.depth);
    read(j, "n_samples", c.n_samples);
    read(j, "m_samples", c.m_samples);
    read(j, "loss_bound", c.loss_bound);
    read(j, "alpha", c.alpha);
    read(j, "eps_w_p", c.eps_w_p);
    read(j, "lambda_eff", c.lambda_eff);
    read(j, "h_anchor_given_w", c.h_anchor_given_w);
    read(j, "h_gen_given_w", c.h_gen_given_w);
    read(j, "h_anchor", c.h_anchor);
    read(j, "h_gen", c.h_gen);
    read(j, "mi_anchor_w", c.mi_anchor_w);
    read(j, "tv_task", c.tv_task);
    read(j, "tv_gen", c.tv_gen);
    return c;
  });
}

RunConfig run_config_from_json(const json& doc) {
  const json& j = doc.contains("command") && doc.contains("config") ? doc.at("config") : doc;
  require_object(j, "top level");
  reject_unknown(j, {"generation", "fit", "sweep", "budgets", "bound_params", "output_dir", "seed", "threads"},
                 "top level");
  RunConfig c;
  guarded("top level", [&] {
    read(j, "seed", c.seed);
    c.reseed(c.seed);
    read(j, "output_dir", c.output_dir);
    read(j, "threads", c.threads);
    return 0;
  });
  if (auto it = j.find("generation"); it != j.end()) c.generation = generation_from_json(*it, c.generation);
  if (auto it = j.find("fit"); it != j.end()) c.fit = fit_from_json(*it, c.fit);
  if (auto it = j.find("budgets"); it != j.end()) c.budgets = budgets_from_json(*it, c.budgets);
  if (auto it = j.find("bound_params"); it != j.end()) c.bound_params = bound_params_from_json(*it);
  if (auto it = j.find("sweep"); it != j.end()) {
    const json& s = *it;
    require_object(s, "sweep");
    reject_unknown(s, {"variable", "values", "rounds", "resamples_per_round", "eval_samples", "seed"}, "sweep");
    guarded("sweep", [&] {
      if (auto v = s.find("variable"); v != s.end()) c.sweep.variable = sweep_variable_from_string(v->get<std::string>());
      read(s, "values", c.sweep.values);
      read(s, "rounds", c.sweep.rounds);
      read(s, "resamples_per_round", c.sweep.resamples_per_round);
      read(s, "eval_samples", c.sweep.eval_samples);
      read(s, "seed", c.sweep.seed);
      return 0;
    });
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

json to_json(const Manifest& m) {
  return {{"command", m.command},
          {"version", library_version()},
          {"config", to_json(m.config)},
          {"inputs", m.inputs},
          {"seeds", m.seeds},
          {"outputs", m.outputs},
          {"diagnostics", m.diagnostics},
          {"started_at", m.started_at},
          {"wall_clock_seconds", m.wall_clock_seconds}};
}

Manifest manifest_from_json(const json& j) {
  if (!j.is_object() || !j.contains("command") || !j.contains("config"))
    throw std::invalid_argument("manifest: missing command or config");
  Manifest m;
  m.command = j.at("command").get<std::string>();
  m.config = run_config_from_json(j.at("config"));
  if (j.contains("inputs")) m.inputs = j.at("inputs");
  if (j.contains("seeds")) m.seeds = j.at("seeds");
  return m;
}

std::string library_version() { return RBLAB_VERSION; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace rblab
