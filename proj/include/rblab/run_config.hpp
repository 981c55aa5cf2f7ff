#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "rblab/experiments.hpp"

namespace rblab {

/// Everything a command needs. Sections missing from a config file keep
/// their defaults; `seed` seeds every section that does not name its own.
struct RunConfig {
  GenerationConfig generation;
  FitConfig fit;
  SweepSpec sweep;
  EstimatorBudgets budgets;
  std::optional<BoundParams> bound_params;
  std::string output_dir;
  Seed seed = 0;
  int threads = 1;

  void validate() const;
  /// Sets every section seed to `s`.
  void reseed(Seed s);
};

nlohmann::json to_json(const GenerationConfig& c);
nlohmann::json to_json(const FitConfig& c);
nlohmann::json to_json(const SweepSpec& c);  // base generation/fit live at the top level
nlohmann::json to_json(const EstimatorBudgets& c);
nlohmann::json to_json(const BoundParams& c);
nlohmann::json to_json(const RunConfig& c);
nlohmann::json to_json(const BoundLedger& ledger);

GenerationConfig generation_from_json(const nlohmann::json& j, GenerationConfig base = {});
FitConfig fit_from_json(const nlohmann::json& j, FitConfig base = {});
EstimatorBudgets budgets_from_json(const nlohmann::json& j, EstimatorBudgets base = {});
BoundParams bound_params_from_json(const nlohmann::json& j, BoundParams base = {});

/// Parses a config document. A run manifest is accepted too; its
/// `config` member is used.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Run manifest: the effective configuration with defaults materialized, the
/// command inputs, seeds consumed, library version and timing.
struct Manifest {
  std::string command;
  RunConfig config;
  nlohmann::json inputs = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json outputs = nlohmann::json::array();
  nlohmann::json diagnostics = nlohmann::json::object();
  std::string started_at;
  double wall_clock_seconds = 0;
};

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);

std::string library_version();
std::string utc_timestamp();

}  // namespace rblab
