#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "invrl/agents.hpp"
#include "invrl/forecast.hpp"

namespace invrl::bench {

using Json = nlohmann::json;

/// Experiments the harness knows how to run.
inline constexpr std::string_view kExperiments[] = {"train", "evaluate", "forecast", "table1",
                                                     "scenario1", "scenario2", "fig3"};

/// Full default configuration of an experiment; every accepted key appears here.
Json default_config(std::string_view experiment);

/// Merges `user` onto the defaults (RFC 7386 merge patch). Keys the defaults
/// do not know are rejected with their dotted path.
Json resolve_config(std::string_view experiment, const Json& user);

Json load_config_file(const std::filesystem::path& path);

/// Command-line overrides applied after the config file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<double> sigma2;
    std::optional<std::string> model;
    std::optional<bool> transfer;
};

void apply_overrides(std::string_view experiment, Json& config, const Overrides& overrides);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void write(const std::filesystem::path& path) const;
    std::string to_string() const;
};

/// Deterministic text for a number in CSV output.
std::string format_number(double value);

struct ExperimentResult {
    /// One JSON object per run; a pure function of (config, seed).
    std::vector<Json> records;
    /// Summary and plot tables keyed by file name, recomputable from records.
    std::vector<std::pair<std::string, CsvTable>> tables;
    /// Wall-clock measurements, kept apart because they vary between runs.
    std::vector<std::pair<std::string, CsvTable>> timing_tables;
};

/// Runs table1, scenario1, scenario2 or fig3. `workers` <= 0 picks the
/// hardware concurrency.
ExperimentResult run_experiment(std::string_view experiment, const Json& config);

/// Writes config.json, records.jsonl and every table into `out`.
void write_result(const ExperimentResult& result, const Json& config, const std::filesystem::path& out);

std::vector<Json> read_records(const std::filesystem::path& path);

/// Summary tables rebuilt from records alone.
std::vector<std::pair<std::string, CsvTable>> summarize(std::string_view experiment, const std::vector<Json>& records);

/// (baseline - value) / baseline.
double improvement(double baseline, double value);

/// Paired one-sided sign test of "candidate costs no more than baseline".
/// Ties are dropped; p is P(Binomial(n, 1/2) >= worse).
struct SignTest {
    int n = 0;
    int worse = 0;
    double p_value = 1.0;
};
SignTest sign_test(const std::vector<double>& candidate, const std::vector<double>& baseline);

double sample_variance(const std::vector<double>& values);

// Building blocks shared with the CLI's single-run subcommands.

PerishableInventory make_env(const Json& config);
DemandDistribution make_demand(const Json& config, std::optional<double> variance = std::nullopt);
ModelConfig make_model_config(const Json& config, ModelKind kind);
AgentConfig make_agent_config(const Json& config, Algorithm algo, ModelKind kind, std::uint64_t seed);

/// The existing product's demand history: loaded from the configured dataset
/// when a path is given, otherwise synthesized from the configured moments.
DemandSeries load_history(const Json& config, std::uint64_t seed);
Forecaster fit_forecaster(const Json& config, const DemandSeries& history, std::uint64_t seed);
WarmStart make_warm_start(const Json& config, const Forecaster& forecaster, const PerishableInventory& env,
                          ModelKind kind, std::uint64_t seed);

Json metrics_to_json(const RunMetrics& m);

}  // namespace invrl::bench
