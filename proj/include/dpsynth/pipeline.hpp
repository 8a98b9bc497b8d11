#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpsynth/dataset.hpp"
#include "dpsynth/metrics.hpp"
#include "dpsynth/preprocess.hpp"
#include "dpsynth/selection.hpp"
#include "dpsynth/synthesis.hpp"
#include "dpsynth/theory.hpp"

namespace dpsynth {

// Stage failures carry the failing stage's name; the CLI maps them to their
// own exit code.
class StageError : public Error {
public:
    StageError(const std::string& stage, const std::string& what)
        : Error("stage '" + stage + "' failed: " + what), stage_(stage) {}

    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

enum class SynthMethod { Gum, Junction, Ga };

// Fractions of the total rho given to each consumer; must sum to one.
struct BudgetShares {
    double preprocess = 0.10;
    double row_count = 0.01;
    double selection = 0.10;
    double measurement = 0.79;

    void validate() const;
};

struct PipelineConfig {
    std::string data_csv;
    std::string domain_json;
    std::string output_dir;  // empty = keep everything in memory

    double epsilon = 1.0;
    double delta = 1e-5;
    BudgetShares shares;

    BinMethod bin_method = BinMethod::PrivTree;
    std::int64_t bins = 100;
    double merge_theta = 0.002;
    std::int64_t gate = 100;

    SelectionStrategy strategy = SelectionStrategy::NonAdaptive;
    AdaptivePolicy adaptive;

    SynthMethod synthesizer = SynthMethod::Gum;
    GumConfig gum;
    GaConfig ga;

    std::size_t synthetic_n = 0;  // 0 = round the noisy record count
    int workload_per_clique = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

// Name <-> enum helpers shared by the CLI and the JSON config reader.
std::string bin_method_name(BinMethod m);
BinMethod parse_bin_method(const std::string& name);
std::string strategy_name(SelectionStrategy s);
SelectionStrategy parse_strategy(const std::string& name);
std::string synth_method_name(SynthMethod m);
SynthMethod parse_synth_method(const std::string& name);

// Reads a config document; missing keys keep their defaults, unknown keys are
// rejected.
PipelineConfig pipeline_config_from_json(const std::string& text);
PipelineConfig load_pipeline_config(const std::string& path);

struct StageTime {
    std::string stage;
    double seconds = 0.0;
};

struct PlanSummary {
    std::string clique;
    std::int64_t cells = 0;
    double rho = 0.0;
    double sigma = 0.0;
};

struct PipelineReport {
    PipelineConfig config;

    double rho_total = 0.0;
    double rho_spent = 0.0;
    double equivalent_epsilon = 0.0;
    double n_hat = 0.0;
    std::size_t input_rows = 0;
    std::size_t rows_synthesized = 0;

    std::vector<BudgetLedger::Spend> ledger;
    std::string plan_strategy;
    double plan_rho_overhead = 0.0;
    std::vector<PlanSummary> plan;
    std::vector<RoundRecord> rounds;

    FidelityReport fidelity;
    double query_error = 0.0;
    DomainSizeReport processed_sizes;

    std::vector<StageTime> stage_seconds;
    std::vector<std::string> outputs;

    // Deterministic portion only (no timings, no absolute paths); two runs
    // with the same config and seed produce identical text.
    std::string metrics_json() const;
    std::string to_json() const;
};

struct PipelineResult {
    PipelineReport report;
    PreprocessArtifacts artifacts;
    SelectionPlan plan;
    Dataset synthetic;  // processed-space codes
    Dataset decoded;    // value space
};

// Runs budget conversion, preprocessing, selection, synthesis, decoding, and
// evaluation as named stages. With an output directory set, writes
// synthetic.csv, artifacts.json, and report.json there; a failing stage
// removes whatever it had already written and surfaces as StageError.
PipelineResult run_pipeline(const PipelineConfig& config, const Dataset& data);
PipelineResult run_pipeline(const PipelineConfig& config);

// Battery wrapper for the CLI; kl is swappable so a corrupted divergence is
// provably caught.
TheoryBatteryReport verify_theory(const TheoryBatteryOptions& options, const KlFn& kl = {});

}  // namespace dpsynth
