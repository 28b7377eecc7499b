#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vf/balance.hpp"
#include "vf/features.hpp"
#include "vf/metrics.hpp"
#include "vf/models.hpp"
#include "vf/record.hpp"
#include "vf/signal.hpp"
#include "vf/timestamp.hpp"

namespace vf {

struct PipelineConfig {
    std::string tree_root;
    std::string episodes_dir;
    std::string stays_file;
    std::string out_dir;
    uint64_t seed = 1;
    unsigned jobs = 1;

    PrepConfig prep;

    size_t channels = 5;
    std::vector<double> clinical_defaults; // leading-gap fill; empty -> standard vitals, cycled

    ModelKind model = ModelKind::lstm;
    size_t hidden = 16;
    size_t channel_hidden = 4;
    size_t wf_dense = 8;
    TrainConfig train;

    double train_fraction = 0.85;
    double test_fraction = 0.15;
    double val_fraction = 0.15; // of the training patients, for early stopping

    BalanceConfig balance;
};

PipelineConfig load_pipeline_config(const std::string& json_path);
void validate_pipeline_config(const PipelineConfig& cfg);

// One ICU stay after ingest: the 48 x K forward-filled clinical grid plus,
// after extraction, the waveform features.
struct Stay {
    std::string stay_id;
    std::string subject_id;
    SurrogateTime admit;
    int label = 0;
    std::vector<double> seq; // 48*K row-major
    bool has_wf = false;
    FeatureVector wf;
};

struct StayTable {
    std::vector<Stay> stays; // sorted by stay_id
    size_t channels = 0;
    size_t dropped_rows = 0;
};

// Validates and grids the episode tables, drops spurious rows (counted),
// joins labels. Throws MissingLabels when an episode has no stay row.
StayTable ingest(const PipelineConfig& cfg);

struct ExtractCounts {
    size_t with_features = 0;
    size_t no_records = 0;
    size_t empty_windows = 0;
    size_t short_signals = 0;
};

// Windows each stay's records to its first 48 h, runs the preprocessing
// chain, and fills Stay::wf.
ExtractCounts extract_waveform_features(StayTable& table, const PipelineConfig& cfg);

struct SplitIds {
    std::vector<std::string> train_stays; // fit portion
    std::vector<std::string> val_stays;
    std::vector<std::string> test_stays;
};

// Partition by patient with a seeded shuffle; every stay of a patient lands
// on one side. Throws DegenerateSplit unless both classes appear in every
// part.
SplitIds split_by_patient(const StayTable& table, double train_fraction, double val_fraction,
                          uint64_t seed);

// Per-column standardization fitted on the training fold.
struct Standardizer {
    std::vector<double> clin_mu, clin_sd;          // per channel
    std::array<double, 12> wf_mu{}, wf_sd{};       // per waveform feature
};

Standardizer fit_standardizer(const StayTable& table, const std::vector<std::string>& fit_ids);
Sample make_sample(const Stay& stay, const Standardizer& st);

struct Checkpoint {
    ModelSpec spec;
    Standardizer standardizer;
    std::vector<double> theta;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Standalone A-SUWO over a feature-matrix CSV (the `balance` subcommand).
void balance_feature_csv(const std::string& in_path, const std::string& out_path, uint64_t seed,
                         const BalanceConfig& cfg);

// ---- stage runners ----------------------------------------------------------
// Each stage reads its predecessors' artifacts under cfg.out_dir, no-ops when
// the content hash of its inputs matches the recorded state, and writes its
// artifacts plus a state entry.

struct StageOutcome {
    std::string name;
    bool skipped = false;
};

StageOutcome run_ingest_stage(const PipelineConfig& cfg);
StageOutcome run_extract_stage(const PipelineConfig& cfg);
StageOutcome run_split_stage(const PipelineConfig& cfg);
StageOutcome run_balance_stage(const PipelineConfig& cfg);
std::vector<StageOutcome> run_train_stage(const PipelineConfig& cfg,
                                          std::optional<FusionKind> only = std::nullopt);
StageOutcome run_eval_stage(const PipelineConfig& cfg);
StageOutcome run_report_stage(const PipelineConfig& cfg);

struct BenchmarkResult {
    EvalReport report;
    std::vector<StageOutcome> stages;
    std::map<std::string, MetricPair> fusion_metrics;
    std::map<std::string, MetricPair> clinical_metrics;
};

// ingest -> extract -> split -> balance -> train both variants -> eval ->
// report, with the stay-id leakage audit enforced.
BenchmarkResult run_benchmark(const PipelineConfig& cfg);

// Report parsed back from the persisted eval artifacts.
EvalReport read_report(const PipelineConfig& cfg);

} // namespace vf
