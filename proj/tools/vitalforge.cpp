// vitalforge: waveform-augmented in-hospital-mortality benchmark CLI.
//
// Subcommands mirror the pipeline stages: synth | ingest | extract | balance
// | train | eval | report. Stage commands read/write artifacts under the
// configured output directory and skip work whose inputs are unchanged.
// Exit codes: 0 success, 2 validation/input failure, 1 internal error.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "vf/balance.hpp"
#include "vf/error.hpp"
#include "vf/kernels.hpp"
#include "vf/pipeline.hpp"
#include "vf/synth.hpp"

using namespace vf;

namespace {

struct CommonOpts {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    unsigned jobs = 0;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "pipeline config (json)")->required();
    cmd->add_option("--seed", o.seed, "override the config seed")->each([&](const std::string&) {
        o.seed_set = true;
    });
    cmd->add_option("--jobs", o.jobs, "worker threads for scan/extract");
    cmd->add_option("--out", o.out_dir, "override the config output directory");
}

PipelineConfig resolve_config(const CommonOpts& o) {
    PipelineConfig cfg = load_pipeline_config(o.config_path);
    if (o.seed_set) cfg.seed = o.seed;
    if (o.jobs > 0) cfg.jobs = o.jobs;
    if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
    return cfg;
}

void log_outcome(const StageOutcome& o) {
    std::cerr << "[vitalforge] " << o.name << (o.skipped ? ": up-to-date, skipped" : ": done") << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"vitalforge: heart-rate waveform features for ICU mortality models"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate (or verify) a synthetic cohort");
    CohortSpec cohort;
    std::string synth_out;
    std::string verify_manifest;
    unsigned synth_jobs = 1;
    synth->add_option("--out", synth_out, "cohort output directory");
    synth->add_option("--n", cohort.n_patients, "number of patients");
    synth->add_option("--deceased-fraction", cohort.deceased_fraction, "deceased label fraction");
    synth->add_option("--coverage", cohort.waveform_coverage, "waveform coverage fraction");
    synth->add_option("--effect-size", cohort.effect_size, "planted waveform effect size");
    synth->add_option("--seed", cohort.seed, "generator seed");
    synth->add_option("--channels", cohort.channels, "clinical channels per episode");
    synth->add_option("--fs", cohort.fs_choices, "sampling-rate choices in (0,1] Hz");
    synth->add_option("--record-hours-min", cohort.record_hours_min, "min record duration (h)");
    synth->add_option("--record-hours-max", cohort.record_hours_max, "max record duration (h)");
    synth->add_option("--max-records", cohort.max_records_per_patient, "max records per patient");
    synth->add_option("--jobs", synth_jobs, "worker threads");
    synth->add_option("--verify", verify_manifest, "verify an existing cohort manifest instead");

    // stage commands
    CommonOpts ingest_o, extract_o, balance_o, train_o, eval_o, report_o;
    auto* ingest_cmd = app.add_subcommand("ingest", "validate episode tables and join labels");
    add_common(ingest_cmd, ingest_o);
    auto* extract_cmd = app.add_subcommand("extract", "window records and extract waveform features");
    add_common(extract_cmd, extract_o);

    auto* balance_cmd = app.add_subcommand("balance", "A-SUWO oversampling of the deceased class");
    std::string bal_in, bal_out;
    uint64_t bal_seed = 1;
    double bal_threshold = 0.0;
    int bal_knn = 5;
    balance_cmd->add_option("--config", balance_o.config_path, "pipeline config (json); runs the stage");
    balance_cmd->add_option("--seed", balance_o.seed, "seed override")->each([&](const std::string&) {
        balance_o.seed_set = true;
    });
    balance_cmd->add_option("--out", balance_o.out_dir, "output directory override");
    balance_cmd->add_option("--jobs", balance_o.jobs, "worker threads");
    balance_cmd->add_option("--in", bal_in, "standalone: feature-matrix csv to balance");
    balance_cmd->add_option("--csv-out", bal_out, "standalone: balanced csv destination");
    balance_cmd->add_option("--csv-seed", bal_seed, "standalone: RNG seed");
    balance_cmd->add_option("--linkage-threshold", bal_threshold, "merge cutoff (<=0: unlimited)");
    balance_cmd->add_option("--knn", bal_knn, "neighbor count for weighting/interpolation");

    auto* train_cmd = app.add_subcommand("train", "train the configured model");
    add_common(train_cmd, train_o);
    std::string train_model, train_fusion;
    train_cmd->add_option("--model", train_model, "logreg|lstm|channelwise (overrides config)");
    train_cmd->add_option("--fusion", train_fusion, "none|waveform (default: both variants)");

    auto* eval_cmd = app.add_subcommand("eval", "score the test fold with trained checkpoints");
    add_common(eval_cmd, eval_o);
    std::string eval_model;
    eval_cmd->add_option("--model", eval_model, "model override");

    auto* report_cmd = app.add_subcommand("report", "fusion vs clinical-only percent differences");
    add_common(report_cmd, report_o);
    std::string report_model;
    report_cmd->add_option("--model", report_model, "model override");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            if (!verify_manifest.empty()) {
                const CheckReport rep = verify_cohort(verify_manifest);
                for (const auto& c : rep.passed) std::cerr << "[verify] ok: " << c << "\n";
                if (!rep.ok) {
                    std::cerr << "[verify] " << rep.first_failure << "\n";
                    return 2;
                }
                std::cout << "cohort verified: " << rep.passed.size() << " checks passed\n";
                return 0;
            }
            if (synth_out.empty())
                fail(Errc::invalid_config, "synth needs --out (or --verify <manifest>)");
            const CohortManifest m = gen_cohort(cohort, synth_out, synth_jobs);
            std::cerr << "[vitalforge] cohort: " << m.spec.n_patients << " patients, " << m.n_deceased
                      << " deceased, " << m.n_waveform_patients << " with waveforms, "
                      << m.record_files.size() << " record files\n";
            std::cout << (std::filesystem::path(synth_out) / "manifest.json").string() << "\n";
            return 0;
        }
        if (ingest_cmd->parsed()) {
            log_outcome(run_ingest_stage(resolve_config(ingest_o)));
            return 0;
        }
        if (extract_cmd->parsed()) {
            log_outcome(run_extract_stage(resolve_config(extract_o)));
            return 0;
        }
        if (balance_cmd->parsed()) {
            if (!bal_in.empty() || !bal_out.empty()) {
                if (bal_in.empty() || bal_out.empty())
                    fail(Errc::invalid_config, "standalone balance needs both --in and --csv-out");
                BalanceConfig bc;
                bc.linkage_threshold =
                    bal_threshold > 0.0 ? bal_threshold : std::numeric_limits<double>::infinity();
                bc.knn = bal_knn;
                balance_feature_csv(bal_in, bal_out, bal_seed, bc);
                std::cout << bal_out << "\n";
                return 0;
            }
            if (balance_o.config_path.empty())
                fail(Errc::invalid_config, "balance needs --config (stage mode) or --in/--csv-out");
            PipelineConfig cfg = resolve_config(balance_o);
            if (bal_threshold > 0.0) cfg.balance.linkage_threshold = bal_threshold;
            cfg.balance.knn = bal_knn;
            log_outcome(run_balance_stage(cfg));
            return 0;
        }
        if (train_cmd->parsed()) {
            PipelineConfig cfg = resolve_config(train_o);
            if (!train_model.empty()) cfg.model = parse_model_kind(train_model);
            std::optional<FusionKind> only;
            if (!train_fusion.empty()) only = parse_fusion_kind(train_fusion);
            for (const auto& o : run_train_stage(cfg, only)) log_outcome(o);
            return 0;
        }
        if (eval_cmd->parsed()) {
            PipelineConfig cfg = resolve_config(eval_o);
            if (!eval_model.empty()) cfg.model = parse_model_kind(eval_model);
            log_outcome(run_eval_stage(cfg));
            try {
                std::cout << render_text(read_report(cfg));
            } catch (const VfError&) {
                // Only one variant evaluated; the table needs both.
            }
            return 0;
        }
        if (report_cmd->parsed()) {
            PipelineConfig cfg = resolve_config(report_o);
            if (!report_model.empty()) cfg.model = parse_model_kind(report_model);
            log_outcome(run_report_stage(cfg));
            const EvalReport r = read_report(cfg);
            std::cout << render_text(r);
            return 0;
        }
    } catch (const VfError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.is_internal() ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
