#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vf {

// Knobs for a generated cohort. The waveform effect plants higher heart-rate
// variability (scaled by 1 + effect_size) plus a late-window drift on
// deceased stays; effect_size 0 makes the waveform channel uninformative.
struct CohortSpec {
    size_t n_patients = 100;
    double deceased_fraction = 0.3;
    double waveform_coverage = 0.132;
    double effect_size = 1.0;
    uint64_t seed = 1;
    std::vector<double> fs_choices = {0.17, 0.25, 0.5, 1.0};
    size_t channels = 5;
    double record_hours_min = 2.0;
    double record_hours_max = 6.0;
    size_t max_records_per_patient = 3;
    // Mean shift (in channel sds) planted on the first two clinical channels
    // of deceased stays; keeps the clinical-only models better than chance.
    double clinical_effect = 0.35;
};

struct CohortManifest {
    CohortSpec spec;
    std::string out_dir;
    std::string tree_root;    // <out>/matched
    std::string episodes_dir; // <out>/episodes
    std::string stays_file;   // <out>/stays.csv
    std::string truth_file;   // <out>/truth.json
    size_t n_deceased = 0;
    size_t n_waveform_patients = 0;
    std::vector<std::string> record_files;  // relative to out_dir
    std::vector<std::string> episode_files; // relative to out_dir
};

// Writes the matched/ record tree, per-stay episode tables, the stay/label
// table, generator truth, and a manifest. Byte-identical for a fixed spec.
CohortManifest gen_cohort(const CohortSpec& spec, const std::filesystem::path& out_dir,
                          unsigned jobs = 1);

void save_manifest(const CohortManifest& m, const std::filesystem::path& path);
CohortManifest load_manifest(const std::filesystem::path& path);

struct CheckReport {
    bool ok = true;
    std::vector<std::string> passed;
    std::string first_failure;
};

// Re-parses everything through record-io and checks counts, the exact label
// ratio, and waveform coverage within one patient.
CheckReport verify_cohort(const std::filesystem::path& manifest_path);

// Per-channel resting baselines used by the episode generator (cycled when
// channels > 5); exposed so pipeline configs can reuse them as fill defaults.
const std::vector<double>& clinical_channel_normals();

} // namespace vf
