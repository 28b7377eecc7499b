#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vf/timestamp.hpp"

namespace vf {

// Text stand-in for the matched waveform tree: one record per .vfr file,
// header line then one sample per line ("nan" marks undefined). Numeric
// partner files share the waveform stem plus a trailing "n".
struct RecordHeader {
    std::string subject_id; // pXXNNNN
    SurrogateTime start;
    double fs_hz = 1.0;     // (0, 1000]
    std::string channel = "HR";
    size_t n_samples = 0;

    double duration_s() const { return static_cast<double>(n_samples) / fs_hz; }
    std::string stem() const { return subject_id + "-" + format_stem_time(start); }

    bool operator==(const RecordHeader&) const = default;
};

struct WaveformRecord {
    RecordHeader header;
    std::vector<double> samples; // finite value, 0, or quiet NaN (undefined)
    bool is_numeric = false;     // stem carried a trailing "n"

    bool operator==(const WaveformRecord& o) const;
};

struct RecordPair {
    WaveformRecord waveform;
    std::optional<WaveformRecord> numeric;
};

struct PatientRecordSet {
    std::string subject_id;
    std::vector<RecordPair> pairs; // ascending by waveform header.start
};

bool is_undefined(double sample);

WaveformRecord parse_record(const std::string& text);
WaveformRecord parse_record_file(const std::filesystem::path& path);
std::string serialize_record(const WaveformRecord& r);

// Groups records of one subject into waveform/numeric pairs. Numeric records
// without a waveform partner are reported through `unmatched` when provided.
std::vector<RecordPair> pair_numeric(const std::vector<WaveformRecord>& records,
                                     std::vector<std::string>* unmatched = nullptr);

struct TreeScan {
    std::vector<PatientRecordSet> sets; // sorted by subject_id
    std::vector<std::string> skipped;   // non-conforming paths and orphan numerics
};

// Walks root/pXX/pXXNNNN/*.vfr. Files are parsed in parallel when jobs > 1;
// the result is sorted and schedule-independent.
TreeScan scan_matched_tree(const std::filesystem::path& root, unsigned jobs = 1);

struct WindowedSignal {
    WaveformRecord record;
    size_t kept = 0;   // samples placed on the grid
    size_t filled = 0; // grid slots left undefined
    bool empty() const { return record.samples.empty(); }
};

// Concatenates the set's waveform samples falling in [admit, admit+48h) onto
// a uniform grid. The grid is anchored at the first kept sample and runs at
// fs_target (0 means: the first record's rate); slots nothing maps to stay
// undefined.
WindowedSignal window_first_48h(const PatientRecordSet& set, const SurrogateTime& admit,
                                double fs_target = 0.0);

} // namespace vf
