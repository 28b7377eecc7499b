#include "vf/record.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>

#include "vf/csv.hpp"
#include "vf/error.hpp"
#include "vf/par.hpp"

namespace fs = std::filesystem;

namespace vf {

namespace {

constexpr double WINDOW_S = 48.0 * 3600.0;

bool is_subject_id(const std::string& s) {
    if (s.size() != 7 || s[0] != 'p') return false;
    return std::all_of(s.begin() + 1, s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_group_dir(const std::string& s) {
    return s.size() == 3 && s[0] == 'p' && std::isdigit(static_cast<unsigned char>(s[1])) &&
           std::isdigit(static_cast<unsigned char>(s[2]));
}

// subject + "-" + stem time, optional trailing "n".
bool parse_stem(const std::string& stem, std::string& subject, SurrogateTime& start, bool& numeric) {
    std::string core = stem;
    numeric = false;
    if (!core.empty() && core.back() == 'n') {
        numeric = true;
        core.pop_back();
    }
    if (core.size() != 7 + 1 + 16) return false;
    subject = core.substr(0, 7);
    if (!is_subject_id(subject) || core[7] != '-') return false;
    try {
        start = parse_stem_time(core.substr(8));
    } catch (const VfError&) {
        return false;
    }
    return true;
}

std::string expect_field(const std::string& tok, const char* key) {
    const std::string prefix = std::string(key) + "=";
    if (tok.rfind(prefix, 0) != 0)
        fail(Errc::malformed_header, "expected '" + prefix + "...', got '" + tok + "'");
    return tok.substr(prefix.size());
}

bool chrono_less(const RecordPair& a, const RecordPair& b) {
    const int64_t ta = to_minutes(a.waveform.header.start);
    const int64_t tb = to_minutes(b.waveform.header.start);
    if (ta != tb) return ta < tb;
    return a.waveform.header.stem() < b.waveform.header.stem();
}

} // namespace

bool is_undefined(double sample) { return std::isnan(sample); }

bool WaveformRecord::operator==(const WaveformRecord& o) const {
    if (header != o.header || is_numeric != o.is_numeric) return false;
    if (samples.size() != o.samples.size()) return false;
    for (size_t i = 0; i < samples.size(); ++i) {
        const bool u1 = is_undefined(samples[i]);
        const bool u2 = is_undefined(o.samples[i]);
        if (u1 != u2) return false;
        if (!u1 && samples[i] != o.samples[i]) return false;
    }
    return true;
}

WaveformRecord parse_record(const std::string& text) {
    size_t pos = text.find('\n');
    if (pos == std::string::npos) fail(Errc::malformed_header, "missing header line");
    const std::string header_line = text.substr(0, pos);

    const auto toks = csv::split(header_line, ' ');
    if (toks.size() != 6 || toks[0] != "#VFR1")
        fail(Errc::malformed_header, "header must be '#VFR1 subject= start= fs= channel= n='");

    WaveformRecord r;
    r.header.subject_id = expect_field(toks[1], "subject");
    if (!is_subject_id(r.header.subject_id))
        fail(Errc::malformed_header, "bad subject id '" + r.header.subject_id + "'");
    r.header.start = parse_iso(expect_field(toks[2], "start")); // throws BadTimestamp
    const auto fs = csv::parse_double(expect_field(toks[3], "fs"));
    if (!fs || !(*fs > 0.0) || *fs > 1000.0) fail(Errc::malformed_header, "fs must be in (0, 1000]");
    r.header.fs_hz = *fs;
    r.header.channel = expect_field(toks[4], "channel");
    if (r.header.channel.empty()) fail(Errc::malformed_header, "empty channel label");
    const auto n = csv::parse_int(expect_field(toks[5], "n"));
    if (!n || *n < 0) fail(Errc::malformed_header, "bad sample count");
    r.header.n_samples = static_cast<size_t>(*n);

    r.samples.reserve(r.header.n_samples);
    ++pos;
    const size_t end = text.size();
    while (pos < end) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = end;
        std::string_view line(text.data() + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            const auto v = csv::parse_double(line);
            if (!v) fail(Errc::malformed_header, "bad sample line '" + std::string(line) + "'");
            r.samples.push_back(*v);
        } else if (eol != end) {
            fail(Errc::malformed_header, "blank sample line");
        }
        pos = eol + 1;
    }
    if (r.samples.size() != r.header.n_samples)
        fail(Errc::sample_count_mismatch, "header n=" + std::to_string(r.header.n_samples) + " but read " +
                                              std::to_string(r.samples.size()) + " samples");
    return r;
}

WaveformRecord parse_record_file(const fs::path& path) {
    WaveformRecord r = parse_record(csv::read_file(path.string()));
    const std::string stem = path.stem().string();
    r.is_numeric = !stem.empty() && stem.back() == 'n';
    return r;
}

std::string serialize_record(const WaveformRecord& r) {
    std::string out = "#VFR1 subject=" + r.header.subject_id + " start=" + format_iso(r.header.start) +
                      " fs=" + csv::shortest(r.header.fs_hz) + " channel=" + r.header.channel +
                      " n=" + std::to_string(r.header.n_samples) + "\n";
    for (const double s : r.samples) {
        out += csv::shortest(s);
        out.push_back('\n');
    }
    return out;
}

std::vector<RecordPair> pair_numeric(const std::vector<WaveformRecord>& records,
                                     std::vector<std::string>* unmatched) {
    std::map<std::string, const WaveformRecord*> numerics;
    std::vector<const WaveformRecord*> waveforms;
    std::map<std::string, int> seen;
    for (const auto& r : records) {
        if (!records.empty() && r.header.subject_id != records.front().header.subject_id)
            fail(Errc::dimension_mismatch, "pair_numeric input spans subjects");
        const std::string key = r.header.stem() + (r.is_numeric ? "n" : "");
        if (++seen[key] > 1) fail(Errc::duplicate_stem, "duplicate record stem '" + key + "'");
        if (r.is_numeric)
            numerics[r.header.stem()] = &r;
        else
            waveforms.push_back(&r);
    }

    std::vector<RecordPair> pairs;
    pairs.reserve(waveforms.size());
    for (const auto* w : waveforms) {
        RecordPair p;
        p.waveform = *w;
        const auto it = numerics.find(w->header.stem());
        if (it != numerics.end()) {
            p.numeric = *it->second;
            numerics.erase(it);
        }
        pairs.push_back(std::move(p));
    }
    if (unmatched != nullptr)
        for (const auto& kv : numerics) unmatched->push_back(kv.first + "n");
    std::sort(pairs.begin(), pairs.end(), chrono_less);
    return pairs;
}

TreeScan scan_matched_tree(const fs::path& root, unsigned jobs) {
    if (!fs::exists(root)) fail(Errc::root_not_found, "no such directory: " + root.string());

    struct FileEntry {
        fs::path path;
        std::string subject;
    };
    std::vector<FileEntry> files;
    TreeScan scan;

    std::vector<fs::path> groups;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && is_group_dir(e.path().filename().string())) groups.push_back(e.path());
    std::sort(groups.begin(), groups.end());

    for (const auto& g : groups) {
        std::vector<fs::path> subjects;
        for (const auto& e : fs::directory_iterator(g)) {
            if (e.is_directory() && is_subject_id(e.path().filename().string()))
                subjects.push_back(e.path());
        }
        std::sort(subjects.begin(), subjects.end());
        for (const auto& sdir : subjects) {
            const std::string dir_subject = sdir.filename().string();
            std::vector<fs::path> entries;
            for (const auto& e : fs::directory_iterator(sdir)) entries.push_back(e.path());
            std::sort(entries.begin(), entries.end());
            for (const auto& p : entries) {
                std::string subject;
                SurrogateTime start;
                bool numeric = false;
                if (!fs::is_regular_file(p) || p.extension() != ".vfr" ||
                    !parse_stem(p.stem().string(), subject, start, numeric) || subject != dir_subject) {
                    scan.skipped.push_back(p.string());
                    continue;
                }
                files.push_back({p, subject});
            }
        }
    }

    std::vector<std::optional<WaveformRecord>> parsed(files.size());
    std::vector<std::string> parse_failures(files.size());
    parallel_for(files.size(), jobs, [&](size_t i) {
        try {
            parsed[i] = parse_record_file(files[i].path);
        } catch (const VfError& e) {
            parse_failures[i] = files[i].path.string() + " (" + e.what() + ")";
        }
    });

    std::map<std::string, std::vector<WaveformRecord>> by_subject;
    for (size_t i = 0; i < files.size(); ++i) {
        if (!parsed[i]) {
            scan.skipped.push_back(parse_failures[i]);
            continue;
        }
        if (parsed[i]->header.subject_id != files[i].subject) {
            scan.skipped.push_back(files[i].path.string() + " (header subject mismatch)");
            continue;
        }
        by_subject[files[i].subject].push_back(std::move(*parsed[i]));
    }

    for (auto& [subject, records] : by_subject) {
        std::vector<std::string> orphans;
        auto pairs = pair_numeric(records, &orphans);
        for (const auto& o : orphans) scan.skipped.push_back(subject + "/" + o + ".vfr (numeric without waveform)");
        if (pairs.empty()) continue;
        PatientRecordSet set;
        set.subject_id = subject;
        set.pairs = std::move(pairs);
        scan.sets.push_back(std::move(set));
    }
    return scan;
}

WindowedSignal window_first_48h(const PatientRecordSet& set, const SurrogateTime& admit, double fs_target) {
    validate(admit);
    WindowedSignal out;
    if (fs_target <= 0.0) fs_target = set.pairs.empty() ? 1.0 : set.pairs.front().waveform.header.fs_hz;

    const double admit_s = to_seconds(admit);
    const double end_s = admit_s + WINDOW_S;
    const size_t max_slots = static_cast<size_t>(std::ceil(WINDOW_S * fs_target));

    // Pass 1: anchor the grid at the first in-window sample.
    double t0 = 0.0;
    bool have_t0 = false;
    for (const auto& pair : set.pairs) {
        const auto& h = pair.waveform.header;
        if (h.n_samples == 0) continue;
        const double start_s = to_seconds(h.start);
        double first_idx = std::ceil((admit_s - start_s) * h.fs_hz);
        if (first_idx < 0.0) first_idx = 0.0;
        const double t_first = start_s + first_idx / h.fs_hz;
        if (first_idx < static_cast<double>(h.n_samples) && t_first < end_s) {
            t0 = t_first;
            have_t0 = true;
            break;
        }
    }

    out.record.header.subject_id = set.subject_id;
    out.record.header.start = admit;
    out.record.header.fs_hz = fs_target;
    if (!set.pairs.empty()) out.record.header.channel = set.pairs.front().waveform.header.channel;
    if (!have_t0) {
        out.record.header.n_samples = 0;
        return out;
    }

    std::vector<double> grid;
    size_t last_slot = 0;
    for (const auto& pair : set.pairs) {
        const auto& rec = pair.waveform;
        const auto& h = rec.header;
        if (h.n_samples == 0) continue;
        const double start_s = to_seconds(h.start);
        double first_idx = std::ceil((admit_s - start_s) * h.fs_hz);
        if (first_idx < 0.0) first_idx = 0.0;
        for (size_t i = static_cast<size_t>(first_idx); i < h.n_samples; ++i) {
            const double t = start_s + static_cast<double>(i) / h.fs_hz;
            if (t >= end_s) break;
            const auto slot = static_cast<size_t>(std::llround((t - t0) * fs_target));
            if (slot >= max_slots) break;
            if (slot >= grid.size()) grid.resize(slot + 1, std::numeric_limits<double>::quiet_NaN());
            grid[slot] = rec.samples[i];
            last_slot = std::max(last_slot, slot);
            ++out.kept;
        }
    }

    grid.resize(last_slot + 1);
    out.filled = 0;
    for (const double v : grid)
        if (is_undefined(v)) ++out.filled;
    out.record.samples = std::move(grid);
    out.record.header.n_samples = out.record.samples.size();
    return out;
}

} // namespace vf
