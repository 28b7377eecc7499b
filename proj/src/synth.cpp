#include "vf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "vf/csv.hpp"
#include "vf/error.hpp"
#include "vf/par.hpp"
#include "vf/record.hpp"
#include "vf/rng.hpp"
#include "vf/timestamp.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace vf {

namespace {

constexpr int64_t WINDOW_MIN = 48 * 60;

struct PatientPlan {
    size_t index = 0;
    std::string subject;
    std::string stay_id;
    SurrogateTime admit;
    int label = 0;
    bool has_wf = false;
    double fs = 1.0;
    // truth
    double base_hr = 0.0;
    double hr_sd = 0.0;
    double drift_amp = 0.0;
};

std::string subject_for(size_t i) {
    // Spread patients across the p00..p09 group directories.
    const unsigned num = static_cast<unsigned>((i % 10) * 10000 + i / 10) % 100000u;
    char buf[16];
    std::snprintf(buf, sizeof buf, "p0%05u", num);
    return buf;
}

const std::vector<double>& channel_sds() {
    static const std::vector<double> sds = {8.0, 12.0, 0.4, 1.5, 3.0};
    return sds;
}

std::string episode_csv(const PatientPlan& p, const CohortSpec& spec) {
    Rng rng(derive_seed(spec.seed, 0xE0000 + p.index));
    const auto& normals = clinical_channel_normals();
    const auto& sds = channel_sds();

    std::string out = "hour";
    for (size_t c = 0; c < spec.channels; ++c) out += ",c" + std::to_string(c);
    out += "\n";

    std::vector<double> value(spec.channels);
    std::vector<double> base(spec.channels);
    for (size_t c = 0; c < spec.channels; ++c) {
        const double normal = normals[c % normals.size()];
        const double sd = sds[c % sds.size()];
        base[c] = normal + 0.5 * sd * rng.normal();
        if (p.label == 1 && c < 2) base[c] += spec.clinical_effect * sd;
        value[c] = base[c] + 0.5 * sd * rng.normal();
    }
    for (int hour = 0; hour < 48; ++hour) {
        out += std::to_string(hour);
        for (size_t c = 0; c < spec.channels; ++c) {
            const double sd = sds[c % sds.size()];
            value[c] = base[c] + 0.8 * (value[c] - base[c]) + 0.5 * sd * rng.normal();
            out += ",";
            if (rng.uniform01() < 0.05) continue; // missing cell
            out += csv::shortest(value[c]);
        }
        out += "\n";
    }
    return out;
}

std::vector<WaveformRecord> waveform_records(PatientPlan& p, const CohortSpec& spec) {
    Rng rng(derive_seed(spec.seed, 0xF0000 + p.index));
    std::vector<WaveformRecord> records;
    if (!p.has_wf) return records;

    p.base_hr = rng.uniform(60.0, 100.0);
    const double raw_sd = rng.uniform(2.0, 4.0);
    p.hr_sd = p.label == 1 ? raw_sd * (1.0 + spec.effect_size) : raw_sd;
    p.drift_amp = p.label == 1 ? 4.0 * spec.effect_size : 0.0;

    const size_t n_rec = 1 + rng.below(std::max<size_t>(1, spec.max_records_per_patient));
    const double phi = 0.95;
    const double innovation = p.hr_sd * std::sqrt(1.0 - phi * phi);
    const int64_t admit_min = to_minutes(p.admit);

    double x = p.base_hr + p.hr_sd * rng.normal();
    int64_t cursor = static_cast<int64_t>(rng.below(8 * 60)); // minutes past admit
    for (size_t r = 0; r < n_rec; ++r) {
        if (cursor >= WINDOW_MIN - 30) break;
        const double dur_h = rng.uniform(spec.record_hours_min, spec.record_hours_max);
        const int64_t dur_min = std::max<int64_t>(30, static_cast<int64_t>(std::llround(dur_h * 60.0)));
        WaveformRecord rec;
        rec.header.subject_id = p.subject;
        rec.header.start = from_minutes(admit_min + cursor);
        rec.header.fs_hz = p.fs;
        rec.header.channel = "HR";
        const size_t n = static_cast<size_t>(std::floor(static_cast<double>(dur_min) * 60.0 * p.fs));
        rec.samples.reserve(n);
        for (size_t k = 0; k < n; ++k) {
            x = p.base_hr + phi * (x - p.base_hr) + innovation * rng.normal();
            const double tau_min = static_cast<double>(cursor) + static_cast<double>(k) / p.fs / 60.0;
            // Late-window deterioration: ramps over the final 16 hours.
            const double ramp = std::max(0.0, (tau_min - 32.0 * 60.0) / (16.0 * 60.0));
            double v = std::max(5.0, x + p.drift_amp * ramp);
            const double roll = rng.uniform01();
            if (roll < 0.02)
                v = std::numeric_limits<double>::quiet_NaN();
            else if (roll < 0.04)
                v = 0.0;
            rec.samples.push_back(v);
        }
        rec.header.n_samples = rec.samples.size();
        records.push_back(std::move(rec));
        cursor += dur_min + 5 + static_cast<int64_t>(rng.below(4 * 60));
    }
    return records;
}

} // namespace

const std::vector<double>& clinical_channel_normals() {
    static const std::vector<double> normals = {80.0, 120.0, 37.0, 97.0, 18.0};
    return normals;
}

CohortManifest gen_cohort(const CohortSpec& spec, const fs::path& out_dir, unsigned jobs) {
    if (spec.n_patients < 4) fail(Errc::invalid_config, "need at least 4 patients");
    if (spec.n_patients > 99999) fail(Errc::invalid_config, "too many patients for the id scheme");
    if (spec.deceased_fraction < 0.0 || spec.deceased_fraction > 1.0 || spec.waveform_coverage < 0.0 ||
        spec.waveform_coverage > 1.0)
        fail(Errc::invalid_config, "fractions must be in [0, 1]");
    if (spec.effect_size < 0.0) fail(Errc::invalid_config, "effect_size must be >= 0");
    if (spec.fs_choices.empty()) fail(Errc::invalid_config, "fs_choices must be non-empty");
    for (const double f : spec.fs_choices)
        if (!(f > 0.0) || f > 1.0) fail(Errc::invalid_config, "fs choices must lie in (0, 1]");

    std::error_code ec;
    fs::create_directories(out_dir / "matched", ec);
    fs::create_directories(out_dir / "episodes", ec);
    if (ec) fail(Errc::io_failure, "cannot create " + out_dir.string());

    const size_t n = spec.n_patients;
    const size_t n_dec = static_cast<size_t>(std::llround(spec.deceased_fraction * static_cast<double>(n)));
    const size_t n_wf = static_cast<size_t>(std::llround(spec.waveform_coverage * static_cast<double>(n)));

    // Cohort-level assignments; per-patient streams stay index-keyed so the
    // result is independent of generation order.
    Rng cohort_rng(derive_seed(spec.seed, 0xC0));
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    cohort_rng.shuffle(order);
    std::vector<int> labels(n, 0);
    for (size_t i = 0; i < n_dec; ++i) labels[order[i]] = 1;
    cohort_rng.shuffle(order);
    std::vector<int> covered(n, 0);
    for (size_t i = 0; i < n_wf; ++i) covered[order[i]] = 1;

    std::vector<PatientPlan> plans(n);
    size_t fs_cursor = 0;
    for (size_t i = 0; i < n; ++i) {
        PatientPlan& p = plans[i];
        p.index = i;
        p.subject = subject_for(i);
        p.stay_id = p.subject + "-e1";
        p.label = labels[i];
        p.has_wf = covered[i] != 0;
        if (p.has_wf) p.fs = spec.fs_choices[fs_cursor++ % spec.fs_choices.size()];
        Rng rng(derive_seed(spec.seed, 0xA0000 + i));
        p.admit = SurrogateTime{2100 + static_cast<int>(rng.below(80)), 1 + static_cast<int>(rng.below(12)),
                                1 + static_cast<int>(rng.below(28)), static_cast<int>(rng.below(24)),
                                static_cast<int>(rng.below(60))};
    }

    CohortManifest m;
    m.spec = spec;
    m.out_dir = out_dir.string();
    m.tree_root = (out_dir / "matched").string();
    m.episodes_dir = (out_dir / "episodes").string();
    m.stays_file = (out_dir / "stays.csv").string();
    m.truth_file = (out_dir / "truth.json").string();
    m.n_deceased = n_dec;
    m.n_waveform_patients = n_wf;

    // Record stems are needed up front for the manifest; content written in
    // parallel below.
    std::vector<std::vector<WaveformRecord>> recs(n);
    parallel_for(n, jobs, [&](size_t i) { recs[i] = waveform_records(plans[i], spec); });

    std::vector<std::string> episode_content(n);
    parallel_for(n, jobs, [&](size_t i) { episode_content[i] = episode_csv(plans[i], spec); });

    for (size_t i = 0; i < n; ++i) {
        const PatientPlan& p = plans[i];
        const std::string group = p.subject.substr(0, 3);
        for (const auto& rec : recs[i]) {
            const fs::path rel = fs::path("matched") / group / p.subject / (rec.header.stem() + ".vfr");
            fs::create_directories(out_dir / rel.parent_path(), ec);
            csv::write_file((out_dir / rel).string(), serialize_record(rec));
            m.record_files.push_back(rel.generic_string());
        }
        const fs::path erel = fs::path("episodes") / (p.stay_id + ".csv");
        csv::write_file((out_dir / erel).string(), episode_content[i]);
        m.episode_files.push_back(erel.generic_string());
    }

    std::string stays = "stay_id,subject_id,admit,label\n";
    for (const auto& p : plans)
        stays += p.stay_id + "," + p.subject + "," + format_iso(p.admit) + "," + std::to_string(p.label) + "\n";
    csv::write_file(m.stays_file, stays);

    json truth = json::array();
    for (const auto& p : plans) {
        truth.push_back(json{{"stay_id", p.stay_id},
                             {"subject_id", p.subject},
                             {"label", p.label},
                             {"has_waveform", p.has_wf},
                             {"fs_hz", p.fs},
                             {"base_hr", p.base_hr},
                             {"hr_sd", p.hr_sd},
                             {"drift_amp", p.drift_amp}});
    }
    csv::write_file(m.truth_file, truth.dump(2) + "\n");

    save_manifest(m, out_dir / "manifest.json");
    return m;
}

void save_manifest(const CohortManifest& m, const fs::path& path) {
    // Paths are stored relative to the manifest so a cohort directory can be
    // moved (and so reruns into different directories are byte-identical).
    json j;
    j["spec"] = {{"n_patients", m.spec.n_patients},
                 {"deceased_fraction", m.spec.deceased_fraction},
                 {"waveform_coverage", m.spec.waveform_coverage},
                 {"effect_size", m.spec.effect_size},
                 {"seed", m.spec.seed},
                 {"fs_choices", m.spec.fs_choices},
                 {"channels", m.spec.channels},
                 {"record_hours_min", m.spec.record_hours_min},
                 {"record_hours_max", m.spec.record_hours_max},
                 {"max_records_per_patient", m.spec.max_records_per_patient},
                 {"clinical_effect", m.spec.clinical_effect}};
    j["tree_root"] = "matched";
    j["episodes_dir"] = "episodes";
    j["stays_file"] = "stays.csv";
    j["truth_file"] = "truth.json";
    j["n_deceased"] = m.n_deceased;
    j["n_waveform_patients"] = m.n_waveform_patients;
    j["record_files"] = m.record_files;
    j["episode_files"] = m.episode_files;
    csv::write_file(path.string(), j.dump(2) + "\n");
}

CohortManifest load_manifest(const fs::path& path) {
    json j;
    try {
        j = json::parse(csv::read_file(path.string()));
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_config, "bad manifest json: " + std::string(e.what()));
    }
    CohortManifest m;
    try {
        const auto& s = j.at("spec");
        m.spec.n_patients = s.at("n_patients").get<size_t>();
        m.spec.deceased_fraction = s.at("deceased_fraction").get<double>();
        m.spec.waveform_coverage = s.at("waveform_coverage").get<double>();
        m.spec.effect_size = s.at("effect_size").get<double>();
        m.spec.seed = s.at("seed").get<uint64_t>();
        m.spec.fs_choices = s.at("fs_choices").get<std::vector<double>>();
        m.spec.channels = s.at("channels").get<size_t>();
        m.spec.record_hours_min = s.at("record_hours_min").get<double>();
        m.spec.record_hours_max = s.at("record_hours_max").get<double>();
        m.spec.max_records_per_patient = s.at("max_records_per_patient").get<size_t>();
        m.spec.clinical_effect = s.at("clinical_effect").get<double>();
        const fs::path base = path.parent_path();
        m.out_dir = base.string();
        m.tree_root = (base / j.at("tree_root").get<std::string>()).string();
        m.episodes_dir = (base / j.at("episodes_dir").get<std::string>()).string();
        m.stays_file = (base / j.at("stays_file").get<std::string>()).string();
        m.truth_file = (base / j.at("truth_file").get<std::string>()).string();
        m.n_deceased = j.at("n_deceased").get<size_t>();
        m.n_waveform_patients = j.at("n_waveform_patients").get<size_t>();
        m.record_files = j.at("record_files").get<std::vector<std::string>>();
        m.episode_files = j.at("episode_files").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_config, "manifest missing fields: " + std::string(e.what()));
    }
    return m;
}

CheckReport verify_cohort(const fs::path& manifest_path) {
    CheckReport rep;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok && rep.ok) {
            rep.ok = false;
            rep.first_failure = what;
        } else if (ok && rep.ok) {
            rep.passed.push_back(what);
        }
        return ok;
    };

    if (!fs::exists(manifest_path)) fail(Errc::root_not_found, "no manifest at " + manifest_path.string());
    const CohortManifest m = load_manifest(manifest_path);
    const fs::path out_dir = m.out_dir;

    for (const auto& rel : m.record_files)
        if (!check(fs::exists(out_dir / rel), "record file present: " + rel)) break;
    if (rep.ok)
        for (const auto& rel : m.episode_files)
            if (!check(fs::exists(out_dir / rel), "episode file present: " + rel)) break;
    if (rep.ok) check(fs::exists(m.stays_file), "stays file present");
    if (rep.ok) check(fs::exists(m.truth_file), "truth file present");
    if (!rep.ok) {
        rep.first_failure = "VerificationFailure: " + rep.first_failure;
        return rep;
    }

    const TreeScan scan = scan_matched_tree(m.tree_root);
    size_t parsed = 0;
    std::vector<std::string> wf_subjects;
    for (const auto& set : scan.sets) {
        wf_subjects.push_back(set.subject_id);
        for (const auto& p : set.pairs) parsed += 1 + (p.numeric.has_value() ? 1 : 0);
    }
    check(scan.skipped.empty(), "no stragglers in the tree");
    check(parsed == m.record_files.size(), "record count matches manifest");

    const auto expected_wf =
        static_cast<long long>(std::llround(m.spec.waveform_coverage * static_cast<double>(m.spec.n_patients)));
    check(std::llabs(static_cast<long long>(wf_subjects.size()) - expected_wf) <= 1,
          "waveform coverage within one patient of spec");

    const auto stay_lines = csv::read_lines(m.stays_file);
    size_t dec = 0;
    for (size_t i = 1; i < stay_lines.size(); ++i) {
        const auto f = csv::split(stay_lines[i]);
        if (f.size() == 4 && f[3] == "1") ++dec;
    }
    check(stay_lines.size() == m.spec.n_patients + 1, "one stay row per patient");
    check(dec == static_cast<size_t>(std::llround(m.spec.deceased_fraction *
                                                  static_cast<double>(m.spec.n_patients))),
          "label ratio exact");

    for (const auto& rel : m.episode_files) {
        const auto lines = csv::read_lines((out_dir / rel).string());
        if (!check(lines.size() == 49, "episode has 48 hourly rows: " + rel)) break;
    }

    if (!rep.ok) rep.first_failure = "VerificationFailure: " + rep.first_failure;
    return rep;
}

} // namespace vf
