#include "vf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>

#include <json.hpp>

#include "vf/csv.hpp"
#include "vf/error.hpp"
#include "vf/hash.hpp"
#include "vf/par.hpp"
#include "vf/rng.hpp"
#include "vf/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace vf {

namespace {

constexpr size_t SEQ_HOURS = 48;
constexpr size_t WF_INPUT = 13; // 12 features + presence flag

// ---- artifact layout -------------------------------------------------------

struct Paths {
    fs::path out;

    fs::path state() const { return out / "state.json"; }
    fs::path audit() const { return out / "audit.json"; }
    fs::path stays_table() const { return out / "ingest" / "stays_table.csv"; }
    fs::path features() const { return out / "extract" / "features.csv"; }
    fs::path split_file() const { return out / "split" / "split.json"; }
    fs::path balanced() const { return out / "balance" / "balanced_train.csv"; }
    fs::path standardizer() const { return out / "balance" / "standardizer.json"; }
    fs::path ckpt(const PipelineConfig& c, FusionKind f) const {
        return out / "train" /
               (std::string(model_kind_name(c.model)) + "_" + fusion_kind_name(f) + ".ckpt");
    }
    fs::path history(const PipelineConfig& c, FusionKind f) const {
        return out / "train" /
               ("history_" + std::string(model_kind_name(c.model)) + "_" + fusion_kind_name(f) + ".json");
    }
    fs::path scores(const PipelineConfig& c, FusionKind f) const {
        return out / "eval" /
               ("scores_" + std::string(model_kind_name(c.model)) + "_" + fusion_kind_name(f) + ".csv");
    }
    fs::path metrics() const { return out / "eval" / "metrics.json"; }
    fs::path report_txt() const { return out / "report" / "report.txt"; }
    fs::path report_csv() const { return out / "report" / "report.csv"; }
};

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) fail(Errc::io_failure, "cannot create directory " + p.string());
}

// ---- stage state ------------------------------------------------------------

json load_state(const Paths& P) {
    if (!fs::exists(P.state())) return json::object();
    try {
        return json::parse(csv::read_file(P.state().string()));
    } catch (const nlohmann::json::exception&) {
        return json::object();
    }
}

void save_state(const Paths& P, const json& st) {
    ensure_dir(P.out);
    csv::write_file(P.state().string(), st.dump(2) + "\n");
}

bool stage_fresh(const json& st, const std::string& name, const std::string& input_hash,
                 const std::vector<fs::path>& outputs) {
    const auto it = st.find(name);
    if (it == st.end() || !it->is_object()) return false;
    if (it->value("input_hash", std::string()) != input_hash) return false;
    for (const auto& p : outputs)
        if (!fs::exists(p)) return false;
    return true;
}

void record_stage(const Paths& P, const std::string& name, const std::string& input_hash,
                  const std::vector<fs::path>& outputs) {
    json st = load_state(P);
    json entry;
    entry["input_hash"] = input_hash;
    json outs = json::array();
    for (const auto& p : outputs) outs.push_back(fs::relative(p, P.out).generic_string());
    entry["outputs"] = outs;
    st[name] = entry;
    save_state(P, st);
}

std::string require_artifact(const fs::path& p, const char* producer) {
    if (!fs::exists(p))
        fail(Errc::invalid_config,
             "missing artifact " + p.string() + "; run the '" + producer + "' stage first");
    return sha256_file_hex(p.string());
}

std::string hash_tree(const fs::path& root) {
    if (!fs::exists(root)) fail(Errc::root_not_found, "no such directory: " + root.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    Sha256 h;
    for (const auto& f : files) {
        h.update(fs::relative(f, root).generic_string());
        h.update(sha256_file_hex(f.string()));
    }
    return h.hex_digest();
}

// ---- config -----------------------------------------------------------------

const json* find_key(const json& j, const char* k) {
    const auto it = j.find(k);
    return it == j.end() ? nullptr : &*it;
}

} // namespace

PipelineConfig load_pipeline_config(const std::string& json_path) {
    json j;
    try {
        j = json::parse(csv::read_file(json_path));
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_config, "bad config json: " + std::string(e.what()));
    }
    PipelineConfig c;
    try {
        c.tree_root = j.value("tree_root", c.tree_root);
        c.episodes_dir = j.value("episodes_dir", c.episodes_dir);
        c.stays_file = j.value("stays_file", c.stays_file);
        c.out_dir = j.value("out_dir", c.out_dir);
        c.seed = j.value("seed", c.seed);
        c.jobs = j.value("jobs", c.jobs);
        if (const json* s = find_key(j, "smooth")) c.prep.smooth_window = s->value("window", c.prep.smooth_window);
        if (const json* f = find_key(j, "fir")) {
            c.prep.fir_taps = f->value("taps", c.prep.fir_taps);
            c.prep.fir_cutoff_hz = f->value("cutoff_hz", c.prep.fir_cutoff_hz);
        }
        if (const json* cl = find_key(j, "clinical")) {
            c.channels = cl->value("channels", c.channels);
            if (const json* d = find_key(*cl, "defaults"))
                c.clinical_defaults = d->get<std::vector<double>>();
        }
        c.model = parse_model_kind(j.value("model", std::string(model_kind_name(c.model))));
        c.hidden = j.value("hidden", c.hidden);
        c.channel_hidden = j.value("channel_hidden", c.channel_hidden);
        c.wf_dense = j.value("wf_dense", c.wf_dense);
        if (const json* tr = find_key(j, "train")) {
            const json& t = *tr;
            c.train.lr = t.value("lr", c.train.lr);
            c.train.epochs = t.value("epochs", c.train.epochs);
            c.train.batch = t.value("batch", c.train.batch);
            c.train.l2 = t.value("l2", c.train.l2);
            c.train.patience = t.value("patience", c.train.patience);
            c.train.clip = t.value("clip", c.train.clip);
        }
        if (const json* s = find_key(j, "split")) {
            c.train_fraction = s->value("train", c.train_fraction);
            c.test_fraction = s->value("test", c.test_fraction);
        }
        c.val_fraction = j.value("val_fraction", c.val_fraction);
        if (const json* b = find_key(j, "balance")) {
            const double thr = b->value("linkage_threshold", 0.0);
            c.balance.linkage_threshold = thr > 0.0 ? thr : std::numeric_limits<double>::infinity();
            c.balance.knn = b->value("knn", c.balance.knn);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_config, "bad config field: " + std::string(e.what()));
    }
    validate_pipeline_config(c);
    return c;
}

void validate_pipeline_config(const PipelineConfig& cfg) {
    if (cfg.tree_root.empty() || cfg.episodes_dir.empty() || cfg.stays_file.empty() || cfg.out_dir.empty())
        fail(Errc::invalid_config, "tree_root, episodes_dir, stays_file and out_dir are required");
    if (std::abs(cfg.train_fraction + cfg.test_fraction - 1.0) > 1e-9)
        fail(Errc::invalid_config, "split fractions must sum to 1");
    if (cfg.train_fraction <= 0.0 || cfg.test_fraction <= 0.0)
        fail(Errc::invalid_config, "split fractions must be positive");
    if (cfg.val_fraction <= 0.0 || cfg.val_fraction >= 1.0)
        fail(Errc::invalid_config, "val_fraction must be in (0, 1)");
    if (cfg.channels == 0) fail(Errc::invalid_config, "channels must be positive");
    if (!cfg.clinical_defaults.empty() && cfg.clinical_defaults.size() != cfg.channels)
        fail(Errc::invalid_config, "clinical defaults must match the channel count");
}

// ---- ingest -----------------------------------------------------------------

StayTable ingest(const PipelineConfig& cfg) {
    const auto stay_lines = csv::read_lines(cfg.stays_file);
    if (stay_lines.empty() || csv::split(stay_lines[0]) !=
                                  std::vector<std::string>{"stay_id", "subject_id", "admit", "label"})
        fail(Errc::invalid_config, "stays file must start with 'stay_id,subject_id,admit,label'");

    struct Meta {
        std::string subject;
        SurrogateTime admit;
        int label;
    };
    std::map<std::string, Meta> meta;
    for (size_t i = 1; i < stay_lines.size(); ++i) {
        const auto f = csv::split(stay_lines[i]);
        if (f.size() != 4) fail(Errc::invalid_config, "bad stays row: " + stay_lines[i]);
        if (f[3] != "0" && f[3] != "1") fail(Errc::invalid_config, "label must be 0 or 1: " + stay_lines[i]);
        if (!meta.emplace(f[0], Meta{f[1], parse_iso(f[2]), f[3] == "1" ? 1 : 0}).second)
            fail(Errc::invalid_config, "duplicate stay id " + f[0]);
    }

    if (!fs::exists(cfg.episodes_dir)) fail(Errc::root_not_found, "no such directory: " + cfg.episodes_dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(cfg.episodes_dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    const size_t K = cfg.channels;
    std::vector<double> defaults = cfg.clinical_defaults;
    if (defaults.empty()) {
        const auto& normals = clinical_channel_normals();
        for (size_t c = 0; c < K; ++c) defaults.push_back(normals[c % normals.size()]);
    }

    std::string expected_header = "hour";
    for (size_t c = 0; c < K; ++c) expected_header += ",c" + std::to_string(c);

    StayTable table;
    table.channels = K;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& file : files) {
        const std::string stay_id = file.stem().string();
        const auto it = meta.find(stay_id);
        if (it == meta.end()) fail(Errc::missing_labels, "stay " + stay_id + " has no label row");

        const auto lines = csv::read_lines(file.string());
        if (lines.empty() || lines[0] != expected_header)
            fail(Errc::dimension_mismatch, "episode header mismatch in " + file.string());

        std::vector<double> grid(SEQ_HOURS * K, nan);
        for (size_t i = 1; i < lines.size(); ++i) {
            const auto f = csv::split(lines[i]);
            if (f.size() != K + 1) {
                ++table.dropped_rows;
                continue;
            }
            const auto hour = csv::parse_int(f[0]);
            if (!hour || *hour < 0 || *hour >= static_cast<long long>(SEQ_HOURS)) {
                ++table.dropped_rows;
                continue;
            }
            std::vector<double> vals(K, nan);
            bool bad = false;
            for (size_t c = 0; c < K && !bad; ++c) {
                if (f[c + 1].empty()) continue; // missing cell, fill later
                const auto v = csv::parse_double(f[c + 1]);
                if (!v || std::isnan(*v))
                    bad = true;
                else
                    vals[c] = *v;
            }
            if (bad) {
                ++table.dropped_rows;
                continue;
            }
            for (size_t c = 0; c < K; ++c) grid[static_cast<size_t>(*hour) * K + c] = vals[c];
        }

        Stay stay;
        stay.stay_id = stay_id;
        stay.subject_id = it->second.subject;
        stay.admit = it->second.admit;
        stay.label = it->second.label;
        stay.seq.resize(SEQ_HOURS * K);
        for (size_t c = 0; c < K; ++c) {
            double cur = defaults[c];
            for (size_t t = 0; t < SEQ_HOURS; ++t) {
                const double v = grid[t * K + c];
                if (!std::isnan(v)) cur = v;
                stay.seq[t * K + c] = cur;
            }
        }
        table.stays.push_back(std::move(stay));
    }
    std::sort(table.stays.begin(), table.stays.end(),
              [](const Stay& a, const Stay& b) { return a.stay_id < b.stay_id; });
    return table;
}

// ---- extract ----------------------------------------------------------------

ExtractCounts extract_waveform_features(StayTable& table, const PipelineConfig& cfg) {
    const TreeScan scan = scan_matched_tree(cfg.tree_root, cfg.jobs);
    std::map<std::string, const PatientRecordSet*> by_subject;
    for (const auto& set : scan.sets) by_subject[set.subject_id] = &set;

    enum class Why : uint8_t { ok, no_records, empty_window, short_signal };
    std::vector<Why> why(table.stays.size(), Why::no_records);
    std::vector<FeatureVector> feats(table.stays.size());

    parallel_for(table.stays.size(), cfg.jobs, [&](size_t i) {
        Stay& stay = table.stays[i];
        const auto it = by_subject.find(stay.subject_id);
        if (it == by_subject.end()) {
            why[i] = Why::no_records;
            return;
        }
        const WindowedSignal w = window_first_48h(*it->second, stay.admit);
        if (w.empty()) {
            why[i] = Why::empty_window;
            return;
        }
        try {
            const CleanSignal s = preprocess(w.record, cfg.prep);
            if (s.samples.size() < 4) {
                why[i] = Why::short_signal;
                return;
            }
            feats[i] = extract_features(s);
            why[i] = Why::ok;
        } catch (const VfError& e) {
            if (e.code() == Errc::all_invalid || e.code() == Errc::too_short) {
                why[i] = Why::short_signal;
                return;
            }
            throw;
        }
    });

    ExtractCounts counts;
    for (size_t i = 0; i < table.stays.size(); ++i) {
        switch (why[i]) {
        case Why::ok:
            table.stays[i].has_wf = true;
            table.stays[i].wf = feats[i];
            ++counts.with_features;
            break;
        case Why::no_records: ++counts.no_records; break;
        case Why::empty_window: ++counts.empty_windows; break;
        case Why::short_signal: ++counts.short_signals; break;
        }
    }
    return counts;
}

// ---- split ------------------------------------------------------------------

SplitIds split_by_patient(const StayTable& table, double train_fraction, double val_fraction,
                          uint64_t seed) {
    std::vector<std::string> patients;
    for (const auto& s : table.stays) patients.push_back(s.subject_id);
    std::sort(patients.begin(), patients.end());
    patients.erase(std::unique(patients.begin(), patients.end()), patients.end());
    if (patients.size() < 4) fail(Errc::degenerate_split, "need at least 4 patients");

    Rng rng(derive_seed(seed, 0x511));
    rng.shuffle(patients);
    const auto p = static_cast<long long>(patients.size());
    const auto n_train =
        std::clamp<long long>(std::llround(train_fraction * static_cast<double>(p)), 1, p - 1);

    std::vector<std::string> train_p(patients.begin(), patients.begin() + n_train);
    std::set<std::string> test_p(patients.begin() + n_train, patients.end());

    Rng vrng(derive_seed(seed, 0x512));
    vrng.shuffle(train_p);
    const auto tp = static_cast<long long>(train_p.size());
    if (tp < 2) fail(Errc::degenerate_split, "training side has a single patient");
    const auto n_val =
        std::clamp<long long>(std::llround(val_fraction * static_cast<double>(tp)), 1, tp - 1);
    std::set<std::string> val_p(train_p.begin(), train_p.begin() + n_val);
    std::set<std::string> fit_p(train_p.begin() + n_val, train_p.end());

    SplitIds ids;
    for (const auto& s : table.stays) {
        if (fit_p.count(s.subject_id))
            ids.train_stays.push_back(s.stay_id);
        else if (val_p.count(s.subject_id))
            ids.val_stays.push_back(s.stay_id);
        else if (test_p.count(s.subject_id))
            ids.test_stays.push_back(s.stay_id);
    }

    auto check_classes = [&](const std::vector<std::string>& part, const char* name) {
        std::set<std::string> in(part.begin(), part.end());
        bool pos = false, neg = false;
        for (const auto& s : table.stays) {
            if (!in.count(s.stay_id)) continue;
            (s.label == 1 ? pos : neg) = true;
        }
        if (!pos || !neg)
            fail(Errc::degenerate_split, std::string(name) + " side is missing a class");
    };
    check_classes(ids.train_stays, "train");
    check_classes(ids.val_stays, "validation");
    check_classes(ids.test_stays, "test");
    return ids;
}

// ---- standardization & samples ----------------------------------------------

Standardizer fit_standardizer(const StayTable& table, const std::vector<std::string>& fit_ids) {
    const std::set<std::string> in(fit_ids.begin(), fit_ids.end());
    const size_t K = table.channels;
    Standardizer st;
    st.clin_mu.assign(K, 0.0);
    st.clin_sd.assign(K, 0.0);
    st.wf_mu.fill(0.0);
    st.wf_sd.fill(1.0);

    size_t n_rows = 0, n_wf = 0;
    for (const auto& s : table.stays) {
        if (!in.count(s.stay_id)) continue;
        ++n_rows;
        for (size_t t = 0; t < SEQ_HOURS; ++t)
            for (size_t c = 0; c < K; ++c) st.clin_mu[c] += s.seq[t * K + c];
        if (s.has_wf) ++n_wf;
    }
    if (n_rows == 0) fail(Errc::degenerate_split, "empty fit fold");
    for (auto& v : st.clin_mu) v /= static_cast<double>(n_rows * SEQ_HOURS);
    for (const auto& s : table.stays) {
        if (!in.count(s.stay_id)) continue;
        for (size_t t = 0; t < SEQ_HOURS; ++t)
            for (size_t c = 0; c < K; ++c) {
                const double d = s.seq[t * K + c] - st.clin_mu[c];
                st.clin_sd[c] += d * d;
            }
    }
    for (auto& v : st.clin_sd) {
        v = std::sqrt(v / static_cast<double>(n_rows * SEQ_HOURS));
        if (!(v > 0.0)) v = 1.0;
    }

    if (n_wf > 0) {
        st.wf_mu.fill(0.0);
        st.wf_sd.fill(0.0);
        for (const auto& s : table.stays) {
            if (!in.count(s.stay_id) || !s.has_wf) continue;
            const auto a = s.wf.as_array();
            for (size_t k = 0; k < a.size(); ++k) st.wf_mu[k] += a[k];
        }
        for (auto& v : st.wf_mu) v /= static_cast<double>(n_wf);
        for (const auto& s : table.stays) {
            if (!in.count(s.stay_id) || !s.has_wf) continue;
            const auto a = s.wf.as_array();
            for (size_t k = 0; k < a.size(); ++k) {
                const double d = a[k] - st.wf_mu[k];
                st.wf_sd[k] += d * d;
            }
        }
        for (auto& v : st.wf_sd) {
            v = std::sqrt(v / static_cast<double>(n_wf));
            if (!(v > 0.0)) v = 1.0;
        }
    }
    return st;
}

Sample make_sample(const Stay& stay, const Standardizer& st) {
    const size_t K = st.clin_mu.size();
    Sample s;
    s.label = stay.label;
    s.seq.resize(stay.seq.size());
    for (size_t t = 0; t < SEQ_HOURS; ++t)
        for (size_t c = 0; c < K; ++c)
            s.seq[t * K + c] = (stay.seq[t * K + c] - st.clin_mu[c]) / st.clin_sd[c];
    s.wf.assign(WF_INPUT, 0.0);
    if (stay.has_wf) {
        const auto a = stay.wf.as_array();
        for (size_t k = 0; k < a.size(); ++k) s.wf[k] = (a[k] - st.wf_mu[k]) / st.wf_sd[k];
        s.wf[12] = 1.0;
    }
    return s;
}

// ---- checkpoint io ------------------------------------------------------------

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::string out = "VFCK1\n";
    out += "model=" + std::string(model_kind_name(ck.spec.kind)) +
           " fusion=" + fusion_kind_name(ck.spec.fusion) + "\n";
    out += "T=" + std::to_string(ck.spec.seq_len) + " K=" + std::to_string(ck.spec.channels) +
           " H=" + std::to_string(ck.spec.hidden) + " h=" + std::to_string(ck.spec.channel_hidden) +
           " W=" + std::to_string(ck.spec.wf_dim) + " F=" + std::to_string(ck.spec.wf_dense) + "\n";
    auto dump_vec = [&out](const char* name, const double* v, size_t n) {
        out += name;
        out.push_back('=');
        for (size_t i = 0; i < n; ++i) {
            if (i) out.push_back(' ');
            out += csv::shortest(v[i]);
        }
        out.push_back('\n');
    };
    dump_vec("clin_mu", ck.standardizer.clin_mu.data(), ck.standardizer.clin_mu.size());
    dump_vec("clin_sd", ck.standardizer.clin_sd.data(), ck.standardizer.clin_sd.size());
    dump_vec("wf_mu", ck.standardizer.wf_mu.data(), ck.standardizer.wf_mu.size());
    dump_vec("wf_sd", ck.standardizer.wf_sd.data(), ck.standardizer.wf_sd.size());
    out += "theta_n=" + std::to_string(ck.theta.size()) + "\n";
    for (const double v : ck.theta) {
        out += csv::shortest(v);
        out.push_back('\n');
    }
    csv::write_file(path, out);
}

namespace {

std::vector<double> parse_ckpt_vec(const std::string& line, const char* name) {
    const std::string prefix = std::string(name) + "=";
    if (line.rfind(prefix, 0) != 0) fail(Errc::invalid_config, "checkpoint: expected " + prefix);
    std::vector<double> v;
    for (const auto& tok : csv::split(line.substr(prefix.size()), ' ')) {
        const auto d = csv::parse_double(tok);
        if (!d) fail(Errc::invalid_config, "checkpoint: bad number '" + tok + "'");
        v.push_back(*d);
    }
    return v;
}

} // namespace

Checkpoint load_checkpoint(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.size() < 8 || lines[0] != "VFCK1") fail(Errc::invalid_config, "not a checkpoint: " + path);
    Checkpoint ck;
    {
        const auto f = csv::split(lines[1], ' ');
        if (f.size() != 2) fail(Errc::invalid_config, "checkpoint: bad model line");
        ck.spec.kind = parse_model_kind(f[0].substr(f[0].find('=') + 1));
        ck.spec.fusion = parse_fusion_kind(f[1].substr(f[1].find('=') + 1));
    }
    {
        const auto f = csv::split(lines[2], ' ');
        if (f.size() != 6) fail(Errc::invalid_config, "checkpoint: bad shape line");
        auto num = [&](size_t i) {
            const auto v = csv::parse_int(f[i].substr(f[i].find('=') + 1));
            if (!v || *v < 0) fail(Errc::invalid_config, "checkpoint: bad shape");
            return static_cast<size_t>(*v);
        };
        ck.spec.seq_len = num(0);
        ck.spec.channels = num(1);
        ck.spec.hidden = num(2);
        ck.spec.channel_hidden = num(3);
        ck.spec.wf_dim = num(4);
        ck.spec.wf_dense = num(5);
    }
    ck.standardizer.clin_mu = parse_ckpt_vec(lines[3], "clin_mu");
    ck.standardizer.clin_sd = parse_ckpt_vec(lines[4], "clin_sd");
    const auto wmu = parse_ckpt_vec(lines[5], "wf_mu");
    const auto wsd = parse_ckpt_vec(lines[6], "wf_sd");
    if (wmu.size() != 12 || wsd.size() != 12) fail(Errc::invalid_config, "checkpoint: bad wf scaler");
    std::copy(wmu.begin(), wmu.end(), ck.standardizer.wf_mu.begin());
    std::copy(wsd.begin(), wsd.end(), ck.standardizer.wf_sd.begin());
    const auto n = csv::parse_int(lines[7].substr(lines[7].find('=') + 1));
    if (!n || lines.size() != 8 + static_cast<size_t>(*n))
        fail(Errc::invalid_config, "checkpoint: parameter count mismatch");
    for (size_t i = 0; i < static_cast<size_t>(*n); ++i) {
        const auto v = csv::parse_double(lines[8 + i]);
        if (!v) fail(Errc::invalid_config, "checkpoint: bad parameter line");
        ck.theta.push_back(*v);
    }
    return ck;
}

// ---- artifact (de)serialization ----------------------------------------------

namespace {

void write_stay_table(const fs::path& path, const StayTable& t) {
    std::string out = "stay_id,subject_id,admit,label";
    const size_t width = SEQ_HOURS * t.channels;
    for (size_t i = 0; i < width; ++i) out += ",v" + std::to_string(i);
    out += "\n";
    for (const auto& s : t.stays) {
        out += s.stay_id + "," + s.subject_id + "," + format_iso(s.admit) + "," + std::to_string(s.label);
        for (const double v : s.seq) {
            out.push_back(',');
            out += csv::shortest(v);
        }
        out += "\n";
    }
    csv::write_file(path.string(), out);
}

StayTable read_stay_table(const fs::path& path) {
    const auto lines = csv::read_lines(path.string());
    if (lines.empty()) fail(Errc::invalid_config, "empty stays table " + path.string());
    const auto header = csv::split(lines[0]);
    if (header.size() < 5 || (header.size() - 4) % SEQ_HOURS != 0)
        fail(Errc::invalid_config, "bad stays table header");
    StayTable t;
    t.channels = (header.size() - 4) / SEQ_HOURS;
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split(lines[i]);
        if (f.size() != header.size()) fail(Errc::invalid_config, "ragged stays table row");
        Stay s;
        s.stay_id = f[0];
        s.subject_id = f[1];
        s.admit = parse_iso(f[2]);
        s.label = f[3] == "1" ? 1 : 0;
        s.seq.reserve(f.size() - 4);
        for (size_t k = 4; k < f.size(); ++k) {
            const auto v = csv::parse_double(f[k]);
            if (!v) fail(Errc::invalid_config, "bad stays table value");
            s.seq.push_back(*v);
        }
        t.stays.push_back(std::move(s));
    }
    return t;
}

void write_features_csv(const fs::path& path, const StayTable& t) {
    std::string out = feature_csv_header() + "\n";
    for (const auto& s : t.stays) {
        if (!s.has_wf) continue;
        out += s.stay_id;
        for (const double v : s.wf.as_array()) {
            out.push_back(',');
            out += csv::sig17(v);
        }
        out += "," + std::to_string(s.label) + "\n";
    }
    csv::write_file(path.string(), out);
}

void merge_features_csv(const fs::path& path, StayTable& t) {
    const auto lines = csv::read_lines(path.string());
    if (lines.empty() || lines[0] != feature_csv_header())
        fail(Errc::invalid_config, "bad feature matrix header in " + path.string());
    std::map<std::string, FeatureVector> by_id;
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split(lines[i]);
        if (f.size() != 14) fail(Errc::invalid_config, "bad feature row");
        std::array<double, 12> a{};
        for (size_t k = 0; k < 12; ++k) {
            const auto v = csv::parse_double(f[k + 1]);
            if (!v) fail(Errc::invalid_config, "bad feature value");
            a[k] = *v;
        }
        by_id[f[0]] = FeatureVector::from_array(a);
    }
    for (auto& s : t.stays) {
        const auto it = by_id.find(s.stay_id);
        if (it != by_id.end()) {
            s.has_wf = true;
            s.wf = it->second;
        }
    }
}

SplitIds read_split(const fs::path& path) {
    json j;
    try {
        j = json::parse(csv::read_file(path.string()));
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_config, "bad split json: " + std::string(e.what()));
    }
    SplitIds ids;
    ids.train_stays = j.at("train").get<std::vector<std::string>>();
    ids.val_stays = j.at("val").get<std::vector<std::string>>();
    ids.test_stays = j.at("test").get<std::vector<std::string>>();
    return ids;
}

void write_split(const fs::path& path, const SplitIds& ids) {
    json j;
    j["train"] = ids.train_stays;
    j["val"] = ids.val_stays;
    j["test"] = ids.test_stays;
    csv::write_file(path.string(), j.dump(2) + "\n");
}

void write_standardizer(const fs::path& path, const Standardizer& st) {
    json j;
    j["clin_mu"] = st.clin_mu;
    j["clin_sd"] = st.clin_sd;
    j["wf_mu"] = std::vector<double>(st.wf_mu.begin(), st.wf_mu.end());
    j["wf_sd"] = std::vector<double>(st.wf_sd.begin(), st.wf_sd.end());
    csv::write_file(path.string(), j.dump(2) + "\n");
}

Standardizer read_standardizer(const fs::path& path) {
    json j;
    try {
        j = json::parse(csv::read_file(path.string()));
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_config, "bad standardizer json: " + std::string(e.what()));
    }
    Standardizer st;
    st.clin_mu = j.at("clin_mu").get<std::vector<double>>();
    st.clin_sd = j.at("clin_sd").get<std::vector<double>>();
    const auto wmu = j.at("wf_mu").get<std::vector<double>>();
    const auto wsd = j.at("wf_sd").get<std::vector<double>>();
    if (wmu.size() != 12 || wsd.size() != 12) fail(Errc::invalid_config, "bad wf scaler width");
    std::copy(wmu.begin(), wmu.end(), st.wf_mu.begin());
    std::copy(wsd.begin(), wsd.end(), st.wf_sd.begin());
    return st;
}

// Composite balanced-training rows: standardized sequence plus the 13-wide
// waveform block, one row per (possibly synthetic) stay.
void write_balanced(const fs::path& path, const LabeledMatrix& m, size_t seq_width) {
    std::string out = "stay_id,label";
    for (size_t i = 0; i < seq_width + WF_INPUT; ++i) out += ",x" + std::to_string(i);
    out += "\n";
    for (size_t i = 0; i < m.size(); ++i) {
        out += m.stay_ids[i] + "," + std::to_string(m.labels[i]);
        for (const double v : m.rows[i]) {
            out.push_back(',');
            out += csv::shortest(v);
        }
        out += "\n";
    }
    csv::write_file(path.string(), out);
}

struct BalancedSet {
    std::vector<Sample> samples;
    std::vector<std::string> ids;
};

BalancedSet read_balanced(const fs::path& path, size_t seq_width) {
    const auto lines = csv::read_lines(path.string());
    if (lines.empty()) fail(Errc::invalid_config, "empty balanced set");
    BalancedSet out;
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split(lines[i]);
        if (f.size() != 2 + seq_width + WF_INPUT)
            fail(Errc::invalid_config, "balanced row width mismatch");
        Sample s;
        s.label = f[1] == "1" ? 1 : 0;
        s.seq.reserve(seq_width);
        s.wf.reserve(WF_INPUT);
        for (size_t k = 0; k < seq_width + WF_INPUT; ++k) {
            const auto v = csv::parse_double(f[2 + k]);
            if (!v) fail(Errc::invalid_config, "bad balanced value");
            (k < seq_width ? s.seq : s.wf).push_back(*v);
        }
        out.samples.push_back(std::move(s));
        out.ids.push_back(f[0]);
    }
    return out;
}

ModelSpec spec_for(const PipelineConfig& cfg, FusionKind fusion, size_t channels) {
    ModelSpec spec;
    spec.kind = cfg.model;
    spec.fusion = fusion;
    spec.seq_len = SEQ_HOURS;
    spec.channels = channels;
    spec.hidden = cfg.hidden;
    spec.channel_hidden = cfg.channel_hidden;
    spec.wf_dim = WF_INPUT;
    spec.wf_dense = cfg.wf_dense;
    return spec;
}

std::string config_fingerprint_prep(const PipelineConfig& c) {
    return "w=" + std::to_string(c.prep.smooth_window) + ";taps=" + std::to_string(c.prep.fir_taps) +
           ";cut=" + csv::shortest(c.prep.fir_cutoff_hz);
}

std::string config_fingerprint_train(const PipelineConfig& c, FusionKind f) {
    return std::string(model_kind_name(c.model)) + ";" + fusion_kind_name(f) + ";H=" +
           std::to_string(c.hidden) + ";h=" + std::to_string(c.channel_hidden) + ";F=" +
           std::to_string(c.wf_dense) + ";lr=" + csv::shortest(c.train.lr) + ";ep=" +
           std::to_string(c.train.epochs) + ";b=" + std::to_string(c.train.batch) + ";l2=" +
           csv::shortest(c.train.l2) + ";pat=" + std::to_string(c.train.patience) + ";clip=" +
           csv::shortest(c.train.clip) + ";seed=" + std::to_string(c.seed);
}

std::map<std::string, std::map<std::string, MetricPair>> read_metrics(const fs::path& path) {
    json j;
    try {
        j = json::parse(csv::read_file(path.string()));
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_config, "bad metrics json: " + std::string(e.what()));
    }
    std::map<std::string, std::map<std::string, MetricPair>> m;
    for (const auto& [model, fusions] : j.items())
        for (const auto& [fusion, vals] : fusions.items())
            m[model][fusion] = MetricPair{vals.at("auc_roc").get<double>(), vals.at("auc_pr").get<double>()};
    return m;
}

std::string display_model_name(ModelKind k) {
    switch (k) {
    case ModelKind::logreg: return "Logistic Regression";
    case ModelKind::lstm: return "Standard LSTM";
    case ModelKind::channelwise: return "Channelwise LSTM";
    }
    return "?";
}

EvalReport report_from_metrics(const PipelineConfig& cfg, const fs::path& metrics_path) {
    const auto metrics = read_metrics(metrics_path);
    const std::string key = model_kind_name(cfg.model);
    const auto it = metrics.find(key);
    if (it == metrics.end()) fail(Errc::key_mismatch, "no metrics for model " + key);
    const auto wf = it->second.find("waveform");
    const auto none = it->second.find("none");
    if (wf == it->second.end() || none == it->second.end())
        fail(Errc::key_mismatch, "need both fusion variants evaluated for " + key);
    std::map<std::string, MetricPair> ours{{display_model_name(cfg.model), wf->second}};
    std::map<std::string, MetricPair> base{{display_model_name(cfg.model), none->second}};
    return report(ours, base);
}

} // namespace

void balance_feature_csv(const std::string& in_path, const std::string& out_path, uint64_t seed,
                         const BalanceConfig& cfg) {
    const auto lines = csv::read_lines(in_path);
    if (lines.empty() || lines[0] != feature_csv_header())
        fail(Errc::invalid_config, "bad feature matrix header in " + in_path);
    LabeledMatrix d;
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split(lines[i]);
        if (f.size() != 14) fail(Errc::invalid_config, "bad feature row");
        std::vector<double> row;
        for (size_t k = 1; k <= 12; ++k) {
            const auto v = csv::parse_double(f[k]);
            if (!v) fail(Errc::invalid_config, "bad feature value");
            row.push_back(*v);
        }
        d.rows.push_back(std::move(row));
        d.labels.push_back(f[13] == "1" ? 1 : 0);
        d.stay_ids.push_back(f[0]);
    }
    const LabeledMatrix balanced = balance_dataset(d, seed, cfg);
    std::string out = feature_csv_header() + "\n";
    for (size_t i = 0; i < balanced.size(); ++i) {
        out += balanced.stay_ids[i];
        for (const double v : balanced.rows[i]) {
            out.push_back(',');
            out += csv::sig17(v);
        }
        out += "," + std::to_string(balanced.labels[i]) + "\n";
    }
    csv::write_file(out_path, out);
}

// ---- stages -------------------------------------------------------------------

StageOutcome run_ingest_stage(const PipelineConfig& cfg) {
    validate_pipeline_config(cfg);
    const Paths P{cfg.out_dir};
    Sha256 h;
    h.update("ingest1;");
    h.update(sha256_file_hex(cfg.stays_file));
    if (!fs::exists(cfg.episodes_dir)) fail(Errc::root_not_found, "no such directory: " + cfg.episodes_dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(cfg.episodes_dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        h.update(f.filename().string());
        h.update(sha256_file_hex(f.string()));
    }
    h.update(";K=" + std::to_string(cfg.channels));
    for (const double v : cfg.clinical_defaults) h.update(csv::shortest(v) + ",");
    const std::string input_hash = h.hex_digest();

    if (stage_fresh(load_state(P), "ingest", input_hash, {P.stays_table()}))
        return {"ingest", true};

    const StayTable table = ingest(cfg);
    ensure_dir(P.stays_table().parent_path());
    write_stay_table(P.stays_table(), table);
    record_stage(P, "ingest", input_hash, {P.stays_table()});
    return {"ingest", false};
}

StageOutcome run_extract_stage(const PipelineConfig& cfg) {
    const Paths P{cfg.out_dir};
    Sha256 h;
    h.update("extract1;");
    h.update(require_artifact(P.stays_table(), "ingest"));
    h.update(hash_tree(cfg.tree_root));
    h.update(config_fingerprint_prep(cfg));
    const std::string input_hash = h.hex_digest();

    if (stage_fresh(load_state(P), "extract", input_hash, {P.features()}))
        return {"extract", true};

    StayTable table = read_stay_table(P.stays_table());
    if (table.channels != cfg.channels) fail(Errc::invalid_config, "channel count changed since ingest");
    (void)extract_waveform_features(table, cfg);
    ensure_dir(P.features().parent_path());
    write_features_csv(P.features(), table);
    record_stage(P, "extract", input_hash, {P.features()});
    return {"extract", false};
}

StageOutcome run_split_stage(const PipelineConfig& cfg) {
    const Paths P{cfg.out_dir};
    Sha256 h;
    h.update("split1;");
    h.update(require_artifact(P.stays_table(), "ingest"));
    h.update("f=" + csv::shortest(cfg.train_fraction) + "/" + csv::shortest(cfg.val_fraction) +
             ";seed=" + std::to_string(cfg.seed));
    const std::string input_hash = h.hex_digest();

    if (stage_fresh(load_state(P), "split", input_hash, {P.split_file()}))
        return {"split", true};

    const StayTable table = read_stay_table(P.stays_table());
    const SplitIds ids = split_by_patient(table, cfg.train_fraction, cfg.val_fraction, cfg.seed);
    ensure_dir(P.split_file().parent_path());
    write_split(P.split_file(), ids);
    record_stage(P, "split", input_hash, {P.split_file()});
    return {"split", false};
}

StageOutcome run_balance_stage(const PipelineConfig& cfg) {
    const Paths P{cfg.out_dir};
    (void)run_split_stage(cfg);
    Sha256 h;
    h.update("balance1;");
    h.update(require_artifact(P.stays_table(), "ingest"));
    h.update(require_artifact(P.features(), "extract"));
    h.update(sha256_file_hex(P.split_file().string()));
    h.update("thr=" + csv::shortest(cfg.balance.linkage_threshold) + ";knn=" +
             std::to_string(cfg.balance.knn) + ";seed=" + std::to_string(cfg.seed));
    const std::string input_hash = h.hex_digest();

    if (stage_fresh(load_state(P), "balance", input_hash, {P.balanced(), P.standardizer()}))
        return {"balance", true};

    StayTable table = read_stay_table(P.stays_table());
    merge_features_csv(P.features(), table);
    const SplitIds ids = read_split(P.split_file());

    const Standardizer st = fit_standardizer(table, ids.train_stays);
    const std::set<std::string> fit_in(ids.train_stays.begin(), ids.train_stays.end());

    LabeledMatrix d;
    for (const auto& stay : table.stays) {
        if (!fit_in.count(stay.stay_id)) continue;
        const Sample s = make_sample(stay, st);
        std::vector<double> row = s.seq;
        row.insert(row.end(), s.wf.begin(), s.wf.end());
        d.rows.push_back(std::move(row));
        d.labels.push_back(stay.label);
        d.stay_ids.push_back(stay.stay_id);
    }
    const LabeledMatrix balanced = balance_dataset(d, derive_seed(cfg.seed, 0xBA1), cfg.balance);

    // Leakage audit: nothing from the validation or test folds may appear in
    // the balanced training set.
    const std::set<std::string> held(ids.val_stays.begin(), ids.val_stays.end());
    const std::set<std::string> test(ids.test_stays.begin(), ids.test_stays.end());
    for (const auto& id : balanced.stay_ids)
        if (held.count(id) != 0 || test.count(id) != 0)
            fail(Errc::internal, "leakage: held-out stay " + id + " entered the balanced training set");
    json audit;
    audit["train"] = ids.train_stays;
    audit["val"] = ids.val_stays;
    audit["test"] = ids.test_stays;
    audit["balanced_train"] = balanced.stay_ids;
    csv::write_file(P.audit().string(), audit.dump(2) + "\n");

    ensure_dir(P.balanced().parent_path());
    write_balanced(P.balanced(), balanced, SEQ_HOURS * table.channels);
    write_standardizer(P.standardizer(), st);
    record_stage(P, "balance", input_hash, {P.balanced(), P.standardizer()});
    return {"balance", false};
}

std::vector<StageOutcome> run_train_stage(const PipelineConfig& cfg, std::optional<FusionKind> only) {
    const Paths P{cfg.out_dir};
    std::vector<StageOutcome> outcomes;

    (void)run_split_stage(cfg);
    const std::string balanced_hash = require_artifact(P.balanced(), "balance");
    const std::string std_hash = require_artifact(P.standardizer(), "balance");
    const std::string split_hash = sha256_file_hex(P.split_file().string());
    const std::string table_hash = require_artifact(P.stays_table(), "ingest");
    const std::string feat_hash = require_artifact(P.features(), "extract");

    StayTable table = read_stay_table(P.stays_table());
    merge_features_csv(P.features(), table);
    const SplitIds ids = read_split(P.split_file());
    const Standardizer st = read_standardizer(P.standardizer());
    const BalancedSet balanced = read_balanced(P.balanced(), SEQ_HOURS * table.channels);

    std::map<std::string, const Stay*> by_id;
    for (const auto& s : table.stays) by_id[s.stay_id] = &s;
    std::vector<Sample> val;
    for (const auto& id : ids.val_stays) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) fail(Errc::invalid_config, "split references unknown stay " + id);
        val.push_back(make_sample(*it->second, st));
    }

    for (const FusionKind fusion : {FusionKind::none, FusionKind::waveform}) {
        if (only && *only != fusion) continue;
        const std::string name = std::string("train_") + fusion_kind_name(fusion);
        Sha256 h;
        h.update(name + ";");
        h.update(balanced_hash);
        h.update(std_hash);
        h.update(split_hash);
        h.update(table_hash);
        h.update(feat_hash);
        h.update(config_fingerprint_train(cfg, fusion));
        const std::string input_hash = h.hex_digest();
        const fs::path ckpt_path = P.ckpt(cfg, fusion);
        const fs::path hist_path = P.history(cfg, fusion);
        if (stage_fresh(load_state(P), name, input_hash, {ckpt_path, hist_path})) {
            outcomes.push_back({name, true});
            continue;
        }

        ModelSpec spec = spec_for(cfg, fusion, table.channels);
        TrainConfig tc = cfg.train;
        // Same stream for both variants: the shared parameter prefix gets the
        // same initialization and the epochs the same batch order, so the
        // fusion-vs-clinical comparison isolates the waveform branch.
        tc.seed = derive_seed(cfg.seed, 0x70);
        const TrainResult res = train(spec, balanced.samples, val, tc);

        ensure_dir(ckpt_path.parent_path());
        save_checkpoint(ckpt_path.string(), Checkpoint{spec, st, res.theta});
        json hist;
        hist["best_epoch"] = res.best_epoch;
        hist["best_val_auc"] = res.best_val_auc;
        json rows = json::array();
        for (const auto& e : res.history)
            rows.push_back(json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_auc", e.val_auc}});
        hist["epochs"] = rows;
        csv::write_file(hist_path.string(), hist.dump(2) + "\n");
        record_stage(P, name, input_hash, {ckpt_path, hist_path});
        outcomes.push_back({name, false});
    }
    if (outcomes.empty()) fail(Errc::invalid_config, "no training variant selected");
    return outcomes;
}

StageOutcome run_eval_stage(const PipelineConfig& cfg) {
    const Paths P{cfg.out_dir};
    (void)run_split_stage(cfg);
    const std::string table_hash = require_artifact(P.stays_table(), "ingest");
    const std::string feat_hash = require_artifact(P.features(), "extract");
    const std::string split_hash = sha256_file_hex(P.split_file().string());

    std::vector<FusionKind> variants;
    Sha256 h;
    h.update("eval1;");
    h.update(table_hash);
    h.update(feat_hash);
    h.update(split_hash);
    for (const FusionKind f : {FusionKind::none, FusionKind::waveform}) {
        if (!fs::exists(P.ckpt(cfg, f))) continue;
        variants.push_back(f);
        h.update(sha256_file_hex(P.ckpt(cfg, f).string()));
    }
    if (variants.empty())
        fail(Errc::invalid_config, "no checkpoints under " + (P.out / "train").string() + "; run 'train' first");
    const std::string input_hash = h.hex_digest();

    std::vector<fs::path> outputs{P.metrics()};
    for (const FusionKind f : variants) outputs.push_back(P.scores(cfg, f));
    if (stage_fresh(load_state(P), "eval", input_hash, outputs)) return {"eval", true};

    StayTable table = read_stay_table(P.stays_table());
    merge_features_csv(P.features(), table);
    const SplitIds ids = read_split(P.split_file());
    std::map<std::string, const Stay*> by_id;
    for (const auto& s : table.stays) by_id[s.stay_id] = &s;

    ensure_dir(P.metrics().parent_path());
    json metrics;
    for (const FusionKind f : variants) {
        const Checkpoint ck = load_checkpoint(P.ckpt(cfg, f).string());
        ScoredSet scored;
        std::string csv_out = "stay_id,score,label\n";
        for (const auto& id : ids.test_stays) {
            const auto it = by_id.find(id);
            if (it == by_id.end()) fail(Errc::invalid_config, "split references unknown stay " + id);
            const Sample s = make_sample(*it->second, ck.standardizer);
            const double p = forward_prob(ck.spec, ck.theta, s);
            scored.scores.push_back(p);
            scored.labels.push_back(s.label);
            csv_out += id + "," + csv::sig17(p) + "," + std::to_string(s.label) + "\n";
        }
        csv::write_file(P.scores(cfg, f).string(), csv_out);
        const std::string model_key = model_kind_name(ck.spec.kind);
        metrics[model_key][fusion_kind_name(f)] =
            json{{"auc_roc", auc_roc(scored)}, {"auc_pr", auc_pr(scored)}};
    }
    csv::write_file(P.metrics().string(), metrics.dump(2) + "\n");
    record_stage(P, "eval", input_hash, outputs);
    return {"eval", false};
}

StageOutcome run_report_stage(const PipelineConfig& cfg) {
    const Paths P{cfg.out_dir};
    Sha256 h;
    h.update("report1;");
    h.update(require_artifact(P.metrics(), "eval"));
    h.update(model_kind_name(cfg.model));
    const std::string input_hash = h.hex_digest();
    if (stage_fresh(load_state(P), "report", input_hash, {P.report_txt(), P.report_csv()}))
        return {"report", true};

    const EvalReport r = report_from_metrics(cfg, P.metrics());
    ensure_dir(P.report_txt().parent_path());
    csv::write_file(P.report_txt().string(), render_text(r));
    csv::write_file(P.report_csv().string(), render_csv(r));
    record_stage(P, "report", input_hash, {P.report_txt(), P.report_csv()});
    return {"report", false};
}

EvalReport read_report(const PipelineConfig& cfg) {
    const Paths P{cfg.out_dir};
    return report_from_metrics(cfg, P.metrics());
}

BenchmarkResult run_benchmark(const PipelineConfig& cfg) {
    BenchmarkResult res;
    auto stage = [&res](const char* name, auto&& fn) {
        try {
            res.stages.push_back(fn());
        } catch (const VfError& e) {
            throw VfError(e.code(), std::string("stage ") + name + ": " + e.what());
        }
    };
    stage("ingest", [&] { return run_ingest_stage(cfg); });
    stage("extract", [&] { return run_extract_stage(cfg); });
    stage("split", [&] { return run_split_stage(cfg); });
    stage("balance", [&] { return run_balance_stage(cfg); });
    try {
        for (const auto& o : run_train_stage(cfg)) res.stages.push_back(o);
    } catch (const VfError& e) {
        throw VfError(e.code(), std::string("stage train: ") + e.what());
    }
    stage("eval", [&] { return run_eval_stage(cfg); });
    stage("report", [&] { return run_report_stage(cfg); });

    const Paths P{cfg.out_dir};
    const auto metrics = read_metrics(P.metrics());
    const std::string key = model_kind_name(cfg.model);
    res.fusion_metrics[key] = metrics.at(key).at("waveform");
    res.clinical_metrics[key] = metrics.at(key).at("none");
    res.report = read_report(cfg);
    return res;
}

} // namespace vf
