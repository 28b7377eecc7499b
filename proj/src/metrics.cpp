#include "vf/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "vf/csv.hpp"
#include "vf/error.hpp"

namespace vf {

namespace {

void check_sizes(const ScoredSet& s) {
    if (s.scores.size() != s.labels.size())
        fail(Errc::dimension_mismatch, "scores and labels differ in length");
}

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

} // namespace

double auc_roc(const ScoredSet& s) {
    check_sizes(s);
    const size_t n = s.scores.size();
    size_t n_pos = 0;
    for (const int l : s.labels) n_pos += l != 0;
    const size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) fail(Errc::one_class_only, "AUC-ROC needs both classes");

    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return s.scores[a] < s.scores[b]; });

    // Midranks over tie blocks.
    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && s.scores[idx[j]] == s.scores[idx[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j); // ranks are 1-based
        for (size_t k = i; k < j; ++k)
            if (s.labels[idx[k]] != 0) pos_rank_sum += midrank;
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auc_pr(const ScoredSet& s) {
    check_sizes(s);
    const size_t n = s.scores.size();
    size_t n_pos = 0;
    for (const int l : s.labels) n_pos += l != 0;
    if (n_pos == 0) fail(Errc::no_positives, "AUC-PR needs at least one positive");

    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return s.scores[a] > s.scores[b]; });

    double ap = 0.0;
    double prev_recall = 0.0;
    size_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && s.scores[idx[j]] == s.scores[idx[i]]) ++j;
        for (size_t k = i; k < j; ++k) {
            if (s.labels[idx[k]] != 0)
                ++tp;
            else
                ++fp;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

EvalReport report(const std::map<std::string, MetricPair>& ours,
                  const std::map<std::string, MetricPair>& baseline) {
    if (ours.size() != baseline.size()) fail(Errc::key_mismatch, "model key sets differ");
    EvalReport r;
    for (const auto& [model, m] : ours) {
        const auto it = baseline.find(model);
        if (it == baseline.end()) fail(Errc::key_mismatch, "no baseline metrics for model '" + model + "'");
        ReportRow row;
        row.model = model;
        row.ours = m;
        row.baseline = it->second;
        row.pct_roc = (m.auc_roc - it->second.auc_roc) / it->second.auc_roc * 100.0;
        row.pct_pr = (m.auc_pr - it->second.auc_pr) / it->second.auc_pr * 100.0;
        r.rows.push_back(row);
    }
    return r;
}

std::string format_pct(double pct) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.2f%%", pct);
    return buf;
}

std::string render_text(const EvalReport& r) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Source", "Model", "AUC-ROC", "AUC-PR"});
    for (const auto& row : r.rows) {
        rows.push_back({r.ours_name, row.model, fmt3(row.ours.auc_roc), fmt3(row.ours.auc_pr)});
        rows.push_back({r.baseline_name, row.model, fmt3(row.baseline.auc_roc), fmt3(row.baseline.auc_pr)});
        rows.push_back({"Percent Difference", row.model, format_pct(row.pct_roc), format_pct(row.pct_pr)});
    }
    std::array<size_t, 4> width = {0, 0, 0, 0};
    for (const auto& row : rows)
        for (size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], row[c].size());
    std::string out;
    for (size_t i = 0; i < rows.size(); ++i) {
        for (size_t c = 0; c < 4; ++c) {
            out += rows[i][c];
            if (c + 1 < 4) out += std::string(width[c] - rows[i][c].size() + 2, ' ');
        }
        out += "\n";
        if (i == 0 || (i % 3 == 0 && i + 1 < rows.size())) {
            const size_t total = width[0] + width[1] + width[2] + width[3] + 6;
            out += std::string(total, '-') + "\n";
        }
    }
    return out;
}

std::string render_csv(const EvalReport& r) {
    std::string out = "model,auc_roc,auc_pr,pct_roc,pct_pr\n";
    for (const auto& row : r.rows) {
        out += row.model + "," + csv::sig17(row.ours.auc_roc) + "," + csv::sig17(row.ours.auc_pr) + "," +
               csv::sig17(row.pct_roc) + "," + csv::sig17(row.pct_pr) + "\n";
    }
    return out;
}

} // namespace vf
