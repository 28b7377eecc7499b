#pragma once

#include <map>
#include <string>
#include <vector>

namespace vf {

struct ScoredSet {
    std::vector<double> scores;
    std::vector<int> labels; // 1 = positive (deceased)
};

// Rank statistic P(score+ > score-) + 0.5 P(tie), computed with midranks.
double auc_roc(const ScoredSet& s); // OneClassOnly

// Average precision: stepwise integral of precision over recall, evaluated
// at distinct score thresholds (no interpolation).
double auc_pr(const ScoredSet& s); // NoPositives

struct MetricPair {
    double auc_roc = 0.0;
    double auc_pr = 0.0;
};

struct ReportRow {
    std::string model;
    MetricPair ours;
    MetricPair baseline;
    double pct_roc = 0.0; // (ours - baseline) / baseline * 100
    double pct_pr = 0.0;
};

struct EvalReport {
    std::vector<ReportRow> rows; // sorted by model key
    std::string baseline_name = "Clinical-only";
    std::string ours_name = "Ours (waveform fusion)";
};

// Percent-difference report; model key sets must match exactly.
EvalReport report(const std::map<std::string, MetricPair>& ours,
                  const std::map<std::string, MetricPair>& baseline); // KeyMismatch

std::string format_pct(double pct); // "+5.15%" style, two decimals

// Aligned text table (Source / Model / AUC-ROC / AUC-PR blocks per model).
std::string render_text(const EvalReport& r);

// "model,auc_roc,auc_pr,pct_roc,pct_pr" rows.
std::string render_csv(const EvalReport& r);

} // namespace vf
