#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegrag/embedding.hpp"

namespace eegrag {

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

double mean(const std::vector<double>& values);
// Sample standard deviation (n-1 denominator); 0 for fewer than 2 values.
double sample_std(const std::vector<double>& values);

enum class ZeroPolicy { drop, pratt };
enum class WilcoxonMethod { exact, normal_approx };

struct TestResult {
    double statistic = 0.0; // W-: rank sum of negative differences
    double p_value = 1.0;
    std::size_t n_effective = 0;
    WilcoxonMethod method = WilcoxonMethod::exact;
    bool degenerate = false; // all differences were zero
};

// One-sided paired Wilcoxon signed-rank test, alternative "differences > 0".
// Zeros are dropped by default (Pratt handling behind the flag); tied
// absolute differences receive average ranks. Exact p-values come from the
// full sign-assignment null distribution when n_effective <= exact_threshold,
// otherwise from a normal approximation with tie and continuity correction.
TestResult wilcoxon_one_sided(const std::vector<double>& diffs,
                              ZeroPolicy zeros = ZeroPolicy::drop,
                              std::size_t exact_threshold = 25);

// Benjamini-Hochberg step-up adjustment; output order matches input order.
std::vector<double> bh_fdr(const std::vector<double>& p_values);

struct ConditionSummary {
    double mu = 0.0;
    double sigma = 0.0;
};

struct PairedSample {
    std::string label;
    double real_score = 0.0;
    double baseline_score = 0.0; // seed-averaged
};

struct Analysis {
    std::string label;
    ConditionSummary real;
    ConditionSummary baseline;
    double delta = 0.0;
    std::optional<double> delta_pct; // empty when baseline mean is zero
    TestResult test;
    std::vector<double> real_scores;     // kept for boxplots
    std::vector<double> baseline_scores; // kept for boxplots
};

// Per-subject comparison of per-sentence scores, paired by sentence id.
// A fully tied sample is reported as "no evidence" (p = 1) instead of an
// error so a degenerate subject cannot abort a whole report.
Analysis subject_analysis(const std::string& subject_id,
                          const std::map<std::string, double>& real_scores,
                          const std::map<std::string, double>& baseline_scores);

// Whole-dataset comparison: one paired observation per subject (real mean
// vs baseline mean), exact Wilcoxon. Needs at least two subjects.
Analysis dataset_analysis(const std::vector<PairedSample>& per_subject);

struct BoxStats {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double whisker_low = 0.0;  // max(Q1 - 1.5 IQR, data min)
    double whisker_high = 0.0; // min(Q3 + 1.5 IQR, data max)
};

// Linear-interpolation quantile on sorted-copy semantics (the convention
// matching numpy's default).
double quantile(std::vector<double> values, double q);
BoxStats box_stats(const std::vector<double>& values);

struct ReportRow {
    std::string subject_id;
    double real_mu = 0.0;
    double real_sigma = 0.0;
    double rand_mu = 0.0;
    double rand_sigma = 0.0;
    double delta = 0.0;
    std::optional<double> delta_pct;
    double p_raw = 1.0;
    double p_fdr = 1.0;
    bool significant = false;        // p_raw < 0.05
    bool highly_significant = false; // p_raw < 0.01
    bool borderline = false;         // 0.05 <= p_raw < 0.10
    bool degenerate = false;
};

struct EvalReport {
    std::vector<ReportRow> per_subject;
    std::optional<ReportRow> whole_dataset; // absent with fewer than 2 subjects
    std::map<std::string, BoxStats> real_boxes;
    std::map<std::string, BoxStats> baseline_boxes;
    BoxStats dataset_real_box;     // over per-subject real means
    BoxStats dataset_baseline_box; // over per-subject baseline means
};

// Applies BH-FDR across the subject-level raw p-values and assembles the
// full report. dataset may be empty (single-subject runs).
EvalReport build_report(const std::vector<Analysis>& subjects,
                        const std::optional<Analysis>& dataset);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
// Text table in the column order Subj., Real, Random, Delta, Delta%, p.
std::string report_table_text(const EvalReport& report);
std::string report_boxplot_csv(const EvalReport& report);

} // namespace eegrag
