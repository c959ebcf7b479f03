#include "eegrag/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

using nlohmann::json;

namespace eegrag {

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na <= 0.0 || nb <= 0.0) {
        throw std::runtime_error("cosine_similarity: zero-norm input");
    }
    return dot(a, b) / (na * nb);
}

double mean(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("mean of empty sample");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_std(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    const double mu = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Average ranks of |values|, ties sharing the mean of their rank range.
// Doubled ranks are integers, which the exact-enumeration DP relies on.
std::vector<double> abs_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::fabs(values[a]) < std::fabs(values[b]);
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n &&
               std::fabs(values[order[j + 1]]) == std::fabs(values[order[i]])) {
            ++j;
        }
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0; // ranks are 1-based
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double tie_correction(const std::vector<double>& ranks) {
    // sum of (t^3 - t) over tie groups, identified by shared rank value
    std::vector<double> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    double corr = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        corr += t * t * t - t;
        i = j + 1;
    }
    return corr;
}

// P(W <= w_obs) under the sign-flip null, via subset-sum counting over the
// doubled (integer) ranks. Equivalent to enumerating all 2^n assignments.
double exact_p_leq(const std::vector<double>& nonzero_ranks, double w_obs) {
    std::vector<long long> doubled;
    long long total = 0;
    doubled.reserve(nonzero_ranks.size());
    for (double r : nonzero_ranks) {
        const long long d = std::llround(2.0 * r);
        doubled.push_back(d);
        total += d;
    }
    std::vector<std::uint64_t> ways(static_cast<std::size_t>(total) + 1, 0);
    ways[0] = 1;
    for (long long d : doubled) {
        for (long long s = total; s >= d; --s) {
            ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - d)];
        }
    }
    const long long w2 = std::llround(2.0 * w_obs);
    std::uint64_t count = 0;
    for (long long s = 0; s <= std::min(w2, total); ++s) {
        count += ways[static_cast<std::size_t>(s)];
    }
    return static_cast<double>(count) /
           std::pow(2.0, static_cast<double>(nonzero_ranks.size()));
}

} // namespace

TestResult wilcoxon_one_sided(const std::vector<double>& diffs, ZeroPolicy zeros,
                              std::size_t exact_threshold) {
    if (diffs.empty()) throw std::invalid_argument("wilcoxon: empty sample");
    for (double d : diffs) {
        if (!std::isfinite(d)) throw std::invalid_argument("wilcoxon: non-finite difference");
    }

    std::vector<double> kept;
    std::size_t n_zero = 0;
    for (double d : diffs) {
        if (d == 0.0) {
            ++n_zero;
            if (zeros == ZeroPolicy::pratt) kept.push_back(d);
        } else {
            kept.push_back(d);
        }
    }
    const std::size_t n_eff = kept.size() - (zeros == ZeroPolicy::pratt ? n_zero : 0);
    if (n_eff == 0) throw std::runtime_error("degenerate sample: all differences are zero");

    const std::vector<double> ranks = abs_ranks(kept);
    double w_minus = 0.0;
    std::vector<double> nonzero_ranks;
    nonzero_ranks.reserve(n_eff);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (kept[i] == 0.0) continue; // pratt: zeros hold ranks but never enter W
        nonzero_ranks.push_back(ranks[i]);
        if (kept[i] < 0.0) w_minus += ranks[i];
    }

    TestResult result;
    result.statistic = w_minus;
    result.n_effective = n_eff;

    if (n_eff <= exact_threshold) {
        result.method = WilcoxonMethod::exact;
        result.p_value = exact_p_leq(nonzero_ranks, w_minus);
    } else {
        result.method = WilcoxonMethod::normal_approx;
        const auto n = static_cast<double>(kept.size()); // includes zeros under pratt
        const auto n0 = static_cast<double>(zeros == ZeroPolicy::pratt ? n_zero : 0);
        const double mu = (n * (n + 1.0) - n0 * (n0 + 1.0)) / 4.0;
        double var = (n * (n + 1.0) * (2.0 * n + 1.0) - n0 * (n0 + 1.0) * (2.0 * n0 + 1.0)) / 24.0;
        var -= tie_correction(nonzero_ranks) / 48.0;
        if (var <= 0.0) {
            result.p_value = w_minus <= mu ? 1.0 : 0.0;
        } else {
            // one-sided "greater": small W- is the evidence; continuity-corrected
            const double z = (w_minus - mu + 0.5) / std::sqrt(var);
            result.p_value = normal_cdf(z);
        }
    }
    result.p_value = std::clamp(result.p_value, 0.0, 1.0);
    return result;
}

std::vector<double> bh_fdr(const std::vector<double>& p_values) {
    const std::size_t m = p_values.size();
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("bh_fdr: p-value outside [0, 1]");
        }
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

    std::vector<double> adjusted(m, 0.0);
    double running = 1.0;
    for (std::size_t k = m; k-- > 0;) {
        const double scaled =
                p_values[order[k]] * static_cast<double>(m) / static_cast<double>(k + 1);
        running = std::min(running, scaled);
        adjusted[order[k]] = std::min(running, 1.0);
    }
    return adjusted;
}

namespace {

Analysis make_analysis(const std::string& label, std::vector<double> real,
                       std::vector<double> baseline, std::size_t exact_threshold) {
    Analysis a;
    a.label = label;
    a.real = {mean(real), sample_std(real)};
    a.baseline = {mean(baseline), sample_std(baseline)};
    a.delta = a.real.mu - a.baseline.mu;
    if (a.baseline.mu != 0.0) a.delta_pct = 100.0 * a.delta / a.baseline.mu;

    std::vector<double> diffs(real.size());
    for (std::size_t i = 0; i < real.size(); ++i) diffs[i] = real[i] - baseline[i];
    const bool all_zero = std::all_of(diffs.begin(), diffs.end(), [](double d) { return d == 0.0; });
    if (all_zero) {
        a.test.degenerate = true; // no evidence either way
        a.test.p_value = 1.0;
        a.test.n_effective = 0;
    } else {
        a.test = wilcoxon_one_sided(diffs, ZeroPolicy::drop, exact_threshold);
    }
    a.real_scores = std::move(real);
    a.baseline_scores = std::move(baseline);
    return a;
}

} // namespace

Analysis subject_analysis(const std::string& subject_id,
                          const std::map<std::string, double>& real_scores,
                          const std::map<std::string, double>& baseline_scores) {
    if (real_scores.empty()) throw std::invalid_argument("subject_analysis: no scores");
    if (real_scores.size() != baseline_scores.size()) {
        throw std::runtime_error("subject_analysis: unpaired samples (" +
                                 std::to_string(real_scores.size()) + " real vs " +
                                 std::to_string(baseline_scores.size()) + " baseline)");
    }
    std::vector<double> real;
    std::vector<double> baseline;
    real.reserve(real_scores.size());
    baseline.reserve(real_scores.size());
    for (const auto& [id, score] : real_scores) {
        auto it = baseline_scores.find(id);
        if (it == baseline_scores.end()) {
            throw std::runtime_error("subject_analysis: sentence '" + id + "' has no baseline score");
        }
        real.push_back(score);
        baseline.push_back(it->second);
    }
    return make_analysis(subject_id, std::move(real), std::move(baseline), 25);
}

Analysis dataset_analysis(const std::vector<PairedSample>& per_subject) {
    if (per_subject.size() < 2) {
        throw std::invalid_argument("dataset_analysis: need at least 2 subjects");
    }
    std::vector<double> real;
    std::vector<double> baseline;
    for (const auto& s : per_subject) {
        real.push_back(s.real_score);
        baseline.push_back(s.baseline_score);
    }
    return make_analysis("ALL", std::move(real), std::move(baseline), 25);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of empty sample");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile fraction outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = h - std::floor(h);
    return values[lo] + frac * (values[hi] - values[lo]);
}

BoxStats box_stats(const std::vector<double>& values) {
    BoxStats b;
    b.q1 = quantile(values, 0.25);
    b.median = quantile(values, 0.5);
    b.q3 = quantile(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    b.whisker_low = std::max(*mn, b.q1 - 1.5 * iqr);
    b.whisker_high = std::min(*mx, b.q3 + 1.5 * iqr);
    return b;
}

namespace {

ReportRow row_from_analysis(const Analysis& a, double p_fdr) {
    ReportRow row;
    row.subject_id = a.label;
    row.real_mu = a.real.mu;
    row.real_sigma = a.real.sigma;
    row.rand_mu = a.baseline.mu;
    row.rand_sigma = a.baseline.sigma;
    row.delta = a.delta;
    row.delta_pct = a.delta_pct;
    row.p_raw = a.test.p_value;
    row.p_fdr = p_fdr;
    row.significant = row.p_raw < 0.05;
    row.highly_significant = row.p_raw < 0.01;
    row.borderline = !row.significant && row.p_raw < 0.10;
    row.degenerate = a.test.degenerate;
    return row;
}

} // namespace

EvalReport build_report(const std::vector<Analysis>& subjects,
                        const std::optional<Analysis>& dataset) {
    EvalReport report;
    std::vector<double> raw;
    raw.reserve(subjects.size());
    for (const auto& a : subjects) raw.push_back(a.test.p_value);
    const std::vector<double> adjusted = raw.empty() ? raw : bh_fdr(raw);

    for (std::size_t i = 0; i < subjects.size(); ++i) {
        report.per_subject.push_back(row_from_analysis(subjects[i], adjusted[i]));
        report.real_boxes[subjects[i].label] = box_stats(subjects[i].real_scores);
        report.baseline_boxes[subjects[i].label] = box_stats(subjects[i].baseline_scores);
    }
    if (dataset) {
        // single test at dataset level, so FDR leaves it unchanged
        report.whole_dataset = row_from_analysis(*dataset, dataset->test.p_value);
        report.dataset_real_box = box_stats(dataset->real_scores);
        report.dataset_baseline_box = box_stats(dataset->baseline_scores);
    }
    return report;
}

namespace {

json box_to_json(const BoxStats& b) {
    return {{"q1", b.q1},
            {"median", b.median},
            {"q3", b.q3},
            {"whisker_low", b.whisker_low},
            {"whisker_high", b.whisker_high}};
}

BoxStats box_from_json(const json& j) {
    BoxStats b;
    b.q1 = j.at("q1").get<double>();
    b.median = j.at("median").get<double>();
    b.q3 = j.at("q3").get<double>();
    b.whisker_low = j.at("whisker_low").get<double>();
    b.whisker_high = j.at("whisker_high").get<double>();
    return b;
}

json row_to_json(const ReportRow& row) {
    json j = {{"subject_id", row.subject_id},
              {"real_mu", row.real_mu},
              {"real_sigma", row.real_sigma},
              {"rand_mu", row.rand_mu},
              {"rand_sigma", row.rand_sigma},
              {"delta", row.delta},
              {"p_raw", row.p_raw},
              {"p_fdr", row.p_fdr},
              {"significant", row.significant},
              {"highly_significant", row.highly_significant},
              {"borderline", row.borderline},
              {"degenerate", row.degenerate}};
    j["delta_pct"] = row.delta_pct ? json(*row.delta_pct) : json(nullptr);
    return j;
}

ReportRow row_from_json(const json& j) {
    ReportRow row;
    row.subject_id = j.at("subject_id").get<std::string>();
    row.real_mu = j.at("real_mu").get<double>();
    row.real_sigma = j.at("real_sigma").get<double>();
    row.rand_mu = j.at("rand_mu").get<double>();
    row.rand_sigma = j.at("rand_sigma").get<double>();
    row.delta = j.at("delta").get<double>();
    if (!j.at("delta_pct").is_null()) row.delta_pct = j.at("delta_pct").get<double>();
    row.p_raw = j.at("p_raw").get<double>();
    row.p_fdr = j.at("p_fdr").get<double>();
    row.significant = j.at("significant").get<bool>();
    row.highly_significant = j.at("highly_significant").get<bool>();
    row.borderline = j.at("borderline").get<bool>();
    row.degenerate = j.at("degenerate").get<bool>();
    return row;
}

std::string format_p(double p) {
    char buf[32];
    if (p >= 1e-3) {
        std::snprintf(buf, sizeof(buf), "%.4f", p);
    } else {
        std::snprintf(buf, sizeof(buf), "%.2e", p);
    }
    return buf;
}

std::string format_row(const ReportRow& row) {
    char buf[256];
    const std::string dpct =
            row.delta_pct ? [&] {
                char b[32];
                std::snprintf(b, sizeof(b), "%.2f", *row.delta_pct);
                return std::string(b);
            }()
                          : std::string("n/a");
    const char* mark = row.highly_significant ? "**" : (row.significant ? "*" : (row.borderline ? "~" : ""));
    std::snprintf(buf, sizeof(buf), "%-8s %6.3f±%.3f   %6.3f±%.3f   %+7.3f  %8s  %9s  %9s %s",
                  row.subject_id.c_str(), row.real_mu, row.real_sigma, row.rand_mu,
                  row.rand_sigma, row.delta, dpct.c_str(), format_p(row.p_raw).c_str(),
                  format_p(row.p_fdr).c_str(), mark);
    return buf;
}

} // namespace

json report_to_json(const EvalReport& report) {
    json per_subject = json::array();
    for (const auto& row : report.per_subject) per_subject.push_back(row_to_json(row));

    json real_boxes = json::object();
    json baseline_boxes = json::object();
    for (const auto& [id, b] : report.real_boxes) real_boxes[id] = box_to_json(b);
    for (const auto& [id, b] : report.baseline_boxes) baseline_boxes[id] = box_to_json(b);

    json j = {{"kind", "eval-report"},
              {"per_subject", per_subject},
              {"real_boxes", real_boxes},
              {"baseline_boxes", baseline_boxes}};
    j["whole_dataset"] = report.whole_dataset ? row_to_json(*report.whole_dataset) : json(nullptr);
    if (report.whole_dataset) {
        j["dataset_real_box"] = box_to_json(report.dataset_real_box);
        j["dataset_baseline_box"] = box_to_json(report.dataset_baseline_box);
    }
    return j;
}

EvalReport report_from_json(const json& j) {
    if (j.value("kind", "") != "eval-report") {
        throw std::runtime_error("not an eval-report JSON document");
    }
    EvalReport report;
    for (const auto& row : j.at("per_subject")) report.per_subject.push_back(row_from_json(row));
    for (const auto& [id, b] : j.at("real_boxes").items()) {
        report.real_boxes[id] = box_from_json(b);
    }
    for (const auto& [id, b] : j.at("baseline_boxes").items()) {
        report.baseline_boxes[id] = box_from_json(b);
    }
    if (!j.at("whole_dataset").is_null()) {
        report.whole_dataset = row_from_json(j.at("whole_dataset"));
        report.dataset_real_box = box_from_json(j.at("dataset_real_box"));
        report.dataset_baseline_box = box_from_json(j.at("dataset_baseline_box"));
    }
    return report;
}

std::string report_table_text(const EvalReport& report) {
    std::ostringstream out;
    out << "Subj.    Real (μ±σ)     Random (μ±σ)   Δ        Δ%        p_raw      p_fdr\n";
    out << std::string(86, '-') << "\n";
    for (const auto& row : report.per_subject) out << format_row(row) << "\n";
    if (report.whole_dataset) {
        out << std::string(86, '-') << "\n";
        out << format_row(*report.whole_dataset) << "\n";
    }
    return out.str();
}

std::string report_boxplot_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "label,condition,q1,median,q3,whisker_low,whisker_high\n";
    const auto emit = [&](const std::string& label, const char* cond, const BoxStats& b) {
        char buf[192];
        std::snprintf(buf, sizeof(buf), "%s,%s,%.9g,%.9g,%.9g,%.9g,%.9g\n", label.c_str(), cond,
                      b.q1, b.median, b.q3, b.whisker_low, b.whisker_high);
        out << buf;
    };
    for (const auto& [id, b] : report.real_boxes) emit(id, "real", b);
    for (const auto& [id, b] : report.baseline_boxes) emit(id, "baseline", b);
    if (report.whole_dataset) {
        emit("ALL", "real", report.dataset_real_box);
        emit("ALL", "baseline", report.dataset_baseline_box);
    }
    return out.str();
}

} // namespace eegrag
