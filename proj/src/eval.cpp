#include "mvr/eval.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace mvr {

using nlohmann::json;

AurocResult auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw ConfigError("auroc: scores and labels differ in length");
    }
    std::size_t n_pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw ConfigError("auroc: labels must be 0 or 1");
        n_pos += static_cast<std::size_t>(l);
    }
    const std::size_t n = scores.size();
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return {};  // single class: undefined

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks: every member of a tie run gets the run's average rank.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) rank_sum_pos += midrank;
        }
        i = j + 1;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                                        static_cast<double>(n_pos + 1);
    return {u / (static_cast<double>(n_pos) * static_cast<double>(n_neg)), true};
}

AurocResult auroc_trapezoid(const std::vector<double>& scores,
                            const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw ConfigError("auroc: scores and labels differ in length");
    }
    std::size_t n_pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw ConfigError("auroc: labels must be 0 or 1");
        n_pos += static_cast<std::size_t>(l);
    }
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) return {};

    // Sweep thresholds from high to low; ties move the operating point
    // diagonally, which the trapezoid rule scores exactly like midranks.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double area = 0.0;
    double tp = 0.0, fp = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        double d_tp = 0.0, d_fp = 0.0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (labels[order[j]] == 1) {
                d_tp += 1.0;
            } else {
                d_fp += 1.0;
            }
            ++j;
        }
        area += d_fp * (tp + 0.5 * d_tp);
        tp += d_tp;
        fp += d_fp;
        i = j;
    }
    return {area / (static_cast<double>(n_pos) * static_cast<double>(n_neg)), true};
}

namespace {

CategoryMetrics metrics_for(const std::vector<const CloudEvalResult*>& clouds) {
    CategoryMetrics m;
    std::vector<double> obj_scores, pt_scores;
    std::vector<int> obj_labels, pt_labels;
    for (const CloudEvalResult* cloud : clouds) {
        if (cloud->point_scores.size() != cloud->point_labels.size()) {
            throw ConfigError("evaluate: point scores and labels differ in length for '" +
                              cloud->name + "'");
        }
        obj_scores.push_back(cloud->object_score);
        obj_labels.push_back(cloud->object_label);
        for (std::size_t i = 0; i < cloud->point_scores.size(); ++i) {
            pt_scores.push_back(cloud->point_scores[i]);
            pt_labels.push_back(cloud->point_labels[i] != 0 ? 1 : 0);
        }
    }
    m.n_objects = obj_scores.size();
    m.n_points = pt_scores.size();
    m.o_roc = auroc(obj_scores, obj_labels);
    m.p_roc = auroc(pt_scores, pt_labels);
    return m;
}

json auroc_to_json(const AurocResult& r) {
    if (!r.defined) return nullptr;
    return r.value;
}

}  // namespace

EvalReport evaluate(const std::vector<CloudEvalResult>& clouds,
                    const std::string& config_hash) {
    if (clouds.empty()) throw ConfigError("evaluate: no test clouds");
    EvalReport report;
    report.config_hash = config_hash;

    std::vector<const CloudEvalResult*> all;
    std::map<std::string, std::vector<const CloudEvalResult*>> by_category;
    for (const CloudEvalResult& c : clouds) {
        all.push_back(&c);
        by_category[c.category].push_back(&c);
    }
    const CategoryMetrics overall = metrics_for(all);
    report.o_roc = overall.o_roc;
    report.p_roc = overall.p_roc;
    report.n_objects = overall.n_objects;
    report.n_points = overall.n_points;
    for (const auto& [category, members] : by_category) {
        report.per_category[category] = metrics_for(members);
    }
    return report;
}

void write_report_json(const std::string& path, const EvalReport& report) {
    json per_category = json::object();
    for (const auto& [category, m] : report.per_category) {
        per_category[category] = {{"o_roc", auroc_to_json(m.o_roc)},
                                  {"p_roc", auroc_to_json(m.p_roc)},
                                  {"n_objects", m.n_objects},
                                  {"n_points", m.n_points}};
    }
    const json doc{{"o_roc", auroc_to_json(report.o_roc)},
                   {"p_roc", auroc_to_json(report.p_roc)},
                   {"n_objects", report.n_objects},
                   {"n_points", report.n_points},
                   {"per_category", per_category},
                   {"config_hash", report.config_hash}};
    atomic_write_file(path, doc.dump(2) + "\n");
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out.precision(17);
    out << "axis,value,o_roc,p_roc,wall_seconds\n";
    for (const AblationRow& row : rows) {
        out << row.axis << ',' << row.value << ',';
        if (row.o_roc.defined) out << row.o_roc.value;
        out << ',';
        if (row.p_roc.defined) out << row.p_roc.value;
        out << ',' << row.wall_seconds << '\n';
    }
    atomic_write_file(path, out.str());
}

}  // namespace mvr
