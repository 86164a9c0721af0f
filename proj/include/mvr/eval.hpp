#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvr/common.hpp"

// Object-wise and point-wise ROC-AUC. The rank statistic uses midranks for
// ties (Mann-Whitney U normalized by #pos * #neg); a trapezoid integration
// of the explicit ROC curve is kept alongside as a cross-check.

namespace mvr {

// AUROC needs both classes; with only one the value is undefined and
// reported as such, never coerced to a number.
struct AurocResult {
    double value = 0.0;
    bool defined = false;
};

AurocResult auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Same statistic via explicit ROC-curve trapezoid integration. Agrees with
// the rank form within 1e-12 on tie-free inputs (and exactly on ties too,
// since both use the midrank/trapezoid convention).
AurocResult auroc_trapezoid(const std::vector<double>& scores, const std::vector<int>& labels);

// One test cloud's scored outcome.
struct CloudEvalResult {
    std::string name;
    std::string category;         // shape family
    double object_score = 0.0;    // xi
    int object_label = 0;         // 1 = anomalous
    std::vector<double> point_scores;
    std::vector<std::uint8_t> point_labels;
};

struct CategoryMetrics {
    AurocResult o_roc;
    AurocResult p_roc;
    std::size_t n_objects = 0;
    std::size_t n_points = 0;
};

struct EvalReport {
    AurocResult o_roc;          // one score per object
    AurocResult p_roc;          // all points of all clouds pooled
    std::size_t n_objects = 0;
    std::size_t n_points = 0;
    std::map<std::string, CategoryMetrics> per_category;
    std::string config_hash;
};

// O-ROC over (object_score, object_label) pairs; P-ROC over the pooled
// points of every cloud; the same two metrics per category.
EvalReport evaluate(const std::vector<CloudEvalResult>& clouds, const std::string& config_hash);

void write_report_json(const std::string& path, const EvalReport& report);

// One ablation sweep row: the axis value plus the headline metrics.
struct AblationRow {
    std::string axis;
    double value = 0.0;
    AurocResult o_roc;
    AurocResult p_roc;
    double wall_seconds = 0.0;
};

// CSV `axis,value,o_roc,p_roc,wall_seconds`; undefined metrics are written
// as empty fields.
void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

}  // namespace mvr
