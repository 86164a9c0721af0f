#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "mvr/eval.hpp"
#include "test_util.hpp"

using namespace mvr;

namespace {

// Independent O(n^2) oracle: mean over pos-neg pairs, ties worth 0.5.
double pairwise_auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t p = 0; p < scores.size(); ++p) {
        if (labels[p] != 1) continue;
        for (std::size_t q = 0; q < scores.size(); ++q) {
            if (labels[q] != 0) continue;
            ++pairs;
            if (scores[p] > scores[q]) {
                wins += 1.0;
            } else if (scores[p] == scores[q]) {
                wins += 0.5;
            }
        }
    }
    return wins / static_cast<double>(pairs);
}

std::pair<std::vector<double>, std::vector<int>> random_instance(RandomStream& rng,
                                                                 std::size_t size,
                                                                 bool with_ties) {
    std::vector<double> scores(size);
    std::vector<int> labels(size);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < size; ++i) {
        scores[i] = with_ties ? static_cast<double>(rng.index(8)) / 8.0 : rng.u01();
        labels[i] = rng.u01() < 0.5 ? 1 : 0;
        has_pos = has_pos || labels[i] == 1;
        has_neg = has_neg || labels[i] == 0;
    }
    if (!has_pos) labels[0] = 1;
    if (!has_neg) labels[size > 1 ? 1 : 0] = 0;
    return {std::move(scores), std::move(labels)};
}

}  // namespace

TEST_CASE("auroc on pinned separations") {
    const AurocResult perfect = auroc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0});
    CHECK(perfect.defined);
    CHECK(perfect.value == doctest::Approx(1.0).epsilon(1e-12));

    const AurocResult inverted = auroc({0.1, 0.9}, {1, 0});
    CHECK(inverted.defined);
    CHECK(inverted.value == doctest::Approx(0.0).epsilon(1e-12));

    const AurocResult tied = auroc({0.5, 0.5, 0.2}, {1, 0, 0});
    CHECK(tied.defined);
    CHECK(tied.value == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("single-class inputs are undefined, not zero") {
    CHECK(!auroc({0.1, 0.2, 0.3}, {1, 1, 1}).defined);
    CHECK(!auroc({0.1, 0.2, 0.3}, {0, 0, 0}).defined);
    CHECK(!auroc_trapezoid({0.5, 0.6}, {1, 1}).defined);
}

TEST_CASE("auroc validates its inputs") {
    CHECK_THROWS_AS(auroc({0.1, 0.2}, {1}), ConfigError);
    CHECK_THROWS_AS(auroc({0.1, 0.2}, {1, 2}), ConfigError);
}

TEST_CASE("rank form matches the brute-force pairwise oracle") {
    RandomStream rng(120);
    for (int inst = 0; inst < 200; ++inst) {
        const std::size_t size = 2 + rng.index(49);
        const auto [scores, labels] = random_instance(rng, size, inst % 2 == 0);
        const AurocResult r = auroc(scores, labels);
        REQUIRE(r.defined);
        CHECK(std::abs(r.value - pairwise_auroc(scores, labels)) < 1e-12);
    }
}

TEST_CASE("rank form equals trapezoid integration") {
    RandomStream rng(121);
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t size = 2 + rng.index(60);
        const auto [scores, labels] = random_instance(rng, size, inst % 2 == 1);
        const AurocResult a = auroc(scores, labels);
        const AurocResult b = auroc_trapezoid(scores, labels);
        REQUIRE(a.defined);
        REQUIRE(b.defined);
        CHECK(std::abs(a.value - b.value) < 1e-12);
    }
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
    RandomStream rng(122);
    const auto [scores, labels] = random_instance(rng, 40, false);
    const double base = auroc(scores, labels).value;

    std::vector<double> affine(scores.size()), expo(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        affine[i] = 3.0 * scores[i] + 1.0;
        expo[i] = std::exp(scores[i]);
    }
    CHECK(auroc(affine, labels).value == base);
    CHECK(auroc(expo, labels).value == base);
}

TEST_CASE("complementing the labels complements the auroc") {
    RandomStream rng(123);
    for (int inst = 0; inst < 50; ++inst) {
        const auto [scores, labels] = random_instance(rng, 3 + rng.index(30), inst % 2 == 0);
        std::vector<int> flipped(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) flipped[i] = 1 - labels[i];
        const AurocResult a = auroc(scores, labels);
        const AurocResult b = auroc(scores, flipped);
        CHECK(std::abs(a.value + b.value - 1.0) < 1e-12);
    }
}

TEST_CASE("random labels over many points sit near one half") {
    RandomStream rng(124);
    std::vector<double> scores(10000);
    std::vector<int> labels(10000);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = rng.u01();
        labels[i] = rng.u01() < 0.5 ? 1 : 0;
    }
    const AurocResult r = auroc(scores, labels);
    REQUIRE(r.defined);
    CHECK(r.value > 0.45);
    CHECK(r.value < 0.55);
}

TEST_CASE("evaluate pools objects and points across clouds") {
    CloudEvalResult normal;
    normal.name = "sphere_000";
    normal.category = "sphere";
    normal.object_score = 0.1;
    normal.object_label = 0;
    normal.point_scores = {0.05, 0.1, 0.02};
    normal.point_labels = {0, 0, 0};

    CloudEvalResult dented;
    dented.name = "sphere_001";
    dented.category = "sphere";
    dented.object_score = 0.9;
    dented.object_label = 1;
    dented.point_scores = {0.05, 0.9, 0.8};
    dented.point_labels = {0, 1, 1};

    CloudEvalResult box;
    box.name = "box_000";
    box.category = "box";
    box.object_score = 0.2;
    box.object_label = 0;
    box.point_scores = {0.01, 0.03};
    box.point_labels = {0, 0};

    const EvalReport report = evaluate({normal, dented, box}, "cfg123");
    CHECK(report.n_objects == 3);
    CHECK(report.n_points == 8);
    REQUIRE(report.o_roc.defined);
    CHECK(report.o_roc.value == doctest::Approx(1.0).epsilon(1e-12));
    // Pooled points: positives {0.9, 0.8} outrank every negative.
    REQUIRE(report.p_roc.defined);
    CHECK(report.p_roc.value == doctest::Approx(1.0).epsilon(1e-12));

    REQUIRE(report.per_category.count("sphere") == 1);
    REQUIRE(report.per_category.count("box") == 1);
    CHECK(report.per_category.at("sphere").o_roc.defined);
    CHECK(!report.per_category.at("box").o_roc.defined);  // single class
    CHECK(report.per_category.at("box").n_points == 2);

    // Pooling is order-independent.
    const EvalReport reordered = evaluate({box, dented, normal}, "cfg123");
    CHECK(reordered.p_roc.value == report.p_roc.value);
    CHECK(reordered.o_roc.value == report.o_roc.value);

    // Manually pooled points give the identical P-ROC.
    std::vector<double> pooled_scores;
    std::vector<int> pooled_labels;
    for (const CloudEvalResult* c : {&normal, &dented, &box}) {
        for (std::size_t i = 0; i < c->point_scores.size(); ++i) {
            pooled_scores.push_back(c->point_scores[i]);
            pooled_labels.push_back(c->point_labels[i]);
        }
    }
    CHECK(auroc(pooled_scores, pooled_labels).value == report.p_roc.value);
}

TEST_CASE("evaluate validates inputs") {
    CHECK_THROWS_AS(evaluate({}, "h"), ConfigError);
    CloudEvalResult broken;
    broken.name = "x";
    broken.category = "sphere";
    broken.point_scores = {0.1};
    broken.point_labels = {};
    CHECK_THROWS_AS(evaluate({broken}, "h"), ConfigError);
}

TEST_CASE("report json round trip") {
    TempDir dir;
    CloudEvalResult a;
    a.name = "s0";
    a.category = "sphere";
    a.object_score = 0.9;
    a.object_label = 1;
    a.point_scores = {0.9, 0.1};
    a.point_labels = {1, 0};
    CloudEvalResult b = a;
    b.name = "s1";
    b.object_score = 0.2;
    b.object_label = 0;
    b.point_scores = {0.1, 0.2};
    b.point_labels = {0, 0};
    const EvalReport report = evaluate({a, b}, "deadbeef");

    const std::string path = (dir.path / "report.json").string();
    write_report_json(path, report);
    std::ifstream in(path);
    REQUIRE(in.good());
    const nlohmann::json doc = nlohmann::json::parse(in);
    CHECK(doc.at("config_hash") == "deadbeef");
    CHECK(doc.at("n_objects") == 2);
    CHECK(doc.at("n_points") == 4);
    CHECK(doc.at("o_roc").get<double>() == doctest::Approx(report.o_roc.value));
    CHECK(doc.at("per_category").at("sphere").at("n_points") == 4);

    // An undefined metric must serialize as null, not a number.
    EvalReport undef = report;
    undef.o_roc = {};
    write_report_json(path, undef);
    std::ifstream in2(path);
    const nlohmann::json doc2 = nlohmann::json::parse(in2);
    CHECK(doc2.at("o_roc").is_null());
}

TEST_CASE("ablation csv lists one row per value") {
    TempDir dir;
    std::vector<AblationRow> rows;
    rows.push_back({"views", 3.0, {0.9, true}, {0.8, true}, 1.5});
    rows.push_back({"views", 9.0, {}, {0.85, true}, 2.5});
    const std::string path = (dir.path / "report.csv").string();
    write_ablation_csv(path, rows);

    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "axis,value,o_roc,p_roc,wall_seconds");
    REQUIRE(std::getline(in, line));
    CHECK(line == "views,3,0.90000000000000002,0.80000000000000004,1.5");
    REQUIRE(std::getline(in, line));
    CHECK(line == "views,9,,0.84999999999999998,2.5");
    CHECK(!std::getline(in, line));
}
