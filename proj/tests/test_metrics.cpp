#include "helpers.hpp"

#include "seqnas/errors.hpp"
#include "seqnas/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace seqnas;

namespace {

const std::vector<std::string> kNames{"B-LOC", "B-ORG", "B-PER", "I-LOC", "I-ORG", "I-PER", "O"};

std::vector<ClassReport> rounded_rows()
{
    return {{"B-LOC", 0.91, 0.81, 0.86, 397}, {"B-ORG", 0.74, 0.78, 0.76, 291}, {"B-PER", 0.90, 0.89, 0.89, 614},
            {"I-LOC", 0.91, 0.42, 0.57, 147}, {"I-ORG", 0.75, 0.67, 0.71, 251}, {"I-PER", 0.95, 0.91, 0.93, 527},
            {"O", 0.95, 0.98, 0.96, 6901}};
}

void random_case(Rng& rng, std::size_t n, std::vector<int>& pred, std::vector<int>& gold)
{
    pred.resize(n);
    gold.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        gold[i] = rng.bernoulli(0.1) ? kIgnoreLabel : static_cast<int>(rng.below(7));
        pred[i] = rng.bernoulli(0.6) && gold[i] >= 0 ? gold[i] : static_cast<int>(rng.below(7));
    }
}

}  // namespace

TEST_CASE("counts")
{
    const std::vector<int> same{0, 1, 2, 6, 6, 3};
    const ClassCounts c = count(same, same, kIgnoreLabel, kNames);
    for (std::size_t k = 0; k < 7; ++k) {
        CHECK(c.fp[k] == 0);
        CHECK(c.fn[k] == 0);
    }
    CHECK(c.evaluated == 6);

    const std::vector<int> ignored(5, kIgnoreLabel);
    const std::vector<int> anything{0, 1, 2, 3, 4};
    const ClassCounts z = count(anything, ignored, kIgnoreLabel, kNames);
    CHECK(z.evaluated == 0);
    for (std::size_t k = 0; k < 7; ++k) {
        CHECK(z.tp[k] + z.fp[k] + z.fn[k] + z.support[k] == 0);
    }
    CHECK_THROWS_AS(count(anything, same, kIgnoreLabel, kNames), ShapeError);

    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> pred;
        std::vector<int> gold;
        random_case(rng, 200, pred, gold);
        const ClassCounts got = count(pred, gold, kIgnoreLabel, kNames);
        std::size_t evaluated = 0;
        std::size_t support_sum = 0;
        for (int k = 0; k < 7; ++k) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < 200; ++i) {
                if (gold[i] == kIgnoreLabel) {
                    continue;
                }
                tp += pred[i] == k && gold[i] == k;
                fp += pred[i] == k && gold[i] != k;
                fn += pred[i] != k && gold[i] == k;
            }
            const auto ku = static_cast<std::size_t>(k);
            CHECK(got.tp[ku] == tp);
            CHECK(got.fp[ku] == fp);
            CHECK(got.fn[ku] == fn);
            CHECK(got.support[ku] == tp + fn);
            support_sum += got.support[ku];
        }
        for (const int g : gold) {
            evaluated += g != kIgnoreLabel;
        }
        CHECK(got.evaluated == evaluated);
        CHECK(support_sum == evaluated);

        // merging shards equals counting the whole
        const std::span<const int> p(pred), g(gold);
        ClassCounts merged = count(p.first(77), g.first(77), kIgnoreLabel, kNames);
        merged += count(p.subspan(77), g.subspan(77), kIgnoreLabel, kNames);
        CHECK(merged.tp == got.tp);
        CHECK(merged.fp == got.fp);
        CHECK(merged.correct == got.correct);
    }
}

TEST_CASE("aggregating rounded per-class rows")
{
    const auto rows = rounded_rows();
    const MetricsReport r = aggregate(rows);
    CHECK(std::abs(r.macro_f1 - 0.8114) < 1e-4);
    CHECK(std::abs(r.macro_f1 - 0.8115) < 1e-3);
    CHECK(std::abs(r.weighted_f1 - 0.9331) < 0.01);
    CHECK(std::abs(r.weighted_f1 - 0.930) < 0.01);
    CHECK(r.total_support == 9128);
    std::size_t s = 0;
    for (const auto& row : rows) {
        s += row.support;
    }
    CHECK(s == 9128);
}

TEST_CASE("report formulas")
{
    // class 0: tp 2 fp 1 fn 1; class 1: tp 1 fp 1 fn 1; class 2 unseen
    const std::vector<int> gold{0, 0, 0, 1, 1};
    const std::vector<int> pred{0, 0, 1, 1, 0};
    const MetricsReport r = report(count(pred, gold, kIgnoreLabel, {"a", "b", "c"}));
    REQUIRE(r.per_class.size() == 2);
    CHECK(r.per_class[0].precision == doctest::Approx(2.0 / 3));
    CHECK(r.per_class[0].recall == doctest::Approx(2.0 / 3));
    CHECK(r.per_class[1].precision == doctest::Approx(0.5));
    CHECK(r.per_class[1].f1 == doctest::Approx(0.5));
    CHECK(r.macro_f1 == doctest::Approx((2.0 / 3 + 0.5) / 2));
    CHECK(r.weighted_f1 == doctest::Approx((3 * 2.0 / 3 + 2 * 0.5) / 5));
    CHECK(r.accuracy == doctest::Approx(3.0 / 5));

    // a class that is only ever predicted gets P = R = F1 = 0
    const MetricsReport z = report(count(std::vector<int>{2}, std::vector<int>{0}, kIgnoreLabel, {"a", "b", "c"}));
    CHECK(z.per_class.size() == 2);
    for (const auto& row : z.per_class) {
        CHECK(row.f1 == 0.0);
    }
    const MetricsReport empty = report(count(std::vector<int>{}, std::vector<int>{}, kIgnoreLabel, {"a"}));
    CHECK(empty.accuracy == 0.0);
    CHECK(empty.per_class.empty());
}

TEST_CASE("micro F1 equals accuracy, order invariance, perfect predictions")
{
    Rng rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<int> pred;
        std::vector<int> gold;
        random_case(rng, 1 + rng.below(300), pred, gold);
        const MetricsReport r = report(count(pred, gold, kIgnoreLabel, kNames));
        CHECK(r.micro_f1 == r.accuracy);
        for (const double v : {r.macro_f1, r.micro_f1, r.weighted_f1, r.accuracy, r.macro_precision,
                               r.weighted_recall}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        if (trial % 50 == 0) {
            std::vector<std::size_t> perm(pred.size());
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
            std::vector<int> p2, g2;
            for (const auto i : perm) {
                p2.push_back(pred[i]);
                g2.push_back(gold[i]);
            }
            const MetricsReport s = report(count(p2, g2, kIgnoreLabel, kNames));
            CHECK(report_to_json(s).dump() == report_to_json(r).dump());
        }
    }
    const std::vector<int> gold{0, 1, 2, 3, 4, 5, 6, 6, kIgnoreLabel};
    const MetricsReport p = report(count(gold, gold, kIgnoreLabel, kNames));
    CHECK(p.macro_f1 == 1.0);
    CHECK(p.micro_f1 == 1.0);
    CHECK(p.weighted_f1 == 1.0);
    CHECK(p.accuracy == 1.0);
    CHECK(p.weighted_precision == 1.0);
}

TEST_CASE("report rendering")
{
    const std::vector<int> gold{6, 6, 0, 3, 2};
    const std::vector<int> pred{6, 0, 0, 3, 2};
    MetricsReport r = report(count(pred, gold, kIgnoreLabel, kNames));
    r.loss = 0.25;
    const auto j = report_to_json(r);
    CHECK(j.contains("overall"));
    CHECK(j["per_class"].size() == r.per_class.size());
    CHECK(j["per_class"][0]["class"] == "B-LOC");
    const std::string text = report_to_text(r);
    const auto macro = text.find("Macro Avg");
    const auto weighted = text.find("Weighted Avg");
    REQUIRE(macro != std::string::npos);
    REQUIRE(weighted != std::string::npos);
    CHECK(macro < weighted);
    CHECK(text.find("B-LOC") < text.find("I-LOC"));
    CHECK(text.find("I-LOC") < text.find("\nO "));
}
