#pragma once

// Token-level classification report: per-class precision/recall/F1/support
// with macro, micro and support-weighted aggregates.

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seqnas {

struct ClassCounts {
    std::vector<std::string> names;
    std::vector<std::size_t> tp;
    std::vector<std::size_t> fp;
    std::vector<std::size_t> fn;
    std::vector<std::size_t> support;  // gold occurrences, tp + fn
    std::size_t evaluated = 0;
    std::size_t correct = 0;

    explicit ClassCounts(std::vector<std::string> class_names = {});

    // Associative merge of counts over the same classes.
    ClassCounts& operator+=(const ClassCounts& other);
};

// Tallies (pred, gold) pairs, skipping positions whose gold is ignore_id.
// Throws ShapeError on a length mismatch.
ClassCounts count(std::span<const int> preds, std::span<const int> golds, int ignore_id,
                  const std::vector<std::string>& class_names);

struct ClassReport {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct MetricsReport {
    std::vector<ClassReport> per_class;  // classes present in gold or predictions
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    double micro_f1 = 0.0;
    double accuracy = 0.0;
    std::size_t total_support = 0;
    std::optional<double> loss;
};

// Zero denominators give 0. Classes absent from both gold and predictions are
// left out of per_class and of the macro mean.
MetricsReport report(const ClassCounts& counts);

// Macro and weighted means from already-computed per-class rows (as read off a
// printed report); micro/accuracy are left at 0.
MetricsReport aggregate(std::span<const ClassReport> rows);

// {"overall": {...}, "per_class": [...]}; per_class rows in lexicographic
// class order.
nlohmann::ordered_json report_to_json(const MetricsReport& r);

// Plain-text rendering: overall block, then the per-class table with Macro Avg
// and Weighted Avg rows.
std::string report_to_text(const MetricsReport& r);

}  // namespace seqnas
