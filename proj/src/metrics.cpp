#include "seqnas/metrics.hpp"

#include "seqnas/errors.hpp"

#include <algorithm>
#include <cstdio>

namespace seqnas {
namespace {

double ratio(std::size_t num, std::size_t den)
{
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// 2PR/(P+R) written over counts, so pooled counts reproduce accuracy exactly.
double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn)
{
    return ratio(2 * tp, 2 * tp + fp + fn);
}

}  // namespace

ClassCounts::ClassCounts(std::vector<std::string> class_names)
    : names(std::move(class_names)),
      tp(names.size(), 0),
      fp(names.size(), 0),
      fn(names.size(), 0),
      support(names.size(), 0)
{
}

ClassCounts& ClassCounts::operator+=(const ClassCounts& other)
{
    if (other.names != names) {
        throw ConfigError("cannot merge counts over different classes");
    }
    for (std::size_t c = 0; c < names.size(); ++c) {
        tp[c] += other.tp[c];
        fp[c] += other.fp[c];
        fn[c] += other.fn[c];
        support[c] += other.support[c];
    }
    evaluated += other.evaluated;
    correct += other.correct;
    return *this;
}

ClassCounts count(std::span<const int> preds, std::span<const int> golds, int ignore_id,
                  const std::vector<std::string>& class_names)
{
    if (preds.size() != golds.size()) {
        throw ShapeError("count: " + std::to_string(preds.size()) + " predictions for " +
                         std::to_string(golds.size()) + " gold labels");
    }
    ClassCounts c(class_names);
    const auto n = static_cast<int>(class_names.size());
    for (std::size_t i = 0; i < golds.size(); ++i) {
        const int g = golds[i];
        if (g == ignore_id) {
            continue;
        }
        const int p = preds[i];
        if (g < 0 || g >= n) {
            throw ConfigError("count: gold label " + std::to_string(g) + " out of range");
        }
        ++c.evaluated;
        ++c.support[static_cast<std::size_t>(g)];
        if (p == g) {
            ++c.correct;
            ++c.tp[static_cast<std::size_t>(g)];
            continue;
        }
        ++c.fn[static_cast<std::size_t>(g)];
        if (p >= 0 && p < n) {
            ++c.fp[static_cast<std::size_t>(p)];
        }
    }
    return c;
}

MetricsReport report(const ClassCounts& counts)
{
    MetricsReport r;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    for (std::size_t c = 0; c < counts.names.size(); ++c) {
        tp += counts.tp[c];
        fp += counts.fp[c];
        fn += counts.fn[c];
        if (counts.support[c] == 0 && counts.fp[c] == 0) {
            continue;
        }
        ClassReport row;
        row.name = counts.names[c];
        row.precision = ratio(counts.tp[c], counts.tp[c] + counts.fp[c]);
        row.recall = ratio(counts.tp[c], counts.tp[c] + counts.fn[c]);
        row.f1 = f1_from_counts(counts.tp[c], counts.fp[c], counts.fn[c]);
        row.support = counts.support[c];
        r.per_class.push_back(std::move(row));
    }
    std::sort(r.per_class.begin(), r.per_class.end(),
              [](const ClassReport& a, const ClassReport& b) { return a.name < b.name; });
    const MetricsReport agg = aggregate(r.per_class);
    r.macro_precision = agg.macro_precision;
    r.macro_recall = agg.macro_recall;
    r.macro_f1 = agg.macro_f1;
    r.weighted_precision = agg.weighted_precision;
    r.weighted_recall = agg.weighted_recall;
    r.weighted_f1 = agg.weighted_f1;
    r.total_support = counts.evaluated;
    r.micro_f1 = f1_from_counts(tp, fp, fn);
    r.accuracy = ratio(counts.correct, counts.evaluated);
    return r;
}

MetricsReport aggregate(std::span<const ClassReport> rows)
{
    MetricsReport r;
    r.per_class.assign(rows.begin(), rows.end());
    if (rows.empty()) {
        return r;
    }
    std::size_t total = 0;
    double wp = 0.0;
    double wr = 0.0;
    double wf = 0.0;
    for (const auto& row : rows) {
        r.macro_precision += row.precision;
        r.macro_recall += row.recall;
        r.macro_f1 += row.f1;
        wp += row.precision * static_cast<double>(row.support);
        wr += row.recall * static_cast<double>(row.support);
        wf += row.f1 * static_cast<double>(row.support);
        total += row.support;
    }
    const auto n = static_cast<double>(rows.size());
    r.macro_precision /= n;
    r.macro_recall /= n;
    r.macro_f1 /= n;
    if (total > 0) {
        const auto t = static_cast<double>(total);
        r.weighted_precision = wp / t;
        r.weighted_recall = wr / t;
        r.weighted_f1 = wf / t;
    }
    r.total_support = total;
    return r;
}

nlohmann::ordered_json report_to_json(const MetricsReport& r)
{
    nlohmann::ordered_json overall;
    if (r.loss) {
        overall["loss"] = *r.loss;
    }
    overall["accuracy"] = r.accuracy;
    overall["f1_macro"] = r.macro_f1;
    overall["f1_micro"] = r.micro_f1;
    overall["f1_weighted"] = r.weighted_f1;

    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : r.per_class) {
        nlohmann::ordered_json j;
        j["class"] = row.name;
        j["precision"] = row.precision;
        j["recall"] = row.recall;
        j["f1"] = row.f1;
        j["support"] = row.support;
        rows.push_back(std::move(j));
    }
    nlohmann::ordered_json averages;
    averages["macro"] = {{"precision", r.macro_precision},
                         {"recall", r.macro_recall},
                         {"f1", r.macro_f1},
                         {"support", r.total_support}};
    averages["weighted"] = {{"precision", r.weighted_precision},
                            {"recall", r.weighted_recall},
                            {"f1", r.weighted_f1},
                            {"support", r.total_support}};

    nlohmann::ordered_json j;
    j["overall"] = std::move(overall);
    j["per_class"] = std::move(rows);
    j["averages"] = std::move(averages);
    return j;
}

std::string report_to_text(const MetricsReport& r)
{
    std::string out;
    char buf[160];
    out += "Overall Test Metrics\n";
    out += "Metric              Value\n";
    if (r.loss) {
        std::snprintf(buf, sizeof buf, "%-18s %6.4f\n", "Test Loss", *r.loss);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-18s %6.4f\n%-18s %6.4f\n%-18s %6.4f\n%-18s %6.4f\n",
                  "Test Accuracy", r.accuracy, "Test F1 (Macro)", r.macro_f1, "Test F1 (Micro)",
                  r.micro_f1, "Test F1 (Weighted)", r.weighted_f1);
    out += buf;
    out += "\nPer-Class Classification Report\n";
    std::snprintf(buf, sizeof buf, "%-14s %9s %9s %9s %9s\n", "Class", "Precision", "Recall",
                  "F1-Score", "Support");
    out += buf;
    for (const auto& row : r.per_class) {
        std::snprintf(buf, sizeof buf, "%-14s %9.2f %9.2f %9.2f %9zu\n", row.name.c_str(),
                      row.precision, row.recall, row.f1, row.support);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-14s %9.2f %9.2f %9.2f %9zu\n", "Macro Avg", r.macro_precision,
                  r.macro_recall, r.macro_f1, r.total_support);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-14s %9.2f %9.2f %9.2f %9zu\n", "Weighted Avg",
                  r.weighted_precision, r.weighted_recall, r.weighted_f1, r.total_support);
    out += buf;
    return out;
}

}  // namespace seqnas
