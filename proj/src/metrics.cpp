#include "zsas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace zsas::metrics {

namespace {

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> truth)
{
    if (scores.size() != truth.size())
        throw DataError("metrics: scores and truth differ in length");
    for (double s : scores)
    {
        if (!std::isfinite(s))
            throw DataError("metrics: non-finite score");
    }
}

std::vector<std::size_t> descending_order(std::span<const double> scores)
{
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

/// (positives, negatives) per tie block in descending score order.
std::vector<std::pair<std::size_t, std::size_t>> tie_blocks(std::span<const double> scores,
                                                            std::span<const std::uint8_t> truth)
{
    const auto order = descending_order(scores);
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    for (std::size_t i = 0; i < order.size();)
    {
        std::size_t p = 0;
        std::size_t n = 0;
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]])
        {
            (truth[order[j]] ? p : n) += 1;
            ++j;
        }
        blocks.emplace_back(p, n);
        i = j;
    }
    return blocks;
}

std::size_t count_positive(std::span<const std::uint8_t> truth)
{
    return static_cast<std::size_t>(std::count_if(truth.begin(), truth.end(), [](auto t) { return t != 0; }));
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const std::uint8_t> truth)
{
    check_inputs(scores, truth);
    const std::size_t P = count_positive(truth);
    const std::size_t N = truth.size() - P;
    if (P == 0 || N == 0)
        throw UndefinedMetricError("auroc needs both positive and negative pixels");

    // Walk from the lowest block up, counting negatives already passed.
    const auto blocks = tie_blocks(scores, truth);
    double wins = 0.0;
    double negatives_below = 0.0;
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it)
    {
        wins += static_cast<double>(it->first) * (negatives_below + 0.5 * static_cast<double>(it->second));
        negatives_below += static_cast<double>(it->second);
    }
    return wins / (static_cast<double>(P) * static_cast<double>(N));
}

double f1_max(std::span<const double> scores, std::span<const std::uint8_t> truth)
{
    check_inputs(scores, truth);
    const std::size_t P = count_positive(truth);
    if (P == 0)
        throw UndefinedMetricError("f1_max needs at least one positive pixel");

    double best = 0.0;  // threshold +inf
    double tp = 0.0;
    double fp = 0.0;
    for (const auto& [p, n] : tie_blocks(scores, truth))
    {
        tp += static_cast<double>(p);
        fp += static_cast<double>(n);
        const double fn = static_cast<double>(P) - tp;
        best = std::max(best, 2.0 * tp / (2.0 * tp + fp + fn));
    }
    return best;
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> truth)
{
    check_inputs(scores, truth);
    const std::size_t P = count_positive(truth);
    if (P == 0)
        throw UndefinedMetricError("average_precision needs at least one positive pixel");

    double ap = 0.0;
    double tp = 0.0;
    double fp = 0.0;
    double prev_recall = 0.0;
    for (const auto& [p, n] : tie_blocks(scores, truth))
    {
        tp += static_cast<double>(p);
        fp += static_cast<double>(n);
        const double recall = tp / static_cast<double>(P);
        if (p > 0)
            ap += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
    }
    return ap;
}

MetricSet compute_all(std::span<const double> scores, std::span<const std::uint8_t> truth)
{
    check_inputs(scores, truth);
    MetricSet m;
    m.positives = count_positive(truth);
    m.negatives = truth.size() - m.positives;
    if (m.positives > 0 && m.negatives > 0)
        m.auroc = auroc(scores, truth);
    if (m.positives > 0)
    {
        m.f1_max = f1_max(scores, truth);
        m.ap = average_precision(scores, truth);
    }
    return m;
}

EvalResult evaluate(const std::vector<EvalItem>& items)
{
    EvalResult result;
    std::vector<double> all_scores;
    std::vector<std::uint8_t> all_truth;
    std::map<std::string, std::pair<std::vector<double>, std::vector<std::uint8_t>>> by_category;

    for (const auto& item : items)
    {
        if (item.scores.height() != item.truth.height() || item.scores.width() != item.truth.width())
        {
            throw DataError("evaluate: prediction for '" + item.id + "' is " +
                            std::to_string(item.scores.height()) + "x" + std::to_string(item.scores.width()) +
                            " but truth is " + std::to_string(item.truth.height()) + "x" +
                            std::to_string(item.truth.width()));
        }
        const auto s = item.scores.values();
        const auto t = item.truth.values();
        std::vector<double> scores(s.begin(), s.end());
        result.per_image.push_back({item.id, item.category, compute_all(scores, t)});

        all_scores.insert(all_scores.end(), scores.begin(), scores.end());
        all_truth.insert(all_truth.end(), t.begin(), t.end());
        auto& cat = by_category[item.category];
        cat.first.insert(cat.first.end(), scores.begin(), scores.end());
        cat.second.insert(cat.second.end(), t.begin(), t.end());
    }

    result.pooled = compute_all(all_scores, all_truth);
    if (!result.pooled.auroc)
        throw UndefinedMetricError("evaluate: pooled pixels need both positive and negative truth");
    for (const auto& [name, data] : by_category)
        result.per_category[name] = compute_all(data.first, data.second);
    return result;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v)
{
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string format_value(const std::optional<double>& v)
{
    if (!v)
        return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10f", *v);
    return buf;
}

std::string csv_field(const std::string& text)
{
    if (text.find_first_of(",\"\n") == std::string::npos)
        return text;
    std::string out = "\"";
    for (char c : text)
    {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

void csv_row(std::ostringstream& out, const std::string& scope, const std::string& id,
             const std::string& category, const MetricSet& m)
{
    out << scope << ',' << csv_field(id) << ',' << csv_field(category) << ',' << format_value(m.auroc) << ','
        << format_value(m.f1_max) << ',' << format_value(m.ap) << ',' << m.positives << ',' << m.negatives
        << '\n';
}

}  // namespace

nlohmann::json to_json(const MetricSet& m)
{
    return {{"auroc", optional_json(m.auroc)},
            {"f1_max", optional_json(m.f1_max)},
            {"ap", optional_json(m.ap)},
            {"positives", m.positives},
            {"negatives", m.negatives}};
}

nlohmann::json to_json(const EvalResult& result)
{
    nlohmann::json doc;
    doc["aggregation"] = "pooled-pixels";
    doc["pooled"] = to_json(result.pooled);
    doc["per_category"] = nlohmann::json::object();
    for (const auto& [name, m] : result.per_category)
        doc["per_category"][name] = to_json(m);
    doc["per_image"] = nlohmann::json::array();
    for (const auto& img : result.per_image)
    {
        auto row = to_json(img.metrics);
        row["id"] = img.id;
        row["category"] = img.category;
        doc["per_image"].push_back(row);
    }
    return doc;
}

std::string to_csv(const EvalResult& result)
{
    std::ostringstream out;
    out << "scope,id,category,auroc,f1_max,ap,positives,negatives\n";
    for (const auto& img : result.per_image)
        csv_row(out, "image", img.id, img.category, img.metrics);
    for (const auto& [name, m] : result.per_category)
        csv_row(out, "category", "", name, m);
    csv_row(out, "pooled", "", "", result.pooled);
    return out.str();
}

}  // namespace zsas::metrics
