#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "zsas/core_types.hpp"

namespace zsas::metrics {

// Pixel-level metrics over parallel score / truth arrays (truth is 0/1).

/// P(score_pos > score_neg) + 0.5 P(equal). Needs both classes.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> truth);

/// max over thresholds t in (unique scores, +inf) of 2TP / (2TP + FP + FN),
/// predicting score >= t. Needs a positive pixel.
double f1_max(std::span<const double> scores, std::span<const std::uint8_t> truth);

/// sum (R_n - R_{n-1}) P_n down the descending-threshold curve, ties as one
/// block. Needs a positive pixel.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct MetricSet
{
    std::optional<double> auroc;
    std::optional<double> f1_max;
    std::optional<double> ap;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

/// All three metrics, leaving undefined ones empty instead of throwing.
MetricSet compute_all(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct EvalItem
{
    std::string id;
    std::string category;
    ScoreGrid scores;
    BinaryMask truth;
};

struct ImageResult
{
    std::string id;
    std::string category;
    MetricSet metrics;
};

/// Pooled pixels across the dataset, per category, and per image.
struct EvalResult
{
    MetricSet pooled;
    std::map<std::string, MetricSet> per_category;
    std::vector<ImageResult> per_image;
};

/// Scores and truth must share dims per item. Throws UndefinedMetricError
/// when the pooled set lacks a class.
EvalResult evaluate(const std::vector<EvalItem>& items);

nlohmann::json to_json(const MetricSet& m);
nlohmann::json to_json(const EvalResult& result);

/// One row per image, one per category, and a pooled row.
std::string to_csv(const EvalResult& result);

}  // namespace zsas::metrics
