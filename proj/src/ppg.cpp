#include "zsas/ppg.hpp"

#include <algorithm>
#include <cmath>

#include "zsas/imgproc.hpp"

namespace zsas::ppg {

namespace {

/// Half-open range of fine pixels covered by coarse cell `i` (never empty).
std::pair<int, int> cell_range(int i, int coarse_n, int fine_n)
{
    const long lo = static_cast<long>(i) * fine_n / coarse_n;
    long hi = static_cast<long>(i + 1) * fine_n / coarse_n;
    hi = std::max(hi, lo + 1);
    return {static_cast<int>(std::min<long>(lo, fine_n - 1)),
            static_cast<int>(std::min<long>(hi, fine_n))};
}

bool spaced_from_all(const std::vector<PointPrompt>& taken, int y, int x, double min_spacing)
{
    const double min_sq = min_spacing * min_spacing;
    for (const auto& p : taken)
    {
        const double dy = p.y - y;
        const double dx = p.x - x;
        if (dy * dy + dx * dx < min_sq)
            return false;
    }
    return true;
}

}  // namespace

ScoreGrid masked_anomaly(const BinaryMask& extreme_mask, const ScoreGrid& anomaly)
{
    if (extreme_mask.height() != anomaly.height() || extreme_mask.width() != anomaly.width())
        throw DataError("masked_anomaly: mask and anomaly map dimensions differ");
    std::vector<float> out(anomaly.size());
    const auto m = extreme_mask.values();
    const auto a = anomaly.values();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = m[i] ? a[i] : 0.0f;
    return ScoreGrid(anomaly.height(), anomaly.width(), std::move(out), anomaly.normalized());
}

std::vector<PointPrompt> select_spaced(std::vector<Candidate> candidates, int k,
                                       double min_spacing, SelectOrder order)
{
    if (k < 1)
        throw ConfigError("k: must be >= 1, got " + std::to_string(k));
    if (candidates.empty())
        throw EmptyRegionError("select_spaced_topk: empty selection domain");

    auto better = [order](const Candidate& a, const Candidate& b) {
        if (a.value != b.value)
            return order == SelectOrder::highest ? a.value > b.value : a.value < b.value;
        return a.rank < b.rank;
    };
    std::sort(candidates.begin(), candidates.end(), better);

    std::vector<PointPrompt> taken;
    for (const auto& c : candidates)
    {
        if (static_cast<int>(taken.size()) == k)
            break;
        if (!spaced_from_all(taken, c.y, c.x, min_spacing))
            continue;
        taken.push_back({c.x, c.y, Polarity::positive, c.value});
    }
    return taken;
}

std::vector<PointPrompt> select_spaced_topk(const ScoreGrid& grid, int k, double min_spacing,
                                            SelectOrder order, const BinaryMask* domain)
{
    if (domain && (domain->height() != grid.height() || domain->width() != grid.width()))
        throw DataError("select_spaced_topk: domain and grid dimensions differ");

    std::vector<Candidate> candidates;
    candidates.reserve(domain ? domain->foreground_count() : grid.size());
    for (int y = 0; y < grid.height(); ++y)
    {
        for (int x = 0; x < grid.width(); ++x)
        {
            if (domain && !domain->at(y, x))
                continue;
            candidates.push_back({grid.at(y, x), y, x, grid.index(y, x)});
        }
    }
    return select_spaced(std::move(candidates), k, min_spacing, order);
}

std::vector<double> region_prototype(const FeatureGrid& features, const BinaryMask& mask)
{
    if (mask.height() != features.height() || mask.width() != features.width())
        throw DataError("region_prototype: mask must match the feature grid's spatial size");
    const auto count = mask.foreground_count();
    if (count == 0)
        throw EmptyRegionError("region_prototype: mask has no foreground pixels");

    std::vector<double> sum(static_cast<std::size_t>(features.channels()), 0.0);
    for (int c = 0; c < features.channels(); ++c)
    {
        for (int y = 0; y < features.height(); ++y)
        {
            for (int x = 0; x < features.width(); ++x)
            {
                if (mask.at(y, x))
                    sum[c] += features.at(c, y, x);
            }
        }
    }
    for (auto& s : sum)
        s /= static_cast<double>(count);
    return sum;
}

ScoreGrid similarity_map(const FeatureGrid& features, const BinaryMask& ring,
                         std::span<const double> prototype)
{
    if (ring.height() != features.height() || ring.width() != features.width())
        throw DataError("similarity_map: ring must match the feature grid's spatial size");
    if (prototype.size() != static_cast<std::size_t>(features.channels()))
        throw DataError("similarity_map: prototype length differs from channel count");

    double proto_sq = 0.0;
    for (double v : prototype)
        proto_sq += v * v;
    if (proto_sq == 0.0)
        throw DegenerateFeatureError("similarity_map: prototype vector is all zero");
    const double proto_norm = std::sqrt(proto_sq);

    std::vector<float> out(ring.size(), 1.0f);
    for (int y = 0; y < ring.height(); ++y)
    {
        for (int x = 0; x < ring.width(); ++x)
        {
            if (!ring.at(y, x))
                continue;
            double dot = 0.0;
            double sq = 0.0;
            for (int c = 0; c < features.channels(); ++c)
            {
                const double f = features.at(c, y, x);
                dot += f * prototype[c];
                sq += f * f;
            }
            double cosine = sq == 0.0 ? 0.0 : dot / (std::sqrt(sq) * proto_norm);
            cosine = std::clamp(cosine, -1.0, 1.0);
            out[ring.index(y, x)] = static_cast<float>(cosine);
        }
    }
    return ScoreGrid(ring.height(), ring.width(), std::move(out));
}

PpgResult generate_prompts(const ScoreGrid& anomaly, const FeatureGrid& features,
                           const PipelineConfig& config)
{
    if (!anomaly.normalized())
        throw DataError("generate_prompts: anomaly map must be normalized");
    if (config.k_positive < 1)
        throw ConfigError("k_positive: must be >= 1");
    if (config.k_negative < 0)
        throw ConfigError("k_negative: must be >= 0");
    const auto element = config.kernel.normalized();

    const int H = anomaly.height();
    const int W = anomaly.width();
    const int fh = features.height();
    const int fw = features.width();

    auto extreme = imgproc::binarize(anomaly, config.extreme_threshold);
    auto masked = masked_anomaly(extreme, anomaly);

    if (!extreme.any())
    {
        // Nothing reached the threshold: fall back to the global argmax so
        // the segmenter still gets one positive point.
        auto best = select_spaced_topk(anomaly, 1, 0.0, SelectOrder::highest);
        PromptSet prompts;
        prompts.points = std::move(best);
        return {std::move(prompts),
                PpgIntermediates{extreme, masked, BinaryMask::empty(H, W), BinaryMask::empty(fh, fw),
                                 BinaryMask::empty(fh, fw), ScoreGrid::filled(fh, fw, 1.0f), true}};
    }

    PromptSet prompts;
    prompts.points = select_spaced_topk(masked, config.k_positive, config.min_spacing,
                                        SelectOrder::highest, &extreme);

    auto ring_mask = imgproc::ring(extreme, element);

    // Pool both masks onto the feature grid. A cell counts as extreme when at
    // least half of its pixels are; as ring when it holds any ring pixel.
    std::vector<std::uint8_t> cell_extreme(static_cast<std::size_t>(fh) * fw, 0);
    std::vector<std::uint8_t> cell_any_extreme(cell_extreme.size(), 0);
    std::vector<std::uint8_t> cell_ring(cell_extreme.size(), 0);
    struct Representative
    {
        int y = -1;
        int x = -1;
    };
    std::vector<Representative> rep(cell_extreme.size());

    for (int cy = 0; cy < fh; ++cy)
    {
        const auto [y0, y1] = cell_range(cy, fh, H);
        for (int cx = 0; cx < fw; ++cx)
        {
            const auto [x0, x1] = cell_range(cx, fw, W);
            const std::size_t cell = static_cast<std::size_t>(cy) * fw + cx;
            const double center_y = 0.5 * (y0 + y1 - 1);
            const double center_x = 0.5 * (x0 + x1 - 1);

            std::size_t extreme_count = 0;
            double best_dist = 0.0;
            for (int y = y0; y < y1; ++y)
            {
                for (int x = x0; x < x1; ++x)
                {
                    extreme_count += extreme.at(y, x) ? 1 : 0;
                    if (!ring_mask.at(y, x))
                        continue;
                    const double d = (y - center_y) * (y - center_y) + (x - center_x) * (x - center_x);
                    if (rep[cell].y < 0 || d < best_dist)
                    {
                        rep[cell] = {y, x};
                        best_dist = d;
                    }
                }
            }
            const std::size_t area = static_cast<std::size_t>(y1 - y0) * (x1 - x0);
            cell_any_extreme[cell] = extreme_count > 0 ? 1 : 0;
            cell_extreme[cell] = 2 * extreme_count >= area ? 1 : 0;
            cell_ring[cell] = rep[cell].y >= 0 ? 1 : 0;
        }
    }
    if (std::none_of(cell_extreme.begin(), cell_extreme.end(), [](auto v) { return v != 0; }))
        cell_extreme = cell_any_extreme;

    BinaryMask feature_extreme(fh, fw, std::move(cell_extreme));
    BinaryMask feature_ring(fh, fw, std::move(cell_ring));

    const auto prototype = region_prototype(features, feature_extreme);
    auto similarity = similarity_map(features, feature_ring, prototype);

    if (config.k_negative > 0 && feature_ring.any())
    {
        // Spacing is checked on the mapped-back working-resolution points,
        // so the guarantee holds where the prompts are used.
        std::vector<Candidate> candidates;
        for (int cy = 0; cy < fh; ++cy)
        {
            for (int cx = 0; cx < fw; ++cx)
            {
                if (!feature_ring.at(cy, cx))
                    continue;
                const auto cell = feature_ring.index(cy, cx);
                candidates.push_back({similarity.at(cy, cx), rep[cell].y, rep[cell].x, cell});
            }
        }
        auto negatives = select_spaced(std::move(candidates), config.k_negative,
                                       config.min_spacing, SelectOrder::lowest);
        for (auto& p : negatives)
        {
            p.polarity = Polarity::negative;
            prompts.points.push_back(p);
        }
    }

    return {std::move(prompts),
            PpgIntermediates{std::move(extreme), std::move(masked), std::move(ring_mask),
                             std::move(feature_extreme), std::move(feature_ring),
                             std::move(similarity), false}};
}

}  // namespace zsas::ppg
