#include "zsas/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace zsas::imgproc {

namespace {

void require_same_dims(const BinaryMask& a, const BinaryMask& b, const char* op)
{
    if (a.height() != b.height() || a.width() != b.width())
        throw DataError(std::string(op) + ": mask dimensions differ");
}

template <typename Fn>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, const char* op, Fn fn)
{
    require_same_dims(a, b, op);
    std::vector<std::uint8_t> out(a.size());
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = fn(va[i], vb[i]) ? 1 : 0;
    return BinaryMask(a.height(), a.width(), std::move(out));
}

/// Union-find over provisional labels.
class DisjointSets
{
public:
    int make()
    {
        parent_.push_back(static_cast<int>(parent_.size()));
        return parent_.back();
    }

    int find(int v)
    {
        while (parent_[v] != v)
        {
            parent_[v] = parent_[parent_[v]];
            v = parent_[v];
        }
        return v;
    }

    void unite(int a, int b)
    {
        a = find(a);
        b = find(b);
        if (a != b)
            parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<int> parent_;
};

}  // namespace

ScoreGrid minmax_normalize(const ScoreGrid& grid)
{
    const double lo = grid.min_value();
    const double hi = grid.max_value();
    std::vector<float> out(grid.size(), 0.0f);
    if (hi > lo)
    {
        const double range = hi - lo;
        const auto v = grid.values();
        for (std::size_t i = 0; i < out.size(); ++i)
        {
            const double n = (static_cast<double>(v[i]) - lo) / range;
            out[i] = static_cast<float>(std::clamp(n, 0.0, 1.0));
        }
    }
    return ScoreGrid(grid.height(), grid.width(), std::move(out), true);
}

BinaryMask binarize(const ScoreGrid& grid, double threshold)
{
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ConfigError("threshold: must lie in [0, 1], got " + std::to_string(threshold));
    if (!grid.normalized())
        throw DataError("binarize: grid must be normalized");
    std::vector<std::uint8_t> out(grid.size());
    const auto v = grid.values();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<double>(v[i]) >= threshold ? 1 : 0;
    return BinaryMask(grid.height(), grid.width(), std::move(out));
}

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& element)
{
    if (!element.is_normalized())
        throw ConfigError("kernel.size: structuring element must have odd sizes");
    const int h = mask.height();
    const int w = mask.width();
    if (element.width > 2 * w || element.height > 2 * h)
    {
        throw ConfigError("kernel.size: element (" + std::to_string(element.width) + ", " +
                          std::to_string(element.height) + ") exceeds twice the image size");
    }

    // Every footprint row is a contiguous span, so each output pixel only
    // needs one prefix-count lookup per kernel row.
    const auto half_widths = element.row_half_widths();
    const int b = (element.height - 1) / 2;

    std::vector<int> prefix(static_cast<std::size_t>(h) * (w + 1), 0);
    const auto v = mask.values();
    for (int y = 0; y < h; ++y)
    {
        int* row = &prefix[static_cast<std::size_t>(y) * (w + 1)];
        for (int x = 0; x < w; ++x)
            row[x + 1] = row[x] + v[mask.index(y, x)];
    }

    std::vector<std::uint8_t> out(mask.size(), 0);
    for (int y = 0; y < h; ++y)
    {
        for (int i = 0; i < element.height; ++i)
        {
            const int r = half_widths[i];
            const int sy = y + (i - b);
            if (r < 0 || sy < 0 || sy >= h)
                continue;
            const int* row = &prefix[static_cast<std::size_t>(sy) * (w + 1)];
            if (row[w] == 0)
                continue;
            for (int x = 0; x < w; ++x)
            {
                const int lo = std::max(0, x - r);
                const int hi = std::min(w, x + r + 1);
                if (row[hi] - row[lo] > 0)
                    out[mask.index(y, x)] = 1;
            }
        }
    }
    return BinaryMask(h, w, std::move(out));
}

BinaryMask ring(const BinaryMask& mask, const StructuringElement& element)
{
    return mask_minus(dilate(mask, element), mask);
}

ComponentLabels connected_components(const BinaryMask& mask)
{
    const int h = mask.height();
    const int w = mask.width();
    std::vector<int> provisional(mask.size(), -1);
    DisjointSets sets;

    for (int y = 0; y < h; ++y)
    {
        for (int x = 0; x < w; ++x)
        {
            if (!mask.at(y, x))
                continue;
            int label = -1;
            constexpr int kNeighbors[4][2] = {{0, -1}, {-1, -1}, {-1, 0}, {-1, 1}};
            for (const auto& d : kNeighbors)
            {
                const int ny = y + d[0];
                const int nx = x + d[1];
                if (ny < 0 || nx < 0 || nx >= w)
                    continue;
                const int n = provisional[mask.index(ny, nx)];
                if (n < 0)
                    continue;
                if (label < 0)
                    label = n;
                else
                    sets.unite(label, n);
            }
            provisional[mask.index(y, x)] = label < 0 ? sets.make() : label;
        }
    }

    ComponentLabels out;
    out.height = h;
    out.width = w;
    out.labels.assign(mask.size(), 0);
    std::vector<int> final_label;  // root -> output label, filled in raster order
    for (std::size_t i = 0; i < provisional.size(); ++i)
    {
        if (provisional[i] < 0)
            continue;
        const int root = sets.find(provisional[i]);
        if (static_cast<std::size_t>(root) >= final_label.size())
            final_label.resize(static_cast<std::size_t>(root) + 1, 0);
        if (final_label[root] == 0)
        {
            final_label[root] = ++out.component_count;
            out.component_areas.push_back(0);
        }
        out.labels[i] = final_label[root];
        ++out.component_areas[final_label[root] - 1];
    }
    return out;
}

Box bounding_box(const BinaryMask& mask, std::span<const PointPrompt> anchors)
{
    if (!mask.any())
        throw EmptyRegionError("bounding_box: mask has no foreground pixels");

    const auto cc = connected_components(mask);
    std::vector<std::uint8_t> selected(static_cast<std::size_t>(cc.component_count) + 1, 0);
    bool anchored = false;
    for (const auto& p : anchors)
    {
        if (p.polarity != Polarity::positive || !mask.contains(p.y, p.x))
            continue;
        selected[cc.at(p.y, p.x)] = 1;
        anchored = true;
    }
    if (!anchored)
    {
        const auto largest = std::max_element(cc.component_areas.begin(), cc.component_areas.end());
        selected[static_cast<std::size_t>(largest - cc.component_areas.begin()) + 1] = 1;
    }

    Box box{mask.width(), mask.height(), -1, -1};
    for (int y = 0; y < mask.height(); ++y)
    {
        for (int x = 0; x < mask.width(); ++x)
        {
            if (!selected[cc.at(y, x)] || cc.at(y, x) == 0)
                continue;
            box.x_min = std::min(box.x_min, x);
            box.y_min = std::min(box.y_min, y);
            box.x_max = std::max(box.x_max, x);
            box.y_max = std::max(box.y_max, y);
        }
    }
    return box;
}

ScoreGrid resize_bilinear(const ScoreGrid& grid, int out_height, int out_width)
{
    if (out_height < 1 || out_width < 1)
    {
        throw ConfigError("resize: output dimensions must be >= 1, got " +
                          std::to_string(out_height) + "x" + std::to_string(out_width));
    }
    if (out_height == grid.height() && out_width == grid.width())
        return grid;

    const int in_h = grid.height();
    const int in_w = grid.width();

    struct Tap
    {
        int i0;
        int i1;
        double t;
    };
    auto taps = [](int out_n, int in_n) {
        std::vector<Tap> out(static_cast<std::size_t>(out_n));
        const double scale = static_cast<double>(in_n) / out_n;
        for (int o = 0; o < out_n; ++o)
        {
            double src = (o + 0.5) * scale - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
            const int i0 = static_cast<int>(std::floor(src));
            const int i1 = std::min(i0 + 1, in_n - 1);
            out[o] = {i0, i1, src - i0};
        }
        return out;
    };
    const auto ty = taps(out_height, in_h);
    const auto tx = taps(out_width, in_w);

    std::vector<float> out(static_cast<std::size_t>(out_height) * out_width);
    for (int y = 0; y < out_height; ++y)
    {
        const auto& a = ty[y];
        for (int x = 0; x < out_width; ++x)
        {
            const auto& b = tx[x];
            const double top = (1.0 - b.t) * grid.at(a.i0, b.i0) + b.t * grid.at(a.i0, b.i1);
            const double bottom = (1.0 - b.t) * grid.at(a.i1, b.i0) + b.t * grid.at(a.i1, b.i1);
            out[static_cast<std::size_t>(y) * out_width + x] =
                static_cast<float>((1.0 - a.t) * top + a.t * bottom);
        }
    }

    // Convex combinations stay inside [min, max]; float rounding could nudge
    // a value just past a bound, so keep the normalized flag honest.
    if (grid.normalized())
    {
        for (auto& v : out)
            v = std::clamp(v, 0.0f, 1.0f);
    }
    return ScoreGrid(out_height, out_width, std::move(out), grid.normalized());
}

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b)
{
    return combine(a, b, "mask_and", [](auto x, auto y) { return x && y; });
}

BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b)
{
    return combine(a, b, "mask_or", [](auto x, auto y) { return x || y; });
}

BinaryMask mask_minus(const BinaryMask& a, const BinaryMask& b)
{
    return combine(a, b, "mask_minus", [](auto x, auto y) { return x && !y; });
}

BinaryMask mask_crop_to_box(const BinaryMask& mask, const Box& box)
{
    std::vector<std::uint8_t> out(mask.values().begin(), mask.values().end());
    for (int y = 0; y < mask.height(); ++y)
    {
        for (int x = 0; x < mask.width(); ++x)
        {
            if (!box.contains(y, x))
                out[mask.index(y, x)] = 0;
        }
    }
    return BinaryMask(mask.height(), mask.width(), std::move(out));
}

BinaryMask resize_nearest(const BinaryMask& mask, int out_height, int out_width)
{
    if (out_height < 1 || out_width < 1)
        throw ConfigError("resize: output dimensions must be >= 1");
    if (out_height == mask.height() && out_width == mask.width())
        return mask;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(out_height) * out_width);
    for (int y = 0; y < out_height; ++y)
    {
        const int sy = std::min(mask.height() - 1,
                                static_cast<int>((y + 0.5) * mask.height() / out_height));
        for (int x = 0; x < out_width; ++x)
        {
            const int sx = std::min(mask.width() - 1,
                                    static_cast<int>((x + 0.5) * mask.width() / out_width));
            out[static_cast<std::size_t>(y) * out_width + x] = mask.at(sy, sx) ? 1 : 0;
        }
    }
    return BinaryMask(out_height, out_width, std::move(out));
}

double iou(const BinaryMask& a, const BinaryMask& b)
{
    require_same_dims(a, b, "iou");
    std::size_t inter = 0;
    std::size_t uni = 0;
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i)
    {
        inter += (va[i] && vb[i]) ? 1 : 0;
        uni += (va[i] || vb[i]) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace zsas::imgproc
