#include "zsas/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace zsas {

namespace {

void check_dims(int height, int width, std::size_t count, const char* what)
{
    if (height < 1 || width < 1)
    {
        throw DataError(std::string(what) + ": dimensions must be >= 1, got " +
                        std::to_string(height) + "x" + std::to_string(width));
    }
    const auto expected = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    if (count != expected)
    {
        throw DataError(std::string(what) + ": expected " + std::to_string(expected) +
                        " values, got " + std::to_string(count));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// ScoreGrid
// ---------------------------------------------------------------------------

ScoreGrid::ScoreGrid(int height, int width, std::vector<float> values, bool normalized)
    : height_(height), width_(width), values_(std::move(values)), normalized_(normalized)
{
    check_dims(height_, width_, values_.size(), "ScoreGrid");
    for (float v : values_)
    {
        if (!std::isfinite(v))
            throw DataError("ScoreGrid: non-finite value");
        if (normalized_ && (v < 0.0f || v > 1.0f))
            throw DataError("ScoreGrid: value " + std::to_string(v) +
                            " outside [0, 1] in a normalized grid");
    }
}

ScoreGrid ScoreGrid::filled(int height, int width, float value)
{
    const auto n = static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0);
    return ScoreGrid(height, width, std::vector<float>(n, value));
}

float ScoreGrid::min_value() const
{
    return *std::min_element(values_.begin(), values_.end());
}

float ScoreGrid::max_value() const
{
    return *std::max_element(values_.begin(), values_.end());
}

ScoreGrid ScoreGrid::as_normalized() const
{
    return ScoreGrid(height_, width_, values_, true);
}

// ---------------------------------------------------------------------------
// BinaryMask
// ---------------------------------------------------------------------------

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> values)
    : height_(height), width_(width), values_(std::move(values))
{
    check_dims(height_, width_, values_.size(), "BinaryMask");
    for (auto v : values_)
    {
        if (v > 1)
            throw DataError("BinaryMask: values must be 0 or 1");
    }
}

BinaryMask BinaryMask::empty(int height, int width)
{
    const auto n = static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0);
    return BinaryMask(height, width, std::vector<std::uint8_t>(n, 0));
}

BinaryMask BinaryMask::full(int height, int width)
{
    const auto n = static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0);
    return BinaryMask(height, width, std::vector<std::uint8_t>(n, 1));
}

std::size_t BinaryMask::foreground_count() const noexcept
{
    return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

ScoreGrid BinaryMask::to_scores() const
{
    std::vector<float> v(values_.begin(), values_.end());
    return ScoreGrid(height_, width_, std::move(v), true);
}

// ---------------------------------------------------------------------------
// FeatureGrid
// ---------------------------------------------------------------------------

std::string to_string(const FeatureDims& dims)
{
    std::ostringstream os;
    os << "(" << dims.channels << ", " << dims.height << ", " << dims.width << ")";
    return os.str();
}

FeatureGrid::FeatureGrid(int channels, int height, int width, std::vector<float> values)
    : dims_{channels, height, width}, values_(std::move(values))
{
    if (channels < 1 || height < 1 || width < 1)
        throw DataError("FeatureGrid: dimensions must be >= 1, got " + to_string(dims_));
    const auto expected = static_cast<std::size_t>(channels) * height * width;
    if (values_.size() != expected)
    {
        throw DataError("FeatureGrid: expected " + std::to_string(expected) + " values, got " +
                        std::to_string(values_.size()));
    }
    for (float v : values_)
    {
        if (!std::isfinite(v))
            throw DataError("FeatureGrid: non-finite value");
    }
}

std::vector<float> FeatureGrid::vector_at(int y, int x) const
{
    std::vector<float> out(static_cast<std::size_t>(dims_.channels));
    for (int c = 0; c < dims_.channels; ++c)
        out[c] = at(c, y, x);
    return out;
}

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

std::string_view to_string(Polarity polarity)
{
    return polarity == Polarity::positive ? "positive" : "negative";
}

void Box::validate(int height, int width) const
{
    if (x_min > x_max || y_min > y_max)
        throw DataError("Box: min corner exceeds max corner");
    if (x_min < 0 || y_min < 0 || x_max >= width || y_max >= height)
        throw DataError("Box: outside the " + std::to_string(height) + "x" +
                        std::to_string(width) + " image");
}

std::size_t PromptSet::positive_count() const noexcept
{
    return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const auto& p) {
        return p.polarity == Polarity::positive;
    }));
}

std::size_t PromptSet::negative_count() const noexcept
{
    return points.size() - positive_count();
}

std::vector<PointPrompt> PromptSet::positives() const
{
    std::vector<PointPrompt> out;
    for (const auto& p : points)
    {
        if (p.polarity == Polarity::positive)
            out.push_back(p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Structuring element
// ---------------------------------------------------------------------------

std::string_view to_string(KernelShape shape)
{
    switch (shape)
    {
    case KernelShape::ellipse: return "ellipse";
    case KernelShape::rectangle: return "rectangle";
    case KernelShape::cross: return "cross";
    }
    return "?";
}

KernelShape parse_kernel_shape(std::string_view text)
{
    if (text == "ellipse")
        return KernelShape::ellipse;
    if (text == "rectangle" || text == "rect")
        return KernelShape::rectangle;
    if (text == "cross")
        return KernelShape::cross;
    throw ConfigError("kernel.shape: unknown shape '" + std::string(text) +
                      "' (expected ellipse, rectangle or cross)");
}

StructuringElement StructuringElement::normalized() const
{
    if (width < 1 || height < 1)
    {
        throw ConfigError("kernel.size: width and height must be >= 1, got (" +
                          std::to_string(width) + ", " + std::to_string(height) + ")");
    }
    StructuringElement out = *this;
    out.width += (out.width % 2 == 0) ? 1 : 0;
    out.height += (out.height % 2 == 0) ? 1 : 0;
    return out;
}

std::vector<int> StructuringElement::row_half_widths() const
{
    if (!is_normalized())
        throw ConfigError("kernel.size: structuring element must have odd sizes; call normalized()");

    const long a = (width - 1) / 2;
    const long b = (height - 1) / 2;
    std::vector<int> rows(static_cast<std::size_t>(height), -1);
    for (long dy = -b; dy <= b; ++dy)
    {
        int half = -1;
        switch (shape)
        {
        case KernelShape::rectangle:
            half = static_cast<int>(a);
            break;
        case KernelShape::cross:
            half = dy == 0 ? static_cast<int>(a) : 0;
            break;
        case KernelShape::ellipse:
            // (dx/a)^2 + (dy/b)^2 <= 1, kept in integers: dx^2 b^2 + dy^2 a^2 <= a^2 b^2.
            for (long dx = a; dx >= 0; --dx)
            {
                if (dx * dx * b * b + dy * dy * a * a <= a * a * b * b)
                {
                    half = static_cast<int>(dx);
                    break;
                }
            }
            break;
        }
        rows[static_cast<std::size_t>(dy + b)] = half;
    }
    return rows;
}

std::vector<KernelOffset> StructuringElement::footprint() const
{
    const auto rows = row_half_widths();
    const int b = (height - 1) / 2;
    std::vector<KernelOffset> out;
    for (int i = 0; i < height; ++i)
    {
        for (int dx = -rows[i]; dx <= rows[i]; ++dx)
            out.push_back({i - b, dx});
    }
    return out;
}

// ---------------------------------------------------------------------------
// PipelineConfig
// ---------------------------------------------------------------------------

std::string_view to_string(OutputMapMode mode)
{
    return mode == OutputMapMode::binary ? "binary" : "blended";
}

OutputMapMode parse_output_map_mode(std::string_view text)
{
    if (text == "binary")
        return OutputMapMode::binary;
    if (text == "blended")
        return OutputMapMode::blended;
    throw ConfigError("output_map_mode: unknown mode '" + std::string(text) +
                      "' (expected binary or blended)");
}

PipelineConfig validate_config(const PipelineConfig& config)
{
    PipelineConfig out = config;
    if (!(config.extreme_threshold > 0.0 && config.extreme_threshold < 1.0))
    {
        throw ConfigError("extreme_threshold: must lie in (0, 1), got " +
                          std::to_string(config.extreme_threshold));
    }
    if (config.k_positive < 1)
        throw ConfigError("k_positive: must be >= 1, got " + std::to_string(config.k_positive));
    if (config.k_negative < 0)
        throw ConfigError("k_negative: must be >= 0, got " + std::to_string(config.k_negative));
    if (!std::isfinite(config.min_spacing) || config.min_spacing < 0.0)
        throw ConfigError("min_spacing: must be a finite value >= 0");
    out.kernel = config.kernel.normalized();
    if (config.cascade_depth < 1 || config.cascade_depth > 3)
    {
        throw ConfigError("cascade_depth: must be 1, 2 or 3, got " +
                          std::to_string(config.cascade_depth));
    }
    if (config.working_resolution < 64)
    {
        throw ConfigError("working_resolution: must be >= 64, got " +
                          std::to_string(config.working_resolution));
    }
    if (!(config.blend_weight >= 0.0 && config.blend_weight <= 1.0))
    {
        throw ConfigError("blend_weight: must lie in [0, 1], got " +
                          std::to_string(config.blend_weight));
    }
    return out;
}

}  // namespace zsas
