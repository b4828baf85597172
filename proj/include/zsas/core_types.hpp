#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zsas/errors.hpp"

namespace zsas {

// ---------------------------------------------------------------------------
// Grids. Storage is row-major with (y, x) indexing everywhere.
// ---------------------------------------------------------------------------

/// H x W grid of finite real scores (anomaly maps, similarity maps, logits).
///
/// Immutable after construction. The `normalized` flag is only granted when
/// every value lies in [0, 1]; it is checked, never assumed.
class ScoreGrid
{
public:
    ScoreGrid(int height, int width, std::vector<float> values, bool normalized = false);

    static ScoreGrid filled(int height, int width, float value);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool normalized() const noexcept { return normalized_; }

    float at(int y, int x) const { return values_[index(y, x)]; }
    std::span<const float> values() const noexcept { return values_; }

    float min_value() const;
    float max_value() const;

    /// Copy flagged as normalized; throws DataError if any value is outside [0, 1].
    ScoreGrid as_normalized() const;

    std::size_t index(int y, int x) const noexcept
    {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    friend bool operator==(const ScoreGrid& a, const ScoreGrid& b)
    {
        return a.height_ == b.height_ && a.width_ == b.width_ && a.values_ == b.values_;
    }

private:
    int height_;
    int width_;
    std::vector<float> values_;
    bool normalized_;
};

/// H x W boolean grid. Values are stored as 0/1 bytes.
class BinaryMask
{
public:
    BinaryMask(int height, int width, std::vector<std::uint8_t> values);

    static BinaryMask empty(int height, int width);
    static BinaryMask full(int height, int width);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return values_.size(); }

    bool at(int y, int x) const { return values_[index(y, x)] != 0; }
    bool contains(int y, int x) const
    {
        return y >= 0 && y < height_ && x >= 0 && x < width_ && at(y, x);
    }
    std::span<const std::uint8_t> values() const noexcept { return values_; }

    std::size_t foreground_count() const noexcept;
    bool any() const noexcept { return foreground_count() > 0; }

    /// 0/1 score grid view of the mask (flagged normalized).
    ScoreGrid to_scores() const;

    std::size_t index(int y, int x) const noexcept
    {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    friend bool operator==(const BinaryMask& a, const BinaryMask& b)
    {
        return a.height_ == b.height_ && a.width_ == b.width_ && a.values_ == b.values_;
    }

private:
    int height_;
    int width_;
    std::vector<std::uint8_t> values_;
};

struct FeatureDims
{
    int channels = 0;
    int height = 0;
    int width = 0;

    friend bool operator==(const FeatureDims&, const FeatureDims&) = default;
};

std::string to_string(const FeatureDims& dims);

/// C x h x w feature grid, stored channel-major (C, y, x) like encoder outputs.
class FeatureGrid
{
public:
    FeatureGrid(int channels, int height, int width, std::vector<float> values);

    int channels() const noexcept { return dims_.channels; }
    int height() const noexcept { return dims_.height; }
    int width() const noexcept { return dims_.width; }
    FeatureDims dims() const noexcept { return dims_; }

    float at(int c, int y, int x) const
    {
        return values_[(static_cast<std::size_t>(c) * dims_.height + y) * dims_.width + x];
    }
    std::vector<float> vector_at(int y, int x) const;
    std::span<const float> values() const noexcept { return values_; }

    friend bool operator==(const FeatureGrid& a, const FeatureGrid& b)
    {
        return a.dims_ == b.dims_ && a.values_ == b.values_;
    }

private:
    FeatureDims dims_;
    std::vector<float> values_;
};

/// Interleaved 8-bit RGB image.
struct RgbImage
{
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;  ///< height * width * 3

    std::uint8_t at(int y, int x, int c) const
    {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

enum class Polarity { positive, negative };

std::string_view to_string(Polarity polarity);

struct PointPrompt
{
    int x = 0;  ///< column
    int y = 0;  ///< row
    Polarity polarity = Polarity::positive;
    double score = 0.0;  ///< value that ranked this point

    friend bool operator==(const PointPrompt&, const PointPrompt&) = default;
};

/// Inclusive axis-aligned box in pixel coordinates.
struct Box
{
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    bool contains(int y, int x) const noexcept
    {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }

    /// Throws DataError unless ordered and inside a height x width image.
    void validate(int height, int width) const;

    friend bool operator==(const Box&, const Box&) = default;
};

struct PromptSet
{
    std::vector<PointPrompt> points;
    std::optional<Box> box;
    std::optional<ScoreGrid> dense_logit;

    std::size_t positive_count() const noexcept;
    std::size_t negative_count() const noexcept;
    std::vector<PointPrompt> positives() const;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class KernelShape { ellipse, rectangle, cross };

std::string_view to_string(KernelShape shape);
KernelShape parse_kernel_shape(std::string_view text);

struct KernelOffset
{
    int dy;
    int dx;
};

/// Morphological structuring element. Sizes are rounded up to odd by normalized().
struct StructuringElement
{
    KernelShape shape = KernelShape::ellipse;
    int width = 25;
    int height = 25;

    bool is_normalized() const noexcept
    {
        return width >= 1 && height >= 1 && width % 2 == 1 && height % 2 == 1;
    }

    /// Odd-sized copy (even sizes round up). Throws ConfigError naming
    /// `kernel.size` for non-positive sizes.
    StructuringElement normalized() const;

    /// For each row offset dy in [-h/2, h/2], the half-width of the footprint
    /// row, or -1 when the row is empty. Every shape has contiguous rows.
    std::vector<int> row_half_widths() const;

    /// Every (dy, dx) in the footprint, row-major.
    std::vector<KernelOffset> footprint() const;

    friend bool operator==(const StructuringElement&, const StructuringElement&) = default;
};

enum class OutputMapMode { binary, blended };

std::string_view to_string(OutputMapMode mode);
OutputMapMode parse_output_map_mode(std::string_view text);

struct PipelineConfig
{
    double extreme_threshold = 0.5;
    int k_positive = 3;
    int k_negative = 3;
    double min_spacing = 400.0;  ///< pixels at working_resolution
    StructuringElement kernel{};
    int cascade_depth = 3;
    int working_resolution = 1024;
    OutputMapMode output_map_mode = OutputMapMode::binary;
    double blend_weight = 0.5;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Returns a copy with odd kernel sizes, or throws ConfigError naming the
/// offending field. Out-of-range values (blend weight included) are rejected.
PipelineConfig validate_config(const PipelineConfig& config);

}  // namespace zsas
