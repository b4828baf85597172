#pragma once

#include <span>
#include <vector>

#include "zsas/core_types.hpp"

namespace zsas::imgproc {

/// Min-max rescale to [0, 1]; constant grids map to all zeros. Output is
/// flagged normalized.
ScoreGrid minmax_normalize(const ScoreGrid& grid);

/// Pixel is true iff value >= threshold. Requires a normalized grid and a
/// threshold in [0, 1] (ConfigError otherwise).
BinaryMask binarize(const ScoreGrid& grid, double threshold);

/// Binary dilation with the footprint clipped at the image border. The
/// element must already be normalized (odd sizes).
BinaryMask dilate(const BinaryMask& mask, const StructuringElement& element);

/// dilate(mask) AND NOT mask.
BinaryMask ring(const BinaryMask& mask, const StructuringElement& element);

/// 8-connected labeling; labels follow raster order of first encounter.
struct ComponentLabels
{
    int height = 0;
    int width = 0;
    std::vector<int> labels;  ///< 0 = background
    int component_count = 0;
    std::vector<std::size_t> component_areas;  ///< areas[i] is the size of label i + 1

    int at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

ComponentLabels connected_components(const BinaryMask& mask);

/// Tight box around every component that contains a positive anchor; falls
/// back to the largest component (ties to the lowest label) when no anchor
/// hits. Throws EmptyRegionError for an empty mask.
Box bounding_box(const BinaryMask& mask, std::span<const PointPrompt> anchors);

/// Bilinear resize with pixel-center alignment (align_corners = false);
/// returns an exact copy when the size is unchanged.
ScoreGrid resize_bilinear(const ScoreGrid& grid, int out_height, int out_width);

// Small mask helpers shared by ppg, cps and the backends.

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_minus(const BinaryMask& a, const BinaryMask& b);

/// Keeps only pixels inside `box`.
BinaryMask mask_crop_to_box(const BinaryMask& mask, const Box& box);

/// Nearest-neighbour (pixel-center) resampling of a mask.
BinaryMask resize_nearest(const BinaryMask& mask, int out_height, int out_width);

/// |a AND b| / |a OR b|; 1.0 when both are empty.
double iou(const BinaryMask& a, const BinaryMask& b);

}  // namespace zsas::imgproc
