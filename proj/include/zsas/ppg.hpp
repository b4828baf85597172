#pragma once

#include <span>
#include <vector>

#include "zsas/core_types.hpp"

namespace zsas::ppg {

/// Intermediate maps of one prompt-generation run, kept for debug dumps.
struct PpgIntermediates
{
    BinaryMask extreme_mask;        ///< pixels at or above the extreme threshold
    ScoreGrid masked_anomaly;       ///< anomaly map restricted to extreme_mask
    BinaryMask ring_mask;           ///< dilation ring around extreme_mask
    BinaryMask feature_extreme;     ///< extreme_mask pooled onto the feature grid
    BinaryMask feature_ring;        ///< feature cells that hold ring pixels
    ScoreGrid similarity;           ///< cosine to the extreme-region prototype; +1 off-ring
    bool degraded = false;          ///< no pixel reached the threshold
};

struct PpgResult
{
    PromptSet prompts;
    PpgIntermediates intermediates;
};

/// Element-wise product of the mask (as 0/1) and the anomaly map.
ScoreGrid masked_anomaly(const BinaryMask& extreme_mask, const ScoreGrid& anomaly);

enum class SelectOrder { highest, lowest };

/// Greedy spaced selection: repeatedly takes the best remaining pixel inside
/// `domain` (whole grid when null) that lies at least `min_spacing` away from
/// every point taken so far. Ties go to raster order. Points come back in
/// selection order with positive polarity; the caller sets polarity.
std::vector<PointPrompt> select_spaced_topk(const ScoreGrid& grid, int k, double min_spacing,
                                            SelectOrder order, const BinaryMask* domain = nullptr);

/// A scored location for select_spaced(). `rank` breaks value ties (lower first).
struct Candidate
{
    double value;
    int y;
    int x;
    std::size_t rank;
};

/// select_spaced_topk over an explicit candidate list; spacing is measured on
/// the candidates' (y, x).
std::vector<PointPrompt> select_spaced(std::vector<Candidate> candidates, int k,
                                       double min_spacing, SelectOrder order);

/// Channel-wise mean feature over the mask's foreground.
std::vector<double> region_prototype(const FeatureGrid& features, const BinaryMask& mask);

/// Cosine similarity to `prototype` on ring pixels, +1 elsewhere. Zero-norm
/// pixel vectors score 0; an all-zero prototype throws DegenerateFeatureError.
ScoreGrid similarity_map(const FeatureGrid& features, const BinaryMask& ring,
                         std::span<const double> prototype);

/// Full positive/negative point generation for one image.
///
/// `anomaly` is the normalized map at working resolution; `features` is the
/// encoder grid (any resolution). Negatives are mined on the feature grid and
/// mapped back to the ring pixel closest to their cell center.
PpgResult generate_prompts(const ScoreGrid& anomaly, const FeatureGrid& features,
                           const PipelineConfig& config);

}  // namespace zsas::ppg
