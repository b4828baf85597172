#pragma once

#include <optional>
#include <span>
#include <vector>

#include "zsas/backend.hpp"
#include "zsas/core_types.hpp"

namespace zsas::cps {

struct StageOutput
{
    BinaryMask mask;
    ScoreGrid logit;
    double score = 0.0;
};

/// Index of the highest-scoring candidate; the first one wins ties.
std::size_t select_best_candidate(std::span<const DecodeCandidate> candidates);

/// One decoder pass. Backend failures are rethrown as BackendError tagged
/// with `stage` (1-based).
StageOutput run_stage(const SegmenterBackend& segmenter, const Embedding& embedding,
                      const PromptSet& prompts, bool multimask, int stage = 1);

/// Everything the cascade produced for one image.
struct CascadeTrace
{
    std::vector<BinaryMask> stage_masks;
    std::vector<ScoreGrid> stage_logits;
    std::vector<double> stage_scores;
    std::optional<Box> derived_box;
    ScoreGrid final_map = ScoreGrid::filled(1, 1, 0.0f);
    bool degraded = false;  ///< stage-2 mask was empty, so stage 3 reused it
    int decoder_calls = 0;
};

/// Stage 1: points, multimask. Stage 2: points + previous logit. Stage 3:
/// points + anchored box of the stage-2 mask + stage-2 logit. Stages beyond
/// config.cascade_depth are skipped.
///
/// `anomaly` (normalized, any size) is required only for blended output.
CascadeTrace run_cascade(const SegmenterBackend& segmenter, const Embedding& embedding,
                         const PromptSet& prompts, const PipelineConfig& config,
                         const ScoreGrid* anomaly = nullptr);

/// Output map from a stage mask: the mask as 0/1 in binary mode, or the
/// min-max normalized blend w * mask + (1 - w) * anomaly in blended mode.
ScoreGrid assemble_final_map(const BinaryMask& mask, const PipelineConfig& config,
                             const ScoreGrid* anomaly = nullptr);

}  // namespace zsas::cps
