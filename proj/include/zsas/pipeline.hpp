#pragma once

#include "zsas/backend.hpp"
#include "zsas/cps.hpp"
#include "zsas/ppg.hpp"

namespace zsas::pipeline {

/// Scorer output resized to working resolution and min-max normalized, plus
/// the encoder features. Everything later stages need for one image.
struct PreparedImage
{
    std::string id;
    ScoreGrid anomaly;
    Embedding embedding;
};

struct ImageOutcome
{
    ppg::PpgResult ppg;
    cps::CascadeTrace cascade;
};

/// Throws ContractError unless config and backends agree on resolutions.
void check_compatible(const BackendPair& backends, const PipelineConfig& config);

PreparedImage prepare_image(const BackendPair& backends, const ImageInput& image,
                            const PipelineConfig& config);

/// Prompt generation followed by the cascade.
ImageOutcome run_prepared(const SegmenterBackend& segmenter, const PreparedImage& prepared,
                          const PipelineConfig& config);

ImageOutcome run_image(const BackendPair& backends, const ImageInput& image, const PipelineConfig& config);

}  // namespace zsas::pipeline
