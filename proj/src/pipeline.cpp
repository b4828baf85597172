#include "zsas/pipeline.hpp"

#include "zsas/imgproc.hpp"

namespace zsas::pipeline {

void check_compatible(const BackendPair& backends, const PipelineConfig& config)
{
    if (!backends.scorer || !backends.segmenter)
        throw ContractError("pipeline needs both a scorer and a segmenter");
    const int wr = backends.segmenter->working_resolution();
    if (config.working_resolution != wr)
    {
        throw ContractError("working_resolution " + std::to_string(config.working_resolution) +
                            " does not match segmenter '" + backends.segmenter->name() + "' (" +
                            std::to_string(wr) + ")");
    }
}

PreparedImage prepare_image(const BackendPair& backends, const ImageInput& image,
                            const PipelineConfig& config)
{
    check_compatible(backends, config);
    const int wr = config.working_resolution;

    const auto raw = backends.scorer->score(image);
    const int nr = backends.scorer->native_resolution();
    if (raw.height() != nr || raw.width() != nr)
    {
        throw ContractError("scorer '" + backends.scorer->name() + "' returned " +
                            std::to_string(raw.height()) + "x" + std::to_string(raw.width()) +
                            " for '" + image.id + "', expected " + std::to_string(nr) + "x" +
                            std::to_string(nr));
    }
    auto anomaly = imgproc::minmax_normalize(imgproc::resize_bilinear(raw, wr, wr));

    auto embedding = backends.segmenter->encode(image);
    check_embedding(*backends.segmenter, embedding);
    return {image.id, std::move(anomaly), std::move(embedding)};
}

ImageOutcome run_prepared(const SegmenterBackend& segmenter, const PreparedImage& prepared,
                          const PipelineConfig& config)
{
    auto ppg = ppg::generate_prompts(prepared.anomaly, prepared.embedding.features, config);
    auto trace = cps::run_cascade(segmenter, prepared.embedding, ppg.prompts, config, &prepared.anomaly);
    return {std::move(ppg), std::move(trace)};
}

ImageOutcome run_image(const BackendPair& backends, const ImageInput& image, const PipelineConfig& config)
{
    const auto prepared = prepare_image(backends, image, config);
    return run_prepared(*backends.segmenter, prepared, config);
}

}  // namespace zsas::pipeline
