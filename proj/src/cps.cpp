#include "zsas/cps.hpp"

#include "zsas/imgproc.hpp"

namespace zsas::cps {

std::size_t select_best_candidate(std::span<const DecodeCandidate> candidates)
{
    if (candidates.empty())
        throw ContractError("select_best_candidate: no candidates");
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i)
    {
        if (candidates[i].score > candidates[best].score)
            best = i;
    }
    return best;
}

StageOutput run_stage(const SegmenterBackend& segmenter, const Embedding& embedding,
                      const PromptSet& prompts, bool multimask, int stage)
{
    if (prompts.positive_count() == 0)
        throw DataError("run_stage: prompts need at least one positive point");

    std::vector<DecodeCandidate> candidates;
    try
    {
        candidates = segmenter.decode(embedding, prompts, multimask);
        check_candidates(segmenter, candidates);
    }
    catch (const BackendError&)
    {
        throw;
    }
    catch (const std::exception& e)
    {
        throw BackendError(segmenter.name() + ": " + e.what(), stage);
    }

    auto& best = candidates[select_best_candidate(candidates)];
    return {std::move(best.mask), std::move(best.logit), best.score};
}

ScoreGrid assemble_final_map(const BinaryMask& mask, const PipelineConfig& config,
                             const ScoreGrid* anomaly)
{
    if (config.output_map_mode == OutputMapMode::binary)
        return mask.to_scores();

    if (anomaly == nullptr)
        throw ConfigError("output_map_mode: blended output needs the anomaly map");
    const auto resized = imgproc::resize_bilinear(*anomaly, mask.height(), mask.width());
    const double w = config.blend_weight;
    std::vector<float> blend(mask.size());
    const auto m = mask.values();
    const auto a = resized.values();
    for (std::size_t i = 0; i < blend.size(); ++i)
        blend[i] = static_cast<float>(w * m[i] + (1.0 - w) * a[i]);
    return imgproc::minmax_normalize(ScoreGrid(mask.height(), mask.width(), std::move(blend)));
}

CascadeTrace run_cascade(const SegmenterBackend& segmenter, const Embedding& embedding,
                         const PromptSet& prompts, const PipelineConfig& config,
                         const ScoreGrid* anomaly)
{
    if (prompts.box || prompts.dense_logit)
        throw DataError("run_cascade: initial prompts must be points only");
    if (config.cascade_depth < 1 || config.cascade_depth > 3)
        throw ConfigError("cascade_depth: must be 1, 2 or 3");

    CascadeTrace trace;
    auto record = [&trace](StageOutput&& out) {
        trace.stage_masks.push_back(std::move(out.mask));
        trace.stage_logits.push_back(std::move(out.logit));
        trace.stage_scores.push_back(out.score);
    };

    // Stage 1: sparse points, let the decoder pick among its proposals.
    record(run_stage(segmenter, embedding, prompts, true, 1));
    ++trace.decoder_calls;

    if (config.cascade_depth >= 2)
    {
        PromptSet refine{prompts.points, std::nullopt, trace.stage_logits.back()};
        record(run_stage(segmenter, embedding, refine, false, 2));
        ++trace.decoder_calls;
    }

    if (config.cascade_depth >= 3)
    {
        const BinaryMask& previous = trace.stage_masks.back();
        if (!previous.any())
        {
            trace.degraded = true;
            trace.stage_masks.push_back(previous);
            trace.stage_logits.push_back(trace.stage_logits.back());
            trace.stage_scores.push_back(trace.stage_scores.back());
        }
        else
        {
            const auto anchors = prompts.positives();
            const Box box = imgproc::bounding_box(previous, anchors);
            trace.derived_box = box;
            PromptSet boxed{prompts.points, box, trace.stage_logits.back()};
            record(run_stage(segmenter, embedding, boxed, false, 3));
            ++trace.decoder_calls;
        }
    }

    trace.final_map = assemble_final_map(trace.stage_masks.back(), config, anomaly);
    return trace;
}

}  // namespace zsas::cps
