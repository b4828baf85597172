#include "zsas/backend.hpp"

#include "zsas/io.hpp"

namespace zsas {

RgbImage ImageInput::load_pixels() const
{
    if (pixels)
        return *pixels;
    if (path.empty())
        throw DataError("image '" + id + "' has neither pixels nor a path");
    return io::read_rgb_png(path);
}

void check_candidates(const SegmenterBackend& segmenter, std::span<const DecodeCandidate> candidates)
{
    if (candidates.empty())
        throw ContractError(segmenter.name() + ": decode returned no candidates");
    const int wr = segmenter.working_resolution();
    const int lr = segmenter.logit_resolution();
    for (const auto& c : candidates)
    {
        if (c.mask.height() != wr || c.mask.width() != wr)
        {
            throw ContractError(segmenter.name() + ": candidate mask is " +
                                std::to_string(c.mask.height()) + "x" +
                                std::to_string(c.mask.width()) + ", expected " +
                                std::to_string(wr) + "x" + std::to_string(wr));
        }
        if (c.logit.height() != lr || c.logit.width() != lr)
        {
            throw ContractError(segmenter.name() + ": candidate logit is " +
                                std::to_string(c.logit.height()) + "x" +
                                std::to_string(c.logit.width()) + ", expected " +
                                std::to_string(lr) + "x" + std::to_string(lr));
        }
    }
}

void check_embedding(const SegmenterBackend& segmenter, const Embedding& embedding)
{
    if (embedding.features.dims() != segmenter.feature_dims())
    {
        throw ContractError(segmenter.name() + ": features for '" + embedding.image_id +
                            "' have dims " + to_string(embedding.features.dims()) +
                            ", expected " + to_string(segmenter.feature_dims()));
    }
}

CountingSegmenter::CountingSegmenter(std::shared_ptr<const SegmenterBackend> inner)
    : inner_(std::move(inner))
{}

Embedding CountingSegmenter::encode(const ImageInput& image) const
{
    ++encode_calls_;
    return inner_->encode(image);
}

std::vector<DecodeCandidate> CountingSegmenter::decode(const Embedding& embedding,
                                                       const PromptSet& prompts,
                                                       bool multimask) const
{
    ++decode_calls_;
    return inner_->decode(embedding, prompts, multimask);
}

}  // namespace zsas
