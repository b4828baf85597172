#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zsas/core_types.hpp"

namespace zsas {

/// What a backend receives for one image. Synthetic and file backends key on
/// `id`; inference backends read `pixels`, or load `path` when absent.
struct ImageInput
{
    std::string id;
    std::filesystem::path path;
    std::optional<RgbImage> pixels;

    RgbImage load_pixels() const;
};

/// Encoder output for one image.
struct Embedding
{
    std::string image_id;
    FeatureGrid features;
};

/// One decoder proposal.
struct DecodeCandidate
{
    BinaryMask mask;   ///< working_resolution x working_resolution
    ScoreGrid logit;   ///< logit_resolution x logit_resolution
    double score = 0;  ///< predicted quality
};

/// Produces per-pixel anomaly scores.
class ScorerBackend
{
public:
    virtual ~ScorerBackend() = default;

    virtual std::string name() const = 0;
    virtual int native_resolution() const = 0;

    /// Normalized map at native_resolution.
    virtual ScoreGrid score(const ImageInput& image) const = 0;
};

/// Promptable segmenter: an image encoder plus a prompt-conditioned mask decoder.
///
/// decode() must be safe to call concurrently; implementations may serialize.
class SegmenterBackend
{
public:
    virtual ~SegmenterBackend() = default;

    virtual std::string name() const = 0;
    virtual int working_resolution() const = 0;
    virtual int logit_resolution() const = 0;
    virtual FeatureDims feature_dims() const = 0;

    virtual Embedding encode(const ImageInput& image) const = 0;
    virtual std::vector<DecodeCandidate> decode(const Embedding& embedding,
                                                const PromptSet& prompts,
                                                bool multimask) const = 0;
};

struct BackendPair
{
    std::shared_ptr<const ScorerBackend> scorer;
    std::shared_ptr<const SegmenterBackend> segmenter;
};

/// Throws ContractError unless every candidate carries a mask at
/// working_resolution and a logit at logit_resolution.
void check_candidates(const SegmenterBackend& segmenter, std::span<const DecodeCandidate> candidates);

/// Throws ContractError unless the grid has the segmenter's feature_dims.
void check_embedding(const SegmenterBackend& segmenter, const Embedding& embedding);

/// Pass-through segmenter that counts decode() calls.
class CountingSegmenter : public SegmenterBackend
{
public:
    explicit CountingSegmenter(std::shared_ptr<const SegmenterBackend> inner);

    std::string name() const override { return inner_->name(); }
    int working_resolution() const override { return inner_->working_resolution(); }
    int logit_resolution() const override { return inner_->logit_resolution(); }
    FeatureDims feature_dims() const override { return inner_->feature_dims(); }

    Embedding encode(const ImageInput& image) const override;
    std::vector<DecodeCandidate> decode(const Embedding& embedding, const PromptSet& prompts,
                                        bool multimask) const override;

    long decode_calls() const noexcept { return decode_calls_.load(); }
    long encode_calls() const noexcept { return encode_calls_.load(); }

private:
    std::shared_ptr<const SegmenterBackend> inner_;
    mutable std::atomic<long> decode_calls_{0};
    mutable std::atomic<long> encode_calls_{0};
};

}  // namespace zsas
