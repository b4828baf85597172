#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "zsas/backend.hpp"
#include "zsas/core_types.hpp"

// Deterministic synthetic scenes and a segmenter/scorer pair whose behaviour
// is defined exactly, so pipeline properties can be asserted without models.
namespace zsas::synthetic {

enum class SceneKind { good, blob, noisy };

std::string_view to_string(SceneKind kind);
SceneKind parse_scene_kind(std::string_view text);

/// Latent region labels used by the generator.
inline constexpr int kBackgroundLabel = 0;
inline constexpr int kObjectLabel = 1;
inline constexpr int kStripeLabel = 2;
inline constexpr int kAnomalyLabel = 3;
inline constexpr int kRegionCount = 4;
inline constexpr int kFeatureChannels = 8;
inline constexpr int kFeatureStride = 8;  ///< working pixels per feature cell
inline constexpr int kLogitStride = 4;    ///< working pixels per logit cell

/// Spurious pixels the decoder attaches to `region` under sparse prompting.
struct NoiseComponent
{
    int region = 0;
    std::vector<std::size_t> pixels;  ///< flat row-major indices, sorted
};

struct SyntheticScene
{
    std::string id;
    SceneKind kind = SceneKind::blob;
    int resolution = 0;
    std::vector<int> labels;  ///< row-major latent region map
    std::vector<std::vector<float>> region_features;  ///< indexed by label
    std::vector<NoiseComponent> noise;
    BinaryMask anomaly_truth = BinaryMask::empty(1, 1);
    ScoreGrid anomaly_map = ScoreGrid::filled(1, 1, 0.0f);  ///< scorer output

    int label_at(int y, int x) const
    {
        return labels[static_cast<std::size_t>(y) * resolution + x];
    }
    BinaryMask region_mask(int label) const;
};

struct SceneSpec
{
    std::string id;
    SceneKind kind = SceneKind::blob;
    std::uint64_t seed = 0;
    int resolution = 256;
};

SyntheticScene generate_scene(const SceneSpec& spec);

RgbImage render(const SyntheticScene& scene);

/// Area-weighted region features on the (resolution / 8)^2 feature grid.
FeatureGrid scene_features(const SyntheticScene& scene);

/// The decoder semantics:
///  - base mask: regions hit by a positive point minus regions hit by a negative;
///  - a box prompt crops the mask to the box;
///  - noise components of included regions are attached only when neither a
///    box nor a dense logit is given;
///  - score = |noise-free mask| / |mask| (0 for an empty mask);
///  - logit = +1 on the mask, -1 elsewhere, resized to the logit resolution;
///  - multimask adds one candidate per included region after the union.
std::vector<DecodeCandidate> synthetic_decode(const SyntheticScene& scene, const PromptSet& prompts,
                                              bool multimask);

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

struct SuiteSpec
{
    std::string category = "synthetic";
    std::uint64_t seed = 0;
    int resolution = 256;
    std::vector<SceneSpec> scenes;
};

/// good + blob + noisy scenes, ids "<category>/<kind>/<nnn>".
SuiteSpec make_suite(int good, int blob, int noisy, int resolution, std::uint64_t seed,
                     const std::string& category = "synthetic");

/// The 12-scene suite used by the CLI examples: 2 good, 4 blob, 6 noisy.
SuiteSpec bundled_suite(int resolution = 1024, std::uint64_t seed = 20240607);

nlohmann::json suite_to_json(const SuiteSpec& suite);
SuiteSpec suite_from_json(const nlohmann::json& doc);

inline constexpr const char* kSuiteFileName = "synthetic_suite.json";

/// Writes an MVTec-style dataset (images, ground truth, suite description).
void write_dataset(const std::filesystem::path& root, const SuiteSpec& suite);

SuiteSpec load_suite(const std::filesystem::path& suite_json);

// ---------------------------------------------------------------------------
// Backend
// ---------------------------------------------------------------------------

class SyntheticBackend final : public ScorerBackend, public SegmenterBackend
{
public:
    explicit SyntheticBackend(std::vector<SyntheticScene> scenes);

    std::string name() const override { return "synthetic"; }
    int native_resolution() const override { return resolution_; }
    int working_resolution() const override { return resolution_; }
    int logit_resolution() const override { return resolution_ / kLogitStride; }
    FeatureDims feature_dims() const override;

    ScoreGrid score(const ImageInput& image) const override;
    Embedding encode(const ImageInput& image) const override;
    std::vector<DecodeCandidate> decode(const Embedding& embedding, const PromptSet& prompts,
                                        bool multimask) const override;

    const SyntheticScene& scene(const std::string& id) const;

private:
    struct Entry
    {
        SyntheticScene scene;
        FeatureGrid features;
    };

    int resolution_ = 0;
    std::map<std::string, Entry> entries_;
};

std::shared_ptr<SyntheticBackend> make_backend(const SuiteSpec& suite);

BackendPair as_pair(std::shared_ptr<SyntheticBackend> backend);

}  // namespace zsas::synthetic
