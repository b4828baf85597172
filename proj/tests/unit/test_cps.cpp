#include <doctest.h>

#include <functional>

#include "zsas/cps.hpp"
#include "zsas/imgproc.hpp"
#include "zsas/synthetic.hpp"

using namespace zsas;
using namespace zsas::cps;

namespace {

constexpr int kRes = 16;
constexpr int kLogit = 4;

BinaryMask rect_mask(int y0, int x0, int y1, int x1)
{
    std::vector<std::uint8_t> v(kRes * kRes, 0);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            v[y * kRes + x] = 1;
    return BinaryMask(kRes, kRes, std::move(v));
}

/// Scripted segmenter: records prompts and answers through a callback.
class FakeSegmenter final : public SegmenterBackend
{
public:
    using Answer = std::function<std::vector<DecodeCandidate>(const PromptSet&, bool, int)>;

    explicit FakeSegmenter(Answer answer) : answer_(std::move(answer)) {}

    std::string name() const override { return "fake"; }
    int working_resolution() const override { return kRes; }
    int logit_resolution() const override { return kLogit; }
    FeatureDims feature_dims() const override { return {1, 2, 2}; }
    Embedding encode(const ImageInput& image) const override
    {
        return {image.id, FeatureGrid(1, 2, 2, {1, 1, 1, 1})};
    }
    std::vector<DecodeCandidate> decode(const Embedding&, const PromptSet& prompts, bool multimask) const override
    {
        seen.push_back(prompts);
        multimask_flags.push_back(multimask);
        return answer_(prompts, multimask, static_cast<int>(seen.size()));
    }

    mutable std::vector<PromptSet> seen;
    mutable std::vector<bool> multimask_flags;

private:
    Answer answer_;
};

DecodeCandidate candidate(const BinaryMask& mask, double score)
{
    return {mask, imgproc::resize_bilinear(mask.to_scores(), kLogit, kLogit), score};
}

const Embedding kEmbedding{"img", FeatureGrid(1, 2, 2, {1, 1, 1, 1})};

PromptSet two_points()
{
    PromptSet p;
    p.points = {{3, 3, Polarity::positive, 1.0}, {12, 12, Polarity::negative, 0.1}};
    return p;
}

}  // namespace

TEST_CASE("best candidate takes the first of equal scores")
{
    const auto m = BinaryMask::empty(kRes, kRes);
    const auto l = ScoreGrid::filled(kLogit, kLogit, 0.0f);
    const std::vector<DecodeCandidate> c{{m, l, 0.2}, {m, l, 0.9}, {m, l, 0.9}};
    CHECK(select_best_candidate(c) == 1);
    CHECK_THROWS_AS(select_best_candidate(std::vector<DecodeCandidate>{}), ContractError);
}

TEST_CASE("three stages with the expected prompts")
{
    const auto A = rect_mask(1, 1, 8, 8);
    const auto B = rect_mask(1, 6, 8, 8);
    const auto AminusB = imgproc::mask_minus(A, B);
    FakeSegmenter seg([&](const PromptSet&, bool, int call) {
        if (call == 1)
            return std::vector<DecodeCandidate>{candidate(B, 0.3), candidate(A, 0.8)};
        if (call == 2)
            return std::vector<DecodeCandidate>{candidate(AminusB, 0.9)};
        return std::vector<DecodeCandidate>{candidate(AminusB, 0.95)};
    });

    PipelineConfig config;
    config.working_resolution = kRes;
    const auto prompts = two_points();
    const auto trace = run_cascade(seg, kEmbedding, prompts, config);

    REQUIRE(seg.seen.size() == 3);
    CHECK(trace.decoder_calls == 3);
    CHECK(seg.multimask_flags == std::vector<bool>{true, false, false});

    CHECK(seg.seen[0].points == prompts.points);
    CHECK_FALSE(seg.seen[0].box);
    CHECK_FALSE(seg.seen[0].dense_logit);

    CHECK(seg.seen[1].points == prompts.points);
    CHECK_FALSE(seg.seen[1].box);
    REQUIRE(seg.seen[1].dense_logit);
    CHECK(*seg.seen[1].dense_logit == trace.stage_logits[0]);

    CHECK(seg.seen[2].points == prompts.points);
    REQUIRE(seg.seen[2].box);
    CHECK(*seg.seen[2].box == Box{1, 1, 5, 8});
    REQUIRE(seg.seen[2].dense_logit);
    CHECK(*seg.seen[2].dense_logit == trace.stage_logits[1]);

    REQUIRE(trace.stage_masks.size() == 3);
    CHECK(trace.stage_masks[0] == A);
    CHECK(trace.stage_masks[1] == AminusB);
    CHECK(trace.stage_scores == std::vector<double>{0.8, 0.9, 0.95});
    CHECK(trace.derived_box == Box{1, 1, 5, 8});
    CHECK_FALSE(trace.degraded);
    CHECK(trace.final_map == trace.stage_masks[2].to_scores());
}

TEST_CASE("cascade depth gates the later stages")
{
    const auto A = rect_mask(2, 2, 5, 5);
    for (int depth : {1, 2, 3})
    {
        FakeSegmenter seg([&](const PromptSet&, bool, int) { return std::vector<DecodeCandidate>{candidate(A, 1)}; });
        PipelineConfig config;
        config.cascade_depth = depth;
        const auto trace = run_cascade(seg, kEmbedding, two_points(), config);
        CHECK(trace.decoder_calls == depth);
        CHECK(static_cast<int>(seg.seen.size()) == depth);
        CHECK(static_cast<int>(trace.stage_masks.size()) == depth);
        CHECK(trace.derived_box.has_value() == (depth == 3));
    }
    PipelineConfig bad;
    bad.cascade_depth = 4;
    FakeSegmenter seg([&](const PromptSet&, bool, int) { return std::vector<DecodeCandidate>{candidate(A, 1)}; });
    CHECK_THROWS_AS(run_cascade(seg, kEmbedding, two_points(), bad), ConfigError);
}

TEST_CASE("an empty stage-2 mask skips the box stage")
{
    const auto A = rect_mask(2, 2, 5, 5);
    const auto none = BinaryMask::empty(kRes, kRes);
    FakeSegmenter seg([&](const PromptSet&, bool, int call) {
        return std::vector<DecodeCandidate>{candidate(call == 1 ? A : none, 0.5)};
    });
    PipelineConfig config;
    const auto trace = run_cascade(seg, kEmbedding, two_points(), config);
    CHECK(trace.degraded);
    CHECK(trace.decoder_calls == 2);
    REQUIRE(trace.stage_masks.size() == 3);
    CHECK(trace.stage_masks[2] == none);
    CHECK_FALSE(trace.derived_box);
    CHECK(trace.final_map.max_value() == 0.0);
}

TEST_CASE("backend failures carry the stage")
{
    const auto A = rect_mask(2, 2, 5, 5);
    FakeSegmenter seg([&](const PromptSet&, bool, int call) -> std::vector<DecodeCandidate> {
        if (call == 2)
            throw std::runtime_error("boom");
        return {candidate(A, 1)};
    });
    PipelineConfig config;
    try
    {
        run_cascade(seg, kEmbedding, two_points(), config);
        FAIL("expected BackendError");
    }
    catch (const BackendError& e)
    {
        CHECK(e.stage() == 2);
        CHECK(std::string(e.what()).find("boom") != std::string::npos);
    }
}

TEST_CASE("wrong candidate sizes are backend errors")
{
    FakeSegmenter seg([&](const PromptSet&, bool, int) {
        return std::vector<DecodeCandidate>{
            {BinaryMask::full(8, 8), ScoreGrid::filled(kLogit, kLogit, 1.0f), 1.0}};
    });
    CHECK_THROWS_AS(run_stage(seg, kEmbedding, two_points(), true, 1), BackendError);

    PromptSet negatives_only;
    negatives_only.points = {{1, 1, Polarity::negative, 0.0}};
    CHECK_THROWS_AS(run_stage(seg, kEmbedding, negatives_only, true, 1), DataError);
}

TEST_CASE("initial prompts must be points only")
{
    FakeSegmenter seg([&](const PromptSet&, bool, int) { return std::vector<DecodeCandidate>{}; });
    auto p = two_points();
    p.box = Box{0, 0, 3, 3};
    CHECK_THROWS_AS(run_cascade(seg, kEmbedding, p, PipelineConfig{}), DataError);
}

TEST_CASE("the final box mask stays inside the derived box on synthetic scenes")
{
    const auto suite = synthetic::make_suite(0, 3, 5, 128, 3);
    const auto backend = synthetic::make_backend(suite);
    for (const auto& spec : suite.scenes)
    {
        const auto& scene = backend->scene(spec.id);
        const auto emb = backend->encode({spec.id, {}, {}});
        PromptSet prompts;
        // A positive inside the anomaly.
        for (int y = 0; y < 128 && prompts.points.empty(); ++y)
            for (int x = 0; x < 128 && prompts.points.empty(); ++x)
                if (scene.anomaly_truth.at(y, x))
                    prompts.points.push_back({x, y, Polarity::positive, 1.0});
        const auto trace = run_cascade(*backend, emb, prompts, PipelineConfig{});
        REQUIRE(trace.derived_box);
        const auto& box = *trace.derived_box;
        const auto& m3 = trace.stage_masks[2];
        for (int y = 0; y < 128; ++y)
            for (int x = 0; x < 128; ++x)
                if (m3.at(y, x))
                    CHECK(box.contains(y, x));
        CHECK(imgproc::iou(m3, scene.anomaly_truth) == 1.0);
    }
}

TEST_CASE("final map assembly")
{
    const auto m = BinaryMask(1, 4, {0, 1, 1, 0});
    PipelineConfig config;
    CHECK(assemble_final_map(m, config) == m.to_scores());

    config.output_map_mode = OutputMapMode::blended;
    config.blend_weight = 0.5;
    CHECK_THROWS_AS(assemble_final_map(m, config), ConfigError);
    const ScoreGrid anomaly(1, 4, {1.0f, 0.0f, 0.5f, 0.0f}, true);
    const auto f = assemble_final_map(m, config, &anomaly);
    // Raw blend 0.5, 0.5, 0.75, 0 -> normalized.
    CHECK(f.at(0, 0) == doctest::Approx(0.5 / 0.75));
    CHECK(f.at(0, 1) == doctest::Approx(0.5 / 0.75));
    CHECK(f.at(0, 2) == doctest::Approx(1.0));
    CHECK(f.at(0, 3) == doctest::Approx(0.0));
    CHECK(f.min_value() >= 0.0);
    CHECK(f.max_value() <= 1.0);

    config.blend_weight = 1.0;
    CHECK(assemble_final_map(m, config, &anomaly) == m.to_scores());
}
