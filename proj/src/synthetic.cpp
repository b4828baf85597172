#include "zsas/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "zsas/imgproc.hpp"
#include "zsas/io.hpp"

namespace zsas::synthetic {

namespace {

/// Portable uniform draws: std distributions are implementation-defined.
class Rng
{
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }

private:
    std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index)
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

struct Ellipse
{
    double cy;
    double cx;
    double ry;
    double rx;

    /// Normalized radius; <= 1 inside.
    double rho(int y, int x) const
    {
        const double dy = (y - cy) / ry;
        const double dx = (x - cx) / rx;
        return std::sqrt(dy * dy + dx * dx);
    }
};

}  // namespace

std::string_view to_string(SceneKind kind)
{
    switch (kind)
    {
    case SceneKind::good: return "good";
    case SceneKind::blob: return "blob";
    case SceneKind::noisy: return "noisy";
    }
    return "?";
}

SceneKind parse_scene_kind(std::string_view text)
{
    if (text == "good")
        return SceneKind::good;
    if (text == "blob")
        return SceneKind::blob;
    if (text == "noisy")
        return SceneKind::noisy;
    throw DataError("unknown synthetic scene kind '" + std::string(text) + "'");
}

BinaryMask SyntheticScene::region_mask(int label) const
{
    std::vector<std::uint8_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        out[i] = labels[i] == label ? 1 : 0;
    return BinaryMask(resolution, resolution, std::move(out));
}

SyntheticScene generate_scene(const SceneSpec& spec)
{
    const int S = spec.resolution;
    if (S < 64 || S % kFeatureStride != 0)
        throw ConfigError("synthetic resolution must be >= 64 and a multiple of 8, got " +
                          std::to_string(S));

    Rng rng(spec.seed);
    SyntheticScene scene;
    scene.id = spec.id;
    scene.kind = spec.kind;
    scene.resolution = S;
    scene.labels.assign(static_cast<std::size_t>(S) * S, kBackgroundLabel);

    const Ellipse object{S / 2.0 + rng.uniform(-0.03, 0.03) * S, S / 2.0 + rng.uniform(-0.03, 0.03) * S,
                         rng.uniform(0.36, 0.44) * S, rng.uniform(0.36, 0.44) * S};
    const double stripe_top = object.cy + rng.uniform(0.16, 0.20) * S;
    const double stripe_bottom = stripe_top + rng.uniform(0.05, 0.08) * S;

    const bool has_anomaly = spec.kind != SceneKind::good;
    Ellipse anomaly{0, 0, 1, 1};
    if (has_anomaly)
    {
        const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        const double dist = rng.uniform(0.0, 0.16) * S;
        anomaly = {object.cy + dist * std::sin(angle), object.cx + dist * std::cos(angle),
                   std::max(2.0, rng.uniform(0.04, 0.08) * S), std::max(2.0, rng.uniform(0.04, 0.08) * S)};
    }

    for (int y = 0; y < S; ++y)
    {
        for (int x = 0; x < S; ++x)
        {
            int label = kBackgroundLabel;
            if (object.rho(y, x) <= 1.0)
                label = (y >= stripe_top && y < stripe_bottom) ? kStripeLabel : kObjectLabel;
            if (has_anomaly && anomaly.rho(y, x) <= 1.0)
                label = kAnomalyLabel;
            scene.labels[static_cast<std::size_t>(y) * S + x] = label;
        }
    }

    scene.region_features.resize(kRegionCount);
    for (auto& f : scene.region_features)
    {
        f.resize(kFeatureChannels);
        for (auto& v : f)
            v = static_cast<float>(rng.uniform(-1.0, 1.0));
    }

    scene.anomaly_truth = scene.region_mask(kAnomalyLabel);

    if (spec.kind == SceneKind::noisy)
    {
        // Far-away specks.
        const int specks = rng.integer(1, 3);
        for (int i = 0; i < specks; ++i)
        {
            const double radius = std::max(1.0, rng.uniform(0.012, 0.025) * S);
            double cy = 0;
            double cx = 0;
            for (int attempt = 0; attempt < 1000; ++attempt)
            {
                cy = rng.uniform(radius, S - 1 - radius);
                cx = rng.uniform(radius, S - 1 - radius);
                if (std::hypot(cy - anomaly.cy, cx - anomaly.cx) >=
                    0.3 * S + std::max(anomaly.ry, anomaly.rx))
                    break;
            }
            NoiseComponent speck{kAnomalyLabel, {}};
            for (int y = 0; y < S; ++y)
            {
                for (int x = 0; x < S; ++x)
                {
                    if (std::hypot(y - cy, x - cx) <= radius &&
                        !scene.anomaly_truth.at(y, x))
                        speck.pixels.push_back(static_cast<std::size_t>(y) * S + x);
                }
            }
            if (!speck.pixels.empty())
                scene.noise.push_back(std::move(speck));
        }

        // Rough upper edge hugging the region.
        const auto band = imgproc::ring(scene.anomaly_truth, StructuringElement{KernelShape::rectangle, 5, 5});
        NoiseComponent edge{kAnomalyLabel, {}};
        for (int y = 0; y < S; ++y)
        {
            for (int x = 0; x < S; ++x)
            {
                if (band.at(y, x) && y < anomaly.cy - 0.3 * anomaly.ry)
                    edge.pixels.push_back(static_cast<std::size_t>(y) * S + x);
            }
        }
        if (!edge.pixels.empty())
            scene.noise.push_back(std::move(edge));
    }

    // Scorer output: a plateau on the anomaly and a low, noisy halo elsewhere,
    // so the default threshold recovers the anomalous region.
    std::vector<float> map(static_cast<std::size_t>(S) * S);
    const double halo = 0.06 * S;
    const double mean_radius = 0.5 * (anomaly.ry + anomaly.rx);
    for (int y = 0; y < S; ++y)
    {
        for (int x = 0; x < S; ++x)
        {
            const double u = rng.uniform();
            double v = 0.0;
            if (!has_anomaly)
            {
                v = 0.1 + 0.2 * u;
            }
            else
            {
                const double rho = anomaly.rho(y, x);
                if (scene.label_at(y, x) == kAnomalyLabel)
                {
                    v = 0.75 + 0.25 * std::exp(-rho * rho / (2.0 * 0.25));
                }
                else
                {
                    const double out = std::max(0.0, rho - 1.0) * mean_radius;
                    v = 0.30 * std::exp(-out * out / (2.0 * halo * halo)) + 0.08 * u;
                }
            }
            map[static_cast<std::size_t>(y) * S + x] = static_cast<float>(v);
        }
    }
    scene.anomaly_map = ScoreGrid(S, S, std::move(map), true);
    return scene;
}

RgbImage render(const SyntheticScene& scene)
{
    constexpr std::uint8_t kColors[kRegionCount][3] = {
        {40, 42, 46}, {150, 150, 145}, {110, 120, 140}, {95, 62, 48}};
    const int S = scene.resolution;
    RgbImage img;
    img.height = S;
    img.width = S;
    img.pixels.resize(static_cast<std::size_t>(S) * S * 3);
    for (int y = 0; y < S; ++y)
    {
        for (int x = 0; x < S; ++x)
        {
            // Cheap deterministic texture.
            const int texture = static_cast<int>((mix_seed(static_cast<std::uint64_t>(y) * S + x, 7) >> 60)) - 8;
            const auto& c = kColors[scene.label_at(y, x)];
            for (int ch = 0; ch < 3; ++ch)
            {
                img.pixels[(static_cast<std::size_t>(y) * S + x) * 3 + ch] =
                    static_cast<std::uint8_t>(std::clamp(c[ch] + texture, 0, 255));
            }
        }
    }
    return img;
}

FeatureGrid scene_features(const SyntheticScene& scene)
{
    const int S = scene.resolution;
    const int n = S / kFeatureStride;
    std::vector<float> values(static_cast<std::size_t>(kFeatureChannels) * n * n, 0.0f);
    std::vector<int> counts(kRegionCount);
    for (int cy = 0; cy < n; ++cy)
    {
        for (int cx = 0; cx < n; ++cx)
        {
            std::fill(counts.begin(), counts.end(), 0);
            for (int y = cy * kFeatureStride; y < (cy + 1) * kFeatureStride; ++y)
                for (int x = cx * kFeatureStride; x < (cx + 1) * kFeatureStride; ++x)
                    ++counts[scene.label_at(y, x)];
            for (int c = 0; c < kFeatureChannels; ++c)
            {
                double acc = 0.0;
                for (int r = 0; r < kRegionCount; ++r)
                    acc += counts[r] * static_cast<double>(scene.region_features[r][c]);
                values[(static_cast<std::size_t>(c) * n + cy) * n + cx] =
                    static_cast<float>(acc / (kFeatureStride * kFeatureStride));
            }
        }
    }
    return FeatureGrid(kFeatureChannels, n, n, std::move(values));
}

namespace {

DecodeCandidate make_candidate(const SyntheticScene& scene, const std::set<int>& regions,
                               const PromptSet& prompts)
{
    const int S = scene.resolution;
    std::vector<std::uint8_t> base(static_cast<std::size_t>(S) * S, 0);
    for (std::size_t i = 0; i < base.size(); ++i)
        base[i] = regions.count(scene.labels[i]) ? 1 : 0;

    if (prompts.box)
    {
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < S; ++x)
                if (!prompts.box->contains(y, x))
                    base[static_cast<std::size_t>(y) * S + x] = 0;
    }

    std::vector<std::uint8_t> mask = base;
    if (!prompts.box && !prompts.dense_logit)
    {
        for (const auto& component : scene.noise)
        {
            if (!regions.count(component.region))
                continue;
            for (auto i : component.pixels)
                mask[i] = 1;
        }
    }

    const auto clean = static_cast<double>(std::count(base.begin(), base.end(), std::uint8_t{1}));
    const auto total = static_cast<double>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));

    std::vector<float> logit(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        logit[i] = mask[i] ? 1.0f : -1.0f;
    const int lr = S / kLogitStride;
    auto low = imgproc::resize_bilinear(ScoreGrid(S, S, std::move(logit)), lr, lr);

    return {BinaryMask(S, S, std::move(mask)), std::move(low), total == 0.0 ? 0.0 : clean / total};
}

}  // namespace

std::vector<DecodeCandidate> synthetic_decode(const SyntheticScene& scene, const PromptSet& prompts,
                                              bool multimask)
{
    if (prompts.positive_count() == 0)
        throw DataError("synthetic_decode: prompts need at least one positive point");

    const int S = scene.resolution;
    std::set<int> positive;
    std::set<int> negative;
    for (const auto& p : prompts.points)
    {
        if (p.x < 0 || p.y < 0 || p.x >= S || p.y >= S)
            throw DataError("synthetic_decode: point outside the image");
        const int label = scene.label_at(p.y, p.x);
        (p.polarity == Polarity::positive ? positive : negative).insert(label);
    }
    positive.erase(kBackgroundLabel);

    std::set<int> included;
    std::set_difference(positive.begin(), positive.end(), negative.begin(), negative.end(),
                        std::inserter(included, included.end()));

    std::vector<DecodeCandidate> out;
    out.push_back(make_candidate(scene, included, prompts));
    if (multimask && included.size() > 1)
    {
        for (int region : included)
            out.push_back(make_candidate(scene, {region}, prompts));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

SuiteSpec make_suite(int good, int blob, int noisy, int resolution, std::uint64_t seed,
                     const std::string& category)
{
    SuiteSpec suite;
    suite.category = category;
    suite.seed = seed;
    suite.resolution = resolution;
    std::uint64_t index = 0;
    auto add = [&](SceneKind kind, int count) {
        for (int i = 0; i < count; ++i)
        {
            char name[16];
            std::snprintf(name, sizeof name, "%03d", i);
            suite.scenes.push_back({category + "/" + std::string(to_string(kind)) + "/" + name, kind,
                                    mix_seed(seed, index++), resolution});
        }
    };
    add(SceneKind::good, good);
    add(SceneKind::blob, blob);
    add(SceneKind::noisy, noisy);
    return suite;
}

SuiteSpec bundled_suite(int resolution, std::uint64_t seed)
{
    return make_suite(2, 4, 6, resolution, seed);
}

nlohmann::json suite_to_json(const SuiteSpec& suite)
{
    nlohmann::json j;
    j["format"] = "zsas-synthetic-suite/1";
    j["category"] = suite.category;
    j["seed"] = suite.seed;
    j["resolution"] = suite.resolution;
    j["scenes"] = nlohmann::json::array();
    for (const auto& s : suite.scenes)
    {
        j["scenes"].push_back(
            {{"id", s.id}, {"kind", std::string(to_string(s.kind))}, {"seed", s.seed}});
    }
    return j;
}

SuiteSpec suite_from_json(const nlohmann::json& doc)
{
    try
    {
        if (doc.value("format", "") != "zsas-synthetic-suite/1")
            throw DataError("synthetic suite: unsupported format");
        SuiteSpec suite;
        suite.category = doc.at("category").get<std::string>();
        suite.seed = doc.at("seed").get<std::uint64_t>();
        suite.resolution = doc.at("resolution").get<int>();
        for (const auto& s : doc.at("scenes"))
        {
            suite.scenes.push_back({s.at("id").get<std::string>(),
                                    parse_scene_kind(s.at("kind").get<std::string>()),
                                    s.at("seed").get<std::uint64_t>(), suite.resolution});
        }
        return suite;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw DataError(std::string("synthetic suite: ") + e.what());
    }
}

void write_dataset(const std::filesystem::path& root, const SuiteSpec& suite)
{
    for (const auto& spec : suite.scenes)
    {
        const auto scene = generate_scene(spec);
        // id = <category>/<defect>/<nnn>
        const auto first = spec.id.find('/');
        const auto last = spec.id.rfind('/');
        const auto category = spec.id.substr(0, first);
        const auto defect = spec.id.substr(first + 1, last - first - 1);
        const auto stem = spec.id.substr(last + 1);
        io::write_rgb_png(root / category / "test" / defect / (stem + ".png"), render(scene));
        if (spec.kind != SceneKind::good)
        {
            io::write_mask_png(root / category / "ground_truth" / defect / (stem + "_mask.png"),
                               scene.anomaly_truth);
        }
    }
    io::write_json(root / kSuiteFileName, suite_to_json(suite));
}

SuiteSpec load_suite(const std::filesystem::path& suite_json)
{
    nlohmann::json doc;
    try
    {
        doc = io::read_json(suite_json);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw DataError("synthetic suite " + suite_json.string() + ": " + e.what());
    }
    return suite_from_json(doc);
}

// ---------------------------------------------------------------------------
// Backend
// ---------------------------------------------------------------------------

SyntheticBackend::SyntheticBackend(std::vector<SyntheticScene> scenes)
{
    if (scenes.empty())
        throw DataError("synthetic backend: no scenes");
    resolution_ = scenes.front().resolution;
    for (auto& s : scenes)
    {
        if (s.resolution != resolution_)
            throw DataError("synthetic backend: scenes must share one resolution");
        auto features = scene_features(s);
        auto id = s.id;
        entries_.emplace(std::move(id), Entry{std::move(s), std::move(features)});
    }
}

FeatureDims SyntheticBackend::feature_dims() const
{
    return {kFeatureChannels, resolution_ / kFeatureStride, resolution_ / kFeatureStride};
}

const SyntheticScene& SyntheticBackend::scene(const std::string& id) const
{
    auto it = entries_.find(id);
    if (it == entries_.end())
        throw DataError("synthetic backend: unknown image id '" + id + "'");
    return it->second.scene;
}

ScoreGrid SyntheticBackend::score(const ImageInput& image) const
{
    return scene(image.id).anomaly_map;
}

Embedding SyntheticBackend::encode(const ImageInput& image) const
{
    scene(image.id);
    return {image.id, entries_.at(image.id).features};
}

std::vector<DecodeCandidate> SyntheticBackend::decode(const Embedding& embedding,
                                                      const PromptSet& prompts,
                                                      bool multimask) const
{
    return synthetic_decode(scene(embedding.image_id), prompts, multimask);
}

std::shared_ptr<SyntheticBackend> make_backend(const SuiteSpec& suite)
{
    std::vector<SyntheticScene> scenes;
    scenes.reserve(suite.scenes.size());
    for (const auto& spec : suite.scenes)
        scenes.push_back(generate_scene(spec));
    return std::make_shared<SyntheticBackend>(std::move(scenes));
}

BackendPair as_pair(std::shared_ptr<SyntheticBackend> backend)
{
    return {backend, backend};
}

}  // namespace zsas::synthetic
