// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//
//   zsas_acceptance <work_dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "zsas/cli/commands.hpp"
#include "zsas/imgproc.hpp"
#include "zsas/io.hpp"
#include "zsas/metrics.hpp"
#include "zsas/pipeline.hpp"
#include "zsas/ppg.hpp"
#include "zsas/synthetic.hpp"

using namespace zsas;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
    bool pass = true;
    std::string detail;

    void fail(const std::string& why)
    {
        if (pass)
            detail = why;
        pass = false;
    }
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(const std::string& name, double budget_s, const std::function<Outcome()>& body)
{
    const auto t0 = Clock::now();
    Outcome out;
    try
    {
        out = body();
    }
    catch (const std::exception& e)
    {
        out.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (budget_s > 0 && secs > budget_s)
    {
        char buf[96];
        std::snprintf(buf, sizeof buf, "took %.2f s, budget %.0f s", secs, budget_s);
        out.fail(buf);
    }
    if (!out.pass)
        ++failures;
    std::printf("%s  %-28s %7.2f s  %s\n", out.pass ? "PASS" : "FAIL", name.c_str(), secs, out.detail.c_str());
    std::fflush(stdout);
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------------------

Outcome morphology()
{
    Outcome out;
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> density(0.002, 0.15);
    long checks = 0;
    for (int trial = 0; trial < 200; ++trial)
    {
        const auto mask = oracle::random_mask(rng, 64, 64, density(rng));
        for (auto shape : {KernelShape::cross, KernelShape::rectangle, KernelShape::ellipse})
        {
            for (int size = 3; size <= 31; size += 2)
            {
                const StructuringElement e{shape, size, size};
                const auto expected = oracle::dilate(mask, shape, size, size);
                if (imgproc::dilate(mask, e) != expected)
                    out.fail("dilate mismatch: trial " + std::to_string(trial) + ", " +
                             std::string(to_string(shape)) + " " + std::to_string(size));
                if (imgproc::ring(mask, e) != imgproc::mask_minus(expected, mask))
                    out.fail("ring mismatch: trial " + std::to_string(trial));
                ++checks;
            }
        }
    }
    if (out.pass)
        out.detail = std::to_string(checks) + " dilations and rings exact";
    return out;
}

Outcome spaced_topk()
{
    Outcome out;
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> side(4, 48);
    std::uniform_int_distribution<int> kdist(1, 5);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    long checks = 0;
    for (int trial = 0; trial < 500; ++trial)
    {
        const int h = side(rng);
        const int w = side(rng);
        const int levels = trial % 3 == 0 ? 3 : 0;  // heavy ties on a third of the grids
        std::vector<float> v(static_cast<std::size_t>(h) * w);
        for (auto& x : v)
            x = levels ? std::floor(u(rng) * levels) / levels : u(rng);
        const ScoreGrid grid(h, w, v);
        const int k = kdist(rng);
        for (double spacing : {0.0, 8.0, 32.0})
        {
            for (bool highest : {true, false})
            {
                const auto got = ppg::select_spaced_topk(
                    grid, k, spacing, highest ? ppg::SelectOrder::highest : ppg::SelectOrder::lowest);
                const auto want = oracle::spaced_picks(grid, k, spacing, highest);
                bool same = got.size() == want.size();
                for (std::size_t i = 0; same && i < got.size(); ++i)
                    same = got[i].y == want[i].first && got[i].x == want[i].second;
                if (!same)
                    out.fail("mismatch on grid " + std::to_string(trial));
                ++checks;
            }
        }
    }
    if (out.pass)
        out.detail = std::to_string(checks) + " selections exact";
    return out;
}

struct Pair
{
    std::vector<double> scores;
    std::vector<std::uint8_t> truth;
};

Pair random_pair(std::mt19937_64& rng, int trial)
{
    std::uniform_int_distribution<int> side(1, 32);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = static_cast<std::size_t>(side(rng)) * side(rng) + 1;
    Pair p;
    const int kind = trial % 5;
    const int levels = 1 + trial % 7;
    for (std::size_t i = 0; i < n; ++i)
    {
        double s = u(rng);
        if (kind == 0)
            s = 0.5;  // all tied
        else if (kind == 1)
            s = std::floor(s * levels) / levels;
        p.scores.push_back(s);
        p.truth.push_back(kind == 2 ? 0 : (u(rng) < 0.25 ? 1 : 0));
    }
    // Both classes present; kind 2 has exactly one positive.
    p.truth[n - 1] = 1;
    if (n > 1)
        p.truth[0] = 0;
    else
        p.truth.push_back(0), p.scores.push_back(u(rng));
    return p;
}

Outcome metric_oracles()
{
    Outcome out;
    std::mt19937_64 rng(303);
    double worst = 0.0;
    for (int trial = 0; trial < 300; ++trial)
    {
        const auto p = random_pair(rng, trial);
        const double d[] = {
            std::abs(metrics::auroc(p.scores, p.truth) - oracle::auroc(p.scores, p.truth)),
            std::abs(metrics::f1_max(p.scores, p.truth) - oracle::f1_max(p.scores, p.truth)),
            std::abs(metrics::average_precision(p.scores, p.truth) - oracle::average_precision(p.scores, p.truth))};
        for (double x : d)
        {
            worst = std::max(worst, x);
            if (!(x <= 1e-9))
                out.fail("pair " + std::to_string(trial) + " differs by " + std::to_string(x));
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "300 pairs, max deviation %.3g", worst);
    if (out.pass)
        out.detail = buf;
    return out;
}

Outcome invariance()
{
    Outcome out;
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> coef(0.1, 5.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial)
    {
        const auto p = random_pair(rng, trial + 1);
        const double a = coef(rng);
        const double b = coef(rng);
        std::vector<double> t;
        for (double s : p.scores)
        {
            switch (trial % 3)
            {
            case 0: t.push_back(a * s + b); break;
            case 1: t.push_back(std::exp(a * s) - b); break;
            default: t.push_back(std::pow(s + 0.01, a) + s); break;
            }
        }
        const double d[] = {std::abs(metrics::auroc(p.scores, p.truth) - metrics::auroc(t, p.truth)),
                            std::abs(metrics::f1_max(p.scores, p.truth) - metrics::f1_max(t, p.truth)),
                            std::abs(metrics::average_precision(p.scores, p.truth) -
                                     metrics::average_precision(t, p.truth))};
        for (double x : d)
        {
            worst = std::max(worst, x);
            if (!(x <= 1e-12))
                out.fail("transform " + std::to_string(trial) + " changed a metric by " + std::to_string(x));
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "50 transforms, max change %.3g", worst);
    if (out.pass)
        out.detail = buf;
    return out;
}

Outcome ppg_placement()
{
    Outcome out;
    const auto suite = synthetic::make_suite(10, 40, 50, 256, 505, "accept");
    PipelineConfig config;
    config.working_resolution = 256;
    config.min_spacing = 100.0;
    int degraded = 0;
    int scene_index = 0;
    for (const auto& spec : suite.scenes)
    {
        const auto scene = synthetic::generate_scene(spec);
        auto anomaly = imgproc::minmax_normalize(scene.anomaly_map);
        if (scene_index++ % 7 == 0)
        {
            // Flatten below the threshold so the extreme set is empty.
            std::vector<float> v(anomaly.values().begin(), anomaly.values().end());
            for (auto& x : v)
                x *= 0.4f;
            anomaly = ScoreGrid(anomaly.height(), anomaly.width(), std::move(v), true);
        }
        const auto r = ppg::generate_prompts(anomaly, synthetic::scene_features(scene), config);
        const auto extreme = imgproc::binarize(anomaly, config.extreme_threshold);
        const auto ring = imgproc::ring(extreme, config.kernel);
        const bool empty = !extreme.any();
        if (r.intermediates.degraded != empty)
            out.fail(spec.id + ": degraded flag disagrees with the extreme set");
        if (empty)
        {
            ++degraded;
            if (r.prompts.points.size() != 1 || r.prompts.negative_count() != 0)
                out.fail(spec.id + ": degraded prompts are not a single positive");
            continue;
        }
        std::vector<PointPrompt> pos;
        std::vector<PointPrompt> neg;
        for (const auto& p : r.prompts.points)
            (p.polarity == Polarity::positive ? pos : neg).push_back(p);
        if (pos.empty() || pos.size() > static_cast<std::size_t>(config.k_positive) ||
            neg.size() > static_cast<std::size_t>(config.k_negative))
            out.fail(spec.id + ": prompt counts out of range");
        for (const auto& p : pos)
            if (!extreme.at(p.y, p.x))
                out.fail(spec.id + ": positive outside the extreme set");
        for (const auto& p : neg)
            if (!ring.at(p.y, p.x))
                out.fail(spec.id + ": negative outside the ring");
        for (const auto* g : {&pos, &neg})
            for (std::size_t i = 0; i < g->size(); ++i)
                for (std::size_t j = i + 1; j < g->size(); ++j)
                    if (std::hypot((*g)[i].x - (*g)[j].x, (*g)[i].y - (*g)[j].y) < config.min_spacing)
                        out.fail(spec.id + ": spacing violated");
    }
    if (out.pass)
        out.detail = "100 scenes, " + std::to_string(degraded) + " degraded";
    return out;
}

Outcome cascade_gain()
{
    Outcome out;
    const auto suite = synthetic::make_suite(0, 0, 50, 256, 606, "accept");
    const auto backend = synthetic::make_backend(suite);
    const auto pair = synthetic::as_pair(backend);
    PipelineConfig config;
    config.working_resolution = 256;
    config.min_spacing = 100.0;

    std::vector<double> depth1;
    std::vector<double> depth3;
    std::vector<std::uint8_t> truth;
    int exact = 0;
    for (const auto& spec : suite.scenes)
    {
        const auto outcome = pipeline::run_image(pair, {spec.id, {}, {}}, config);
        const auto& scene = backend->scene(spec.id);
        const auto m1 = cps::assemble_final_map(outcome.cascade.stage_masks.front(), config);
        const auto& m3 = outcome.cascade.final_map;
        depth1.insert(depth1.end(), m1.values().begin(), m1.values().end());
        depth3.insert(depth3.end(), m3.values().begin(), m3.values().end());
        truth.insert(truth.end(), scene.anomaly_truth.values().begin(), scene.anomaly_truth.values().end());
        if (imgproc::iou(outcome.cascade.stage_masks.back(), scene.anomaly_truth) == 1.0)
            ++exact;
        else
            out.fail(spec.id + ": final mask differs from the truth");
    }
    const double f1 = metrics::f1_max(depth1, truth);
    const double f3 = metrics::f1_max(depth3, truth);
    if (!(f3 > f1))
        out.fail("depth-3 F1 does not beat depth 1");
    char buf[128];
    std::snprintf(buf, sizeof buf, "F1 depth1 %.4f -> depth3 %.4f, exact masks %d/50", f1, f3, exact);
    out.detail = out.pass ? std::string(buf) : out.detail + " (" + buf + ")";
    return out;
}

fs::path make_dataset(const fs::path& work, const std::string& name, int resolution)
{
    const auto root = work / name;
    fs::remove_all(root);
    cli::SynthOptions o;
    o.out = root;
    o.resolution = resolution;
    o.seed = 707;
    o.category = "accept";
    std::ostringstream log;
    if (cli::cmd_synth(o, log) != cli::kExitOk)
        throw std::runtime_error("synth failed: " + log.str());
    return root;
}

Outcome ablation_shape(const fs::path& work)
{
    Outcome out;
    const auto root = make_dataset(work, "ablation", 256);
    const auto ws = cli::open_workspace(root, "synthetic");
    cli::ConfigOverrides o;
    o.min_spacing = 100.0;
    const auto base = cli::resolve_config(std::nullopt, o, ws.backends.segmenter->working_resolution());

    const PipelineConfig defaults;
    if (defaults.kernel.shape != KernelShape::ellipse || defaults.kernel.width != 25 ||
        defaults.kernel.height != 25 || defaults.cascade_depth != 3)
        out.fail("defaults are not ellipse 25x25 depth 3");

    const auto k = cli::ablate_kernel(ws, base, 0);
    const char* shapes[] = {"cross", "rectangle", "ellipse"};
    const int sizes[] = {20, 25, 30};
    if (k.rows.size() != 9)
        out.fail("kernel ablation has " + std::to_string(k.rows.size()) + " rows");
    for (std::size_t i = 0; i < k.rows.size() && i < 9; ++i)
        if (k.rows[i].shape != shapes[i / 3] || k.rows[i].size != sizes[i % 3])
            out.fail("kernel row " + std::to_string(i) + " out of order");

    const auto c = cli::ablate_cascade(ws, base, 0);
    const char* labels[] = {"only points", "points+logit1", "points+box+logit2"};
    if (c.rows.size() != 3)
        out.fail("cascade ablation has " + std::to_string(c.rows.size()) + " rows");
    for (std::size_t i = 0; i < c.rows.size() && i < 3; ++i)
        if (c.rows[i].label != labels[i] || c.rows[i].depth != static_cast<int>(i) + 1)
            out.fail("cascade row " + std::to_string(i) + " mislabeled");

    // The default cell of both tables is the same configuration.
    if (k.rows.size() == 9 && c.rows.size() == 3)
    {
        const auto& a = k.rows[7].metrics;
        const auto& b = c.rows[2].metrics;
        if (a.auroc != b.auroc || a.f1_max != b.f1_max || a.ap != b.ap)
            out.fail("ellipse 25 row differs from the depth-3 row");
    }
    if (!k.failures.empty() || !c.failures.empty())
        out.fail("ablation reported image failures");
    if (out.pass)
        out.detail = "9 kernel rows, 3 cascade rows, defaults agree";
    return out;
}

Outcome determinism(const fs::path& work)
{
    Outcome out;
    const auto root = make_dataset(work, "determinism", 256);
    std::vector<fs::path> outs;
    for (int workers : {1, 4})
    {
        const auto dir = work / ("determinism_run_w" + std::to_string(workers));
        fs::remove_all(dir);
        cli::RunOptions r;
        r.dataset = root;
        r.out = dir;
        r.workers = workers;
        r.overrides.min_spacing = 100.0;
        std::ostringstream log;
        if (cli::cmd_run(r, log) != cli::kExitOk)
            out.fail("run failed: " + log.str());
        cli::EvalOptions e;
        e.predictions = dir;
        e.dataset = root;
        if (cli::cmd_eval(e, log) != cli::kExitOk)
            out.fail("eval failed: " + log.str());
        outs.push_back(dir);
    }
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(outs[0]))
    {
        if (!entry.is_regular_file())
            continue;
        const auto rel = fs::relative(entry.path(), outs[0]);
        if (!fs::exists(outs[1] / rel) || slurp(entry.path()) != slurp(outs[1] / rel))
            out.fail("differs: " + rel.string());
        ++compared;
    }
    if (compared == 0)
        out.fail("no outputs written");
    if (out.pass)
        out.detail = std::to_string(compared) + " files byte-identical across worker counts";
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "zsas_acceptance";
    fs::create_directories(work);

    report("morphology-oracle", 30, morphology);
    report("spaced-topk-oracle", 10, spaced_topk);
    report("metrics-oracle", 30, metric_oracles);
    report("metrics-invariance", 0, invariance);
    report("ppg-placement", 0, ppg_placement);
    report("cascade-refinement", 60, cascade_gain);
    report("ablation-harness", 0, [&] { return ablation_shape(work); });
    report("determinism", 0, [&] { return determinism(work); });

    std::printf("%s: %d failed\n", failures ? "FAILED" : "ALL PASSED", failures);
    return failures ? 1 : 0;
}
