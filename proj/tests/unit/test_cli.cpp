#include <doctest.h>

#include <fstream>
#include <sstream>

#include "zsas/cli/backend_spec.hpp"
#include "zsas/cli/commands.hpp"
#include "zsas/cli/dataset.hpp"
#include "zsas/cli/overlay.hpp"
#include "zsas/io.hpp"
#include "zsas/pipeline.hpp"
#include "zsas/synthetic.hpp"

using namespace zsas;
using namespace zsas::cli;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name)
{
    auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// 1 good, 2 blob, 2 noisy scenes at 128 px.
fs::path small_dataset(const std::string& name)
{
    const auto root = fresh_dir(name);
    std::ostringstream log;
    SynthOptions o;
    o.out = root;
    o.good = 1;
    o.blob = 2;
    o.noisy = 2;
    o.resolution = 128;
    o.seed = 99;
    o.category = "widget";
    o.dump_files = true;
    REQUIRE(cmd_synth(o, log) == kExitOk);
    return root;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

RunOptions run_options(const fs::path& dataset, const fs::path& out)
{
    RunOptions r;
    r.dataset = dataset;
    r.out = out;
    r.overrides.min_spacing = 40;
    r.workers = 2;
    return r;
}

}  // namespace

TEST_CASE("dataset indexing")
{
    const auto root = small_dataset("zsas_test_cli_index");
    const auto index = index_dataset(root);
    REQUIRE(index.entries.size() == 5);
    CHECK(index.entries[0].id() == "widget/blob/000");
    CHECK(index.entries[2].id() == "widget/good/000");
    CHECK(index.entries[2].good());
    CHECK_FALSE(index.entries[2].truth_path);
    REQUIRE(index.find("widget/noisy/001"));
    CHECK(index.find("widget/noisy/001")->truth_path);
    CHECK(index.find("widget/noisy/009") == nullptr);

    CHECK_FALSE(load_truth(index.entries[2], 128, 128).any());
    CHECK(load_truth(index.entries[0], 128, 128).any());

    const auto gt = root / "widget/ground_truth/noisy/001_mask.png";
    fs::remove(gt);
    CHECK_THROWS_WITH_AS(index_dataset(root), doctest::Contains(gt.string().c_str()), IndexingError);
    CHECK_THROWS_AS(index_dataset(root / "nowhere"), IndexingError);
}

TEST_CASE("backend spec parsing")
{
    CHECK(parse_backend_spec("synthetic").kind == BackendSpec::Kind::synthetic);
    const auto f = parse_backend_spec("files:/tmp/m.json");
    CHECK(f.kind == BackendSpec::Kind::files);
    CHECK(f.paths == std::vector<fs::path>{"/tmp/m.json"});
    const auto g = parse_backend_spec("graphs:a.onnx,b.onnx,c.onnx");
    CHECK(g.kind == BackendSpec::Kind::graphs);
    CHECK(g.paths.size() == 3);
    CHECK(parse_backend_spec(g.to_string()).paths == g.paths);
    CHECK_THROWS_AS(parse_backend_spec("graphs:a.onnx,b.onnx"), ConfigError);
    CHECK_THROWS_AS(parse_backend_spec("files:"), ConfigError);
    CHECK_THROWS_AS(parse_backend_spec("magic"), ConfigError);
}

TEST_CASE("config resolution")
{
    ConfigOverrides o;
    auto c = resolve_config(std::nullopt, o, 512);
    CHECK(c.working_resolution == 512);
    CHECK(c.kernel.shape == KernelShape::ellipse);

    o.kernel_shape = "cross";
    o.kernel_size = {9, 7};
    o.k_positive = 2;
    c = resolve_config(std::nullopt, o, 512);
    CHECK(c.kernel.shape == KernelShape::cross);
    CHECK(c.kernel.width == 9);
    CHECK(c.kernel.height == 7);
    CHECK(c.k_positive == 2);

    o.blend_weight = 1.5;
    CHECK_THROWS_AS(resolve_config(std::nullopt, o, 512), ConfigError);
}

TEST_CASE("run is deterministic and evaluates")
{
    const auto root = small_dataset("zsas_test_cli_run");
    const auto out1 = root.parent_path() / "zsas_test_cli_run_out1";
    const auto out2 = root.parent_path() / "zsas_test_cli_run_out2";
    fs::remove_all(out1);
    fs::remove_all(out2);
    std::ostringstream log;
    REQUIRE(cmd_run(run_options(root, out1), log) == kExitOk);
    auto second = run_options(root, out2);
    second.workers = 1;
    REQUIRE(cmd_run(second, log) == kExitOk);

    for (const auto* id : {"widget/blob/000", "widget/good/000", "widget/noisy/001"})
    {
        const std::string stem = id;
        CHECK(slurp(out1 / "masks" / (stem + ".png")) == slurp(out2 / "masks" / (stem + ".png")));
        CHECK(slurp(out1 / "maps" / (stem + ".f32")) == slurp(out2 / "maps" / (stem + ".f32")));
        CHECK(fs::exists(out1 / "overlays" / (stem + ".png")));
    }
    CHECK(slurp(out1 / "run_manifest.json") == slurp(out2 / "run_manifest.json"));

    const auto manifest = io::read_json(out1 / "run_manifest.json");
    CHECK(manifest["images"].size() == 5);
    CHECK(manifest["failures"] == 0);

    // Replay reproduces the run.
    const auto out3 = root.parent_path() / "zsas_test_cli_run_out3";
    fs::remove_all(out3);
    RunOptions replay;
    replay.dataset = root;
    replay.out = out3;
    replay.replay = out1 / "run_manifest.json";
    REQUIRE(cmd_run(replay, log) == kExitOk);
    CHECK(slurp(out3 / "masks/widget/noisy/000.png") == slurp(out1 / "masks/widget/noisy/000.png"));

    EvalOptions e;
    e.predictions = out1;
    e.dataset = root;
    REQUIRE(cmd_eval(e, log) == kExitOk);
    const auto eval = io::read_json(out1 / "eval.json");
    CHECK(eval["pooled"]["auroc"].get<double>() > 0.9);
    CHECK(fs::exists(out1 / "eval.csv"));

    // Debug dumps.
    const auto out4 = root.parent_path() / "zsas_test_cli_run_out4";
    fs::remove_all(out4);
    auto dbg = run_options(root, out4);
    dbg.debug_dumps = true;
    dbg.overlays = false;
    REQUIRE(cmd_run(dbg, log) == kExitOk);
    CHECK(fs::exists(out4 / "debug/widget/blob/000/prompts.json"));
    CHECK_FALSE(fs::exists(out4 / "overlays"));
}

TEST_CASE("mismatched working resolution is fatal")
{
    const auto root = small_dataset("zsas_test_cli_wr");
    auto o = run_options(root, root.parent_path() / "zsas_test_cli_wr_out");
    o.overrides.working_resolution = 256;
    std::ostringstream err;
    CHECK(guarded(err, [&] {
              std::ostringstream log;
              return cmd_run(o, log);
          }) == kExitFatal);
    CHECK(err.str().find("error") != std::string::npos);
}

TEST_CASE("files backend gives the same masks")
{
    const auto root = small_dataset("zsas_test_cli_files");
    const auto a = root.parent_path() / "zsas_test_cli_files_a";
    const auto b = root.parent_path() / "zsas_test_cli_files_b";
    fs::remove_all(a);
    fs::remove_all(b);
    std::ostringstream log;
    REQUIRE(cmd_run(run_options(root, a), log) == kExitOk);
    auto o = run_options(root, b);
    o.backend = "files:" + (root / "files/manifest.json").string();
    REQUIRE(cmd_run(o, log) == kExitOk);
    CHECK(slurp(a / "masks/widget/noisy/001.png") == slurp(b / "masks/widget/noisy/001.png"));
}

TEST_CASE("evaluation of truth and inverted predictions")
{
    const auto root = small_dataset("zsas_test_cli_eval");
    const auto index = index_dataset(root);
    const auto perfect = root.parent_path() / "zsas_test_cli_eval_perfect";
    const auto inverted = root.parent_path() / "zsas_test_cli_eval_inverted";
    fs::remove_all(perfect);
    fs::remove_all(inverted);
    for (const auto& e : index.entries)
    {
        const auto truth = load_truth(e, 128, 128);
        fs::create_directories((perfect / "masks" / e.id()).parent_path());
        io::write_mask_png(perfect / "masks" / (e.id() + ".png"), truth);
        std::vector<float> inv;
        for (auto t : truth.values())
            inv.push_back(t ? 0.0f : 1.0f);
        fs::create_directories((inverted / "maps" / e.id()).parent_path());
        io::write_score_grid(inverted / "maps" / (e.id() + ".f32"), ScoreGrid(128, 128, inv));
    }
    const auto p = evaluate_predictions(perfect, index);
    CHECK(*p.pooled.auroc == 1.0);
    CHECK(*p.pooled.f1_max == 1.0);
    CHECK(*p.pooled.ap == 1.0);
    const auto q = evaluate_predictions(inverted, index);
    CHECK(*q.pooled.auroc == 0.0);

    fs::remove(perfect / "masks/widget/blob/001.png");
    CHECK_THROWS_WITH_AS(evaluate_predictions(perfect, index), doctest::Contains("widget/blob/001"), DataError);
}

TEST_CASE("ablation reports")
{
    const auto root = small_dataset("zsas_test_cli_ablate");
    const auto ws = open_workspace(root, "synthetic");
    ConfigOverrides o;
    o.min_spacing = 40;
    const auto base = resolve_config(std::nullopt, o, ws.backends.segmenter->working_resolution());

    const auto k = ablate_kernel(ws, base, 2);
    REQUIRE(k.rows.size() == 9);
    const char* shapes[] = {"cross", "rectangle", "ellipse"};
    const int sizes[] = {20, 25, 30};
    for (int i = 0; i < 9; ++i)
    {
        CHECK(k.rows[i].shape == shapes[i / 3]);
        CHECK(k.rows[i].size == sizes[i % 3]);
        CHECK(k.rows[i].metrics.auroc);
    }
    CHECK(k.failures.empty());

    const auto c = ablate_cascade(ws, base, 2);
    REQUIRE(c.rows.size() == 3);
    CHECK(c.rows[0].label == "only points");
    CHECK(c.rows[1].label == "points+logit1");
    CHECK(c.rows[2].label == "points+box+logit2");
    // Three calls per image, two where the stage-2 mask came back empty.
    long expected_calls = 0;
    for (const auto& e : ws.index.entries)
    {
        const auto outcome = pipeline::run_image(ws.backends, {e.id(), e.image_path, {}}, base);
        expected_calls += outcome.cascade.degraded ? 2 : 3;
    }
    CHECK(c.decoder_calls == expected_calls);
    CHECK(c.decoder_calls >= 2 * 5);
    CHECK(c.images == 5);
    CHECK(*c.rows[2].metrics.f1_max >= *c.rows[0].metrics.f1_max);

    const auto out = fresh_dir("zsas_test_cli_ablate_out");
    write_report(out, c);
    CHECK(fs::exists(out / "ablate_cascade.json"));
    CHECK(fs::exists(out / "ablate_cascade.csv"));
    CHECK(report_table(c).find("points+box+logit2") != std::string::npos);
}

TEST_CASE("overlay draws the boundary in the colour")
{
    std::vector<std::uint8_t> v(7 * 7, 0);
    for (int y = 1; y <= 5; ++y)
        for (int x = 1; x <= 5; ++x)
            v[y * 7 + x] = 1;
    const BinaryMask m(7, 7, v);
    const auto edge = mask_boundary(m);
    CHECK(edge.foreground_count() == 16);
    CHECK_FALSE(edge.at(3, 3));
    CHECK(edge.at(1, 3));

    const RgbImage img{7, 7, std::vector<std::uint8_t>(7 * 7 * 3, 100)};
    const auto o = render_overlay(img, m);
    CHECK(o.at(1, 1, 0) == 255);
    CHECK(o.at(1, 1, 1) == 40);
    CHECK(o.at(0, 0, 0) == 100);
    CHECK(o.at(3, 3, 0) == doctest::Approx(0.4 * 255 + 0.6 * 100).epsilon(0.01));
    CHECK(mask_boundary(BinaryMask::full(3, 3)).foreground_count() == 8);
}

TEST_CASE("guarded maps exceptions to exit codes")
{
    std::ostringstream err;
    CHECK(guarded(err, [] { return kExitOk; }) == kExitOk);
    CHECK(guarded(err, [] { return kExitImageFailures; }) == kExitImageFailures);
    CHECK(guarded(err, []() -> int { throw ConfigError("bad value"); }) == kExitFatal);
    CHECK(err.str().find("error: bad value") != std::string::npos);
    CHECK(guarded(err, []() -> int { throw std::runtime_error("x"); }) == kExitFatal);
    CHECK_FALSE(version().empty());
}
