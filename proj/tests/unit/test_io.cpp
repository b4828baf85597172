#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "zsas/io.hpp"

using namespace zsas;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    auto dir = fs::temp_directory_path() / "zsas_test_io";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("score grid round trip is bit exact")
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(-1e6f, 1e6f);
    std::vector<float> v(7 * 5);
    for (auto& x : v)
        x = u(rng);
    v[3] = -0.0f;
    v[4] = std::numeric_limits<float>::denorm_min();
    const ScoreGrid g(7, 5, v);
    const auto path = scratch("grid.f32");
    io::write_score_grid(path, g);
    const auto back = io::read_score_grid(path);
    REQUIRE(back.height() == 7);
    REQUIRE(back.width() == 5);
    CHECK(std::memcmp(back.values().data(), g.values().data(), v.size() * sizeof(float)) == 0);
    CHECK(fs::file_size(path) == v.size() * 4);

    const auto side = io::read_json(io::sidecar_path(path));
    CHECK(side["dims"] == nlohmann::json({7, 5}));
    CHECK(side["order"] == "row-major");
    CHECK(side["dtype"] == "f32le");
}

TEST_CASE("feature grid round trip")
{
    std::vector<float> v(3 * 2 * 4);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = static_cast<float>(i) * 0.25f;
    const FeatureGrid f(3, 2, 4, v);
    const auto path = scratch("feat.f32");
    io::write_feature_grid(path, f);
    CHECK(io::read_feature_grid(path) == f);
    CHECK_THROWS_AS(io::read_score_grid(path), DataError);
}

TEST_CASE("tensor files are little-endian float32")
{
    const auto path = scratch("one.f32");
    io::write_score_grid(path, ScoreGrid(1, 1, {1.0f}));
    std::ifstream in(path, std::ios::binary);
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    CHECK(bytes[0] == 0x00);
    CHECK(bytes[1] == 0x00);
    CHECK(bytes[2] == 0x80);
    CHECK(bytes[3] == 0x3f);
}

TEST_CASE("broken tensors are data errors")
{
    const auto path = scratch("broken.f32");
    io::write_score_grid(path, ScoreGrid(2, 2, {1, 2, 3, 4}));
    fs::resize_file(path, 12);
    CHECK_THROWS_AS(io::read_score_grid(path), DataError);
    CHECK_THROWS_AS(io::read_score_grid(scratch("absent.f32")), DataError);
    io::write_text(scratch("nosidecar.f32"), "abcd");
    CHECK_THROWS_AS(io::read_score_grid(scratch("nosidecar.f32")), DataError);
}

TEST_CASE("mask png round trip is bit exact")
{
    std::mt19937_64 rng(2);
    std::vector<std::uint8_t> v(13 * 17);
    for (auto& b : v)
        b = rng() & 1;
    const BinaryMask m(13, 17, v);
    const auto path = scratch("mask.png");
    io::write_mask_png(path, m);
    CHECK(io::read_mask_png(path) == m);

    // Stored as 0 / 255.
    const auto rgb = io::read_rgb_png(path);
    for (int y = 0; y < 13; ++y)
        for (int x = 0; x < 17; ++x)
            CHECK(rgb.at(y, x, 0) == (m.at(y, x) ? 255 : 0));
}

TEST_CASE("rgb png round trip")
{
    RgbImage img{3, 2, {}};
    for (int i = 0; i < 18; ++i)
        img.pixels.push_back(static_cast<std::uint8_t>(i * 13));
    const auto path = scratch("rgb.png");
    io::write_rgb_png(path, img);
    const auto back = io::read_rgb_png(path);
    CHECK(back.height == 3);
    CHECK(back.width == 2);
    CHECK(back.pixels == img.pixels);
    CHECK_THROWS_AS(io::read_rgb_png(scratch("feat.f32")), DataError);
}

TEST_CASE("config json round trip and partial overrides")
{
    PipelineConfig c;
    c.extreme_threshold = 0.7;
    c.k_positive = 2;
    c.k_negative = 0;
    c.min_spacing = 12.5;
    c.kernel = {KernelShape::cross, 9, 11};
    c.cascade_depth = 2;
    c.working_resolution = 256;
    c.output_map_mode = OutputMapMode::blended;
    c.blend_weight = 0.25;
    CHECK(io::config_from_json(io::config_to_json(c)) == c);

    const auto partial = io::config_from_json(nlohmann::json{{"kernel", {{"size", 7}}}});
    CHECK(partial.kernel.width == 7);
    CHECK(partial.kernel.height == 7);
    CHECK(partial.kernel.shape == KernelShape::ellipse);
    CHECK(partial.k_positive == 3);

    CHECK_THROWS_AS(io::config_from_json(nlohmann::json{{"k_positive", "three"}}), ConfigError);
    CHECK_THROWS_AS(io::config_from_json(nlohmann::json{{"kernel", {{"shape", "blob"}}}}), ConfigError);

    const auto path = scratch("config.json");
    io::write_json(path, io::config_to_json(c));
    CHECK(io::load_config(path) == c);
}
