#include "zsas/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <png.h>

namespace zsas::io {

namespace {

static_assert(sizeof(float) == 4);

std::uint32_t byteswap32(std::uint32_t v)
{
    return ((v & 0x000000FFu) << 24) | ((v & 0x0000FF00u) << 8) | ((v & 0x00FF0000u) >> 8) |
           ((v & 0xFF000000u) >> 24);
}

void ensure_parent(const fs::path& path)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
}

}  // namespace

fs::path sidecar_path(const fs::path& tensor_path)
{
    return fs::path(tensor_path.string() + ".json");
}

void write_tensor(const fs::path& path, const std::vector<int>& dims, std::span<const float> values)
{
    std::size_t expected = 1;
    for (int d : dims)
        expected *= static_cast<std::size_t>(d);
    if (expected != values.size())
        throw DataError("write_tensor: dims do not match value count for " + path.string());

    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot open " + path.string() + " for writing");
    if constexpr (std::endian::native == std::endian::little)
    {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(float)));
    }
    else
    {
        for (float v : values)
        {
            auto bits = byteswap32(std::bit_cast<std::uint32_t>(v));
            out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
    }
    if (!out)
        throw DataError("failed writing " + path.string());

    nlohmann::json side;
    side["dims"] = dims;
    side["order"] = "row-major";
    side["dtype"] = "f32le";
    write_json(sidecar_path(path), side);
}

RawTensor read_tensor(const fs::path& path)
{
    const auto side_path = sidecar_path(path);
    if (!fs::exists(path))
        throw DataError("missing tensor file " + path.string());
    if (!fs::exists(side_path))
        throw DataError("missing tensor sidecar " + side_path.string());

    nlohmann::json side;
    try
    {
        side = read_json(side_path);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw DataError("malformed sidecar " + side_path.string() + ": " + e.what());
    }
    if (side.value("dtype", "") != "f32le" || side.value("order", "") != "row-major" ||
        !side.contains("dims") || !side["dims"].is_array())
    {
        throw DataError("sidecar " + side_path.string() +
                        " must declare dims, order=row-major and dtype=f32le");
    }

    RawTensor t;
    std::size_t expected = 1;
    for (const auto& d : side["dims"])
    {
        if (!d.is_number_integer() || d.get<long long>() < 1)
            throw DataError("sidecar " + side_path.string() + ": dims must be positive integers");
        t.dims.push_back(d.get<int>());
        expected *= static_cast<std::size_t>(t.dims.back());
    }

    const auto bytes = fs::file_size(path);
    if (bytes != expected * sizeof(float))
    {
        throw DataError("tensor " + path.string() + " holds " + std::to_string(bytes) +
                        " bytes, dims require " + std::to_string(expected * sizeof(float)));
    }
    t.values.resize(expected);
    std::ifstream in(path, std::ios::binary);
    in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(bytes));
    if (!in)
        throw DataError("failed reading " + path.string());
    if constexpr (std::endian::native != std::endian::little)
    {
        for (auto& v : t.values)
            v = std::bit_cast<float>(byteswap32(std::bit_cast<std::uint32_t>(v)));
    }
    return t;
}

void write_score_grid(const fs::path& path, const ScoreGrid& grid)
{
    write_tensor(path, {grid.height(), grid.width()}, grid.values());
}

ScoreGrid read_score_grid(const fs::path& path)
{
    auto t = read_tensor(path);
    if (t.dims.size() != 2)
        throw DataError("score grid " + path.string() + " must have 2 dims");
    return ScoreGrid(t.dims[0], t.dims[1], std::move(t.values));
}

void write_feature_grid(const fs::path& path, const FeatureGrid& grid)
{
    write_tensor(path, {grid.channels(), grid.height(), grid.width()}, grid.values());
}

FeatureGrid read_feature_grid(const fs::path& path)
{
    auto t = read_tensor(path);
    if (t.dims.size() != 3)
        throw DataError("feature grid " + path.string() + " must have 3 dims");
    return FeatureGrid(t.dims[0], t.dims[1], t.dims[2], std::move(t.values));
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

namespace {

std::vector<std::uint8_t> read_png(const fs::path& path, png_uint_32 format, int& height, int& width)
{
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw DataError("cannot read PNG " + path.string() + ": " + image.message);
    image.format = format;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr))
    {
        png_image_free(&image);
        throw DataError("cannot decode PNG " + path.string() + ": " + image.message);
    }
    height = static_cast<int>(image.height);
    width = static_cast<int>(image.width);
    return buffer;
}

void write_png(const fs::path& path, png_uint_32 format, int height, int width,
               const std::uint8_t* data)
{
    ensure_parent(path);
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.format = format;
    image.height = static_cast<png_uint_32>(height);
    image.width = static_cast<png_uint_32>(width);
    if (!png_image_write_to_file(&image, path.c_str(), 0, data, 0, nullptr))
        throw DataError("cannot write PNG " + path.string() + ": " + image.message);
}

}  // namespace

void write_mask_png(const fs::path& path, const BinaryMask& mask)
{
    std::vector<std::uint8_t> gray(mask.size());
    const auto v = mask.values();
    for (std::size_t i = 0; i < gray.size(); ++i)
        gray[i] = v[i] ? 255 : 0;
    write_png(path, PNG_FORMAT_GRAY, mask.height(), mask.width(), gray.data());
}

BinaryMask read_mask_png(const fs::path& path)
{
    int h = 0;
    int w = 0;
    auto gray = read_png(path, PNG_FORMAT_GRAY, h, w);
    for (auto& g : gray)
        g = g >= 128 ? 1 : 0;
    return BinaryMask(h, w, std::move(gray));
}

void write_rgb_png(const fs::path& path, const RgbImage& image)
{
    if (image.pixels.size() != static_cast<std::size_t>(image.height) * image.width * 3)
        throw DataError("write_rgb_png: pixel buffer does not match dimensions");
    write_png(path, PNG_FORMAT_RGB, image.height, image.width, image.pixels.data());
}

RgbImage read_rgb_png(const fs::path& path)
{
    RgbImage img;
    img.pixels = read_png(path, PNG_FORMAT_RGB, img.height, img.width);
    return img;
}

void write_score_png(const fs::path& path, const ScoreGrid& grid)
{
    std::vector<std::uint8_t> gray(grid.size());
    const auto v = grid.values();
    for (std::size_t i = 0; i < gray.size(); ++i)
    {
        const float c = std::clamp(v[i], 0.0f, 1.0f);
        gray[i] = static_cast<std::uint8_t>(std::lround(c * 255.0f));
    }
    write_png(path, PNG_FORMAT_GRAY, grid.height(), grid.width(), gray.data());
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

nlohmann::json config_to_json(const PipelineConfig& c)
{
    nlohmann::json j;
    j["extreme_threshold"] = c.extreme_threshold;
    j["k_positive"] = c.k_positive;
    j["k_negative"] = c.k_negative;
    j["min_spacing"] = c.min_spacing;
    j["kernel"] = {{"shape", std::string(to_string(c.kernel.shape))},
                   {"size", {c.kernel.width, c.kernel.height}}};
    j["cascade_depth"] = c.cascade_depth;
    j["working_resolution"] = c.working_resolution;
    j["output_map_mode"] = std::string(to_string(c.output_map_mode));
    j["blend_weight"] = c.blend_weight;
    return j;
}

PipelineConfig config_from_json(const nlohmann::json& doc, PipelineConfig base)
{
    if (!doc.is_object())
        throw ConfigError("config: expected a JSON object");

    auto field = [&](const char* name) -> const nlohmann::json* {
        auto it = doc.find(name);
        return it == doc.end() ? nullptr : &*it;
    };

    try
    {
        if (auto* v = field("extreme_threshold"))
            base.extreme_threshold = v->get<double>();
        if (auto* v = field("k_positive"))
            base.k_positive = v->get<int>();
        if (auto* v = field("k_negative"))
            base.k_negative = v->get<int>();
        if (auto* v = field("min_spacing"))
            base.min_spacing = v->get<double>();
        if (auto* v = field("cascade_depth"))
            base.cascade_depth = v->get<int>();
        if (auto* v = field("working_resolution"))
            base.working_resolution = v->get<int>();
        if (auto* v = field("output_map_mode"))
            base.output_map_mode = parse_output_map_mode(v->get<std::string>());
        if (auto* v = field("blend_weight"))
            base.blend_weight = v->get<double>();
        if (auto* v = field("kernel"))
        {
            if (v->contains("shape"))
                base.kernel.shape = parse_kernel_shape((*v)["shape"].get<std::string>());
            if (v->contains("size"))
            {
                const auto& size = (*v)["size"];
                if (size.is_number_integer())
                {
                    base.kernel.width = base.kernel.height = size.get<int>();
                }
                else if (size.is_array() && size.size() == 2)
                {
                    base.kernel.width = size[0].get<int>();
                    base.kernel.height = size[1].get<int>();
                }
                else
                {
                    throw ConfigError("kernel.size: expected an integer or [width, height]");
                }
            }
        }
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return base;
}

PipelineConfig load_config(const fs::path& path)
{
    nlohmann::json doc;
    try
    {
        doc = read_json(path);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

nlohmann::json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path.string());
    return nlohmann::json::parse(in);
}

void write_json(const fs::path& path, const nlohmann::json& doc)
{
    write_text(path, doc.dump(2) + "\n");
}

void write_text(const fs::path& path, const std::string& text)
{
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot open " + path.string() + " for writing");
    out << text;
}

}  // namespace zsas::io
