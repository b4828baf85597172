#include "zsas/cli/overlay.hpp"

#include <cmath>

namespace zsas::cli {

BinaryMask mask_boundary(const BinaryMask& mask)
{
    const int H = mask.height();
    const int W = mask.width();
    std::vector<std::uint8_t> out(mask.size(), 0);
    for (int y = 0; y < H; ++y)
    {
        for (int x = 0; x < W; ++x)
        {
            if (!mask.at(y, x))
                continue;
            const bool edge = !mask.contains(y - 1, x) || !mask.contains(y + 1, x) ||
                              !mask.contains(y, x - 1) || !mask.contains(y, x + 1);
            out[mask.index(y, x)] = edge ? 1 : 0;
        }
    }
    return BinaryMask(H, W, std::move(out));
}

RgbImage render_overlay(const RgbImage& image, const BinaryMask& mask, std::uint8_t r, std::uint8_t g,
                        std::uint8_t b, double alpha)
{
    if (image.height != mask.height() || image.width != mask.width())
        throw DataError("overlay: mask and image sizes differ");
    const auto boundary = mask_boundary(mask);
    const std::uint8_t color[3] = {r, g, b};
    RgbImage out = image;
    for (int y = 0; y < image.height; ++y)
    {
        for (int x = 0; x < image.width; ++x)
        {
            if (!mask.at(y, x))
                continue;
            const bool edge = boundary.at(y, x);
            for (int c = 0; c < 3; ++c)
            {
                auto& px = out.pixels[(static_cast<std::size_t>(y) * image.width + x) * 3 + c];
                px = edge ? color[c]
                          : static_cast<std::uint8_t>(std::lround((1.0 - alpha) * px + alpha * color[c]));
            }
        }
    }
    return out;
}

}  // namespace zsas::cli
