#include "zsas/cli/dataset.hpp"

#include <algorithm>

#include "zsas/io.hpp"

namespace zsas::cli {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> sorted_children(const fs::path& dir, bool directories)
{
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
    {
        if (directories ? e.is_directory() : e.is_regular_file())
            out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

const DatasetEntry* DatasetIndex::find(const std::string& id) const
{
    for (const auto& e : entries)
    {
        if (e.id() == id)
            return &e;
    }
    return nullptr;
}

DatasetIndex index_dataset(const fs::path& root)
{
    if (!fs::is_directory(root))
        throw IndexingError("dataset root " + root.string() + " is not a directory");

    DatasetIndex index;
    index.root = root;
    for (const auto& category : sorted_children(root, true))
    {
        const auto test_dir = category / "test";
        if (!fs::is_directory(test_dir))
            continue;
        for (const auto& defect : sorted_children(test_dir, true))
        {
            for (const auto& image : sorted_children(defect, false))
            {
                if (image.extension() != ".png")
                    continue;
                DatasetEntry e;
                e.category = category.filename().string();
                e.defect = defect.filename().string();
                e.stem = image.stem().string();
                e.image_path = image;
                if (!e.good())
                {
                    auto truth = category / "ground_truth" / e.defect / (e.stem + "_mask.png");
                    if (!fs::is_regular_file(truth))
                        throw IndexingError("missing ground truth for " + e.id() + ": expected " + truth.string());
                    e.truth_path = truth;
                }
                index.entries.push_back(std::move(e));
            }
        }
    }
    if (index.entries.empty())
        throw IndexingError("no test images under " + root.string());
    std::sort(index.entries.begin(), index.entries.end(),
              [](const auto& a, const auto& b) { return a.id() < b.id(); });
    return index;
}

BinaryMask load_truth(const DatasetEntry& entry, int height, int width)
{
    if (!entry.truth_path)
        return BinaryMask::empty(height, width);
    auto mask = io::read_mask_png(*entry.truth_path);
    if (mask.height() != height || mask.width() != width)
    {
        throw DataError("ground truth " + entry.truth_path->string() + " is " + std::to_string(mask.height()) +
                        "x" + std::to_string(mask.width()) + ", image is " + std::to_string(height) + "x" +
                        std::to_string(width));
    }
    return mask;
}

}  // namespace zsas::cli
