#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "zsas/core_types.hpp"

namespace zsas::cli {

/// One test image of an MVTec-style dataset:
///   <root>/<category>/test/<defect>/<nnn>.png
///   <root>/<category>/ground_truth/<defect>/<nnn>_mask.png
struct DatasetEntry
{
    std::string category;
    std::string split = "test";
    std::string defect;
    std::string stem;
    std::filesystem::path image_path;
    std::optional<std::filesystem::path> truth_path;  ///< empty for "good"

    /// "<category>/<defect>/<stem>"; also the relative output path.
    std::string id() const { return category + "/" + defect + "/" + stem; }
    bool good() const { return defect == "good"; }
};

struct DatasetIndex
{
    std::filesystem::path root;
    std::vector<DatasetEntry> entries;  ///< sorted by id

    const DatasetEntry* find(const std::string& id) const;
};

/// Throws IndexingError for a missing root, an empty dataset, or a defect
/// image without ground truth (the message names the expected path).
DatasetIndex index_dataset(const std::filesystem::path& root);

/// Ground truth at the image's size; all-negative for "good" images.
BinaryMask load_truth(const DatasetEntry& entry, int height, int width);

}  // namespace zsas::cli
