#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "zsas/core_types.hpp"

namespace zsas::io {

namespace fs = std::filesystem;

// Float grids are stored as raw little-endian float32 (row-major) next to a
// JSON sidecar named `<file>.json`:
//   {"dims": [...], "order": "row-major", "dtype": "f32le"}

/// Sidecar path for a tensor file.
fs::path sidecar_path(const fs::path& tensor_path);

void write_tensor(const fs::path& path, const std::vector<int>& dims, std::span<const float> values);

struct RawTensor
{
    std::vector<int> dims;
    std::vector<float> values;
};

RawTensor read_tensor(const fs::path& path);

void write_score_grid(const fs::path& path, const ScoreGrid& grid);
ScoreGrid read_score_grid(const fs::path& path);

void write_feature_grid(const fs::path& path, const FeatureGrid& grid);
FeatureGrid read_feature_grid(const fs::path& path);

/// 8-bit single-channel PNG, 0 = background, 255 = foreground.
void write_mask_png(const fs::path& path, const BinaryMask& mask);

/// Reads any 8-bit PNG; a pixel is foreground when its gray level is >= 128.
BinaryMask read_mask_png(const fs::path& path);

void write_rgb_png(const fs::path& path, const RgbImage& image);

/// Reads any PNG as 8-bit RGB (gray is replicated, alpha dropped).
RgbImage read_rgb_png(const fs::path& path);

/// Writes a [0, 1] score grid as an 8-bit gray PNG (for inspection only).
void write_score_png(const fs::path& path, const ScoreGrid& grid);

// ---------------------------------------------------------------------------
// PipelineConfig as JSON
// ---------------------------------------------------------------------------

nlohmann::json config_to_json(const PipelineConfig& config);

/// Fields missing from `doc` keep the values already in `base`.
PipelineConfig config_from_json(const nlohmann::json& doc, PipelineConfig base = {});

PipelineConfig load_config(const fs::path& path);

nlohmann::json read_json(const fs::path& path);

/// Pretty-printed, newline-terminated; identical input yields identical bytes.
void write_json(const fs::path& path, const nlohmann::json& doc);

void write_text(const fs::path& path, const std::string& text);

}  // namespace zsas::io
