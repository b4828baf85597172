#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "zsas/backend.hpp"

namespace zsas {

// Manifest layout (paths relative to the manifest's directory):
//
// {
//   "format": "zsas-file-backend/1",
//   "working_resolution": 1024,
//   "logit_resolution": 256,
//   "native_resolution": 1024,          // optional, defaults to working
//   "feature_dims": [C, h, w],
//   "decoder": {"kind": "synthetic", "suite": "synthetic_suite.json"}
//            | {"kind": "graph", "path": "decoder.onnx"}
//            | {"kind": "none"},
//   "images": {
//     "<id>": {"anomaly_map": "maps/a.f32", "features": "feats/a.f32"}
//   }
// }

struct FileBackendEntry
{
    std::filesystem::path anomaly_map;
    std::filesystem::path features;
};

/// Serves stored anomaly maps and feature grids; decode() is delegated.
/// Tensors are read lazily and checked against the declared shapes.
class FileBackend final : public ScorerBackend, public SegmenterBackend
{
public:
    FileBackend(int native_resolution, int working_resolution, int logit_resolution,
                FeatureDims feature_dims, std::map<std::string, FileBackendEntry> entries,
                std::shared_ptr<const SegmenterBackend> decoder);

    std::string name() const override { return "files"; }
    int native_resolution() const override { return native_resolution_; }
    int working_resolution() const override { return working_resolution_; }
    int logit_resolution() const override { return logit_resolution_; }
    FeatureDims feature_dims() const override { return feature_dims_; }

    ScoreGrid score(const ImageInput& image) const override;
    Embedding encode(const ImageInput& image) const override;
    std::vector<DecodeCandidate> decode(const Embedding& embedding, const PromptSet& prompts,
                                        bool multimask) const override;

    std::vector<std::string> ids() const;

private:
    const FileBackendEntry& entry(const std::string& id) const;

    int native_resolution_;
    int working_resolution_;
    int logit_resolution_;
    FeatureDims feature_dims_;
    std::map<std::string, FileBackendEntry> entries_;
    std::shared_ptr<const SegmenterBackend> decoder_;
};

/// Parses a manifest. Graph delegation needs zsas_graph; pass a loader to
/// resolve {"kind": "graph"} decoders (null rejects them).
using DecoderGraphLoader =
    std::shared_ptr<const SegmenterBackend> (*)(const std::filesystem::path& decoder_graph,
                                                int working_resolution, int logit_resolution);

BackendPair file_backend_load(const std::filesystem::path& manifest,
                              DecoderGraphLoader graph_loader = nullptr);

/// Writes a manifest plus tensors for the given maps/features; paths inside
/// are relative. Used by tests and by `zsas synth --dump-files`.
struct FileBackendImage
{
    std::string id;
    ScoreGrid anomaly_map;
    FeatureGrid features;
};

void write_file_backend(const std::filesystem::path& manifest, int working_resolution,
                        int logit_resolution, FeatureDims feature_dims,
                        const std::vector<FileBackendImage>& images,
                        const nlohmann::json& decoder);

}  // namespace zsas
