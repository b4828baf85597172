#include "zsas/file_backend.hpp"

#include "zsas/io.hpp"
#include "zsas/synthetic.hpp"

namespace zsas {

namespace fs = std::filesystem;

FileBackend::FileBackend(int native_resolution, int working_resolution, int logit_resolution,
                         FeatureDims feature_dims, std::map<std::string, FileBackendEntry> entries,
                         std::shared_ptr<const SegmenterBackend> decoder)
    : native_resolution_(native_resolution),
      working_resolution_(working_resolution),
      logit_resolution_(logit_resolution),
      feature_dims_(feature_dims),
      entries_(std::move(entries)),
      decoder_(std::move(decoder))
{
    if (decoder_)
    {
        if (decoder_->working_resolution() != working_resolution_ ||
            decoder_->logit_resolution() != logit_resolution_)
        {
            throw ContractError("file backend: decoder '" + decoder_->name() +
                                "' resolutions do not match the manifest");
        }
    }
}

const FileBackendEntry& FileBackend::entry(const std::string& id) const
{
    auto it = entries_.find(id);
    if (it == entries_.end())
        throw DataError("file backend: no entry for image id '" + id + "'");
    return it->second;
}

std::vector<std::string> FileBackend::ids() const
{
    std::vector<std::string> out;
    for (const auto& [id, e] : entries_)
        out.push_back(id);
    return out;
}

ScoreGrid FileBackend::score(const ImageInput& image) const
{
    const auto& e = entry(image.id);
    try
    {
        auto grid = io::read_score_grid(e.anomaly_map);
        if (grid.height() != native_resolution_ || grid.width() != native_resolution_)
        {
            throw DataError("anomaly map is " + std::to_string(grid.height()) + "x" +
                            std::to_string(grid.width()) + ", expected " +
                            std::to_string(native_resolution_) + "x" +
                            std::to_string(native_resolution_));
        }
        return grid.as_normalized();
    }
    catch (const Error& err)
    {
        throw DataError("file backend, image '" + image.id + "': " + err.what());
    }
}

Embedding FileBackend::encode(const ImageInput& image) const
{
    const auto& e = entry(image.id);
    try
    {
        auto grid = io::read_feature_grid(e.features);
        if (grid.dims() != feature_dims_)
        {
            throw DataError("features have dims " + to_string(grid.dims()) + ", expected " +
                            to_string(feature_dims_));
        }
        return {image.id, std::move(grid)};
    }
    catch (const Error& err)
    {
        throw DataError("file backend, image '" + image.id + "': " + err.what());
    }
}

std::vector<DecodeCandidate> FileBackend::decode(const Embedding& embedding, const PromptSet& prompts,
                                                 bool multimask) const
{
    if (!decoder_)
        throw ContractError("file backend: manifest declares no decoder");
    return decoder_->decode(embedding, prompts, multimask);
}

namespace {

int positive_int(const nlohmann::json& doc, const char* key)
{
    if (!doc.contains(key) || !doc[key].is_number_integer() || doc[key].get<long long>() < 1)
        throw DataError(std::string("file backend manifest: '") + key + "' must be a positive integer");
    return doc[key].get<int>();
}

}  // namespace

BackendPair file_backend_load(const fs::path& manifest, DecoderGraphLoader graph_loader)
{
    nlohmann::json doc;
    try
    {
        doc = io::read_json(manifest);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw DataError("file backend manifest " + manifest.string() + ": " + e.what());
    }
    if (doc.value("format", "") != "zsas-file-backend/1")
        throw DataError("file backend manifest " + manifest.string() + ": unsupported format");

    const fs::path base = manifest.parent_path();
    const int working = positive_int(doc, "working_resolution");
    const int logit = positive_int(doc, "logit_resolution");
    const int native = doc.contains("native_resolution") ? positive_int(doc, "native_resolution") : working;

    const auto& fd = doc.value("feature_dims", nlohmann::json());
    if (!fd.is_array() || fd.size() != 3)
        throw DataError("file backend manifest: 'feature_dims' must be [C, h, w]");
    const FeatureDims dims{fd[0].get<int>(), fd[1].get<int>(), fd[2].get<int>()};

    std::map<std::string, FileBackendEntry> entries;
    if (!doc.contains("images") || !doc["images"].is_object())
        throw DataError("file backend manifest: 'images' must be an object");
    for (const auto& [id, e] : doc["images"].items())
    {
        if (!e.contains("anomaly_map") || !e.contains("features"))
            throw DataError("file backend manifest, image '" + id + "': needs anomaly_map and features");
        entries.emplace(id, FileBackendEntry{base / e["anomaly_map"].get<std::string>(),
                                             base / e["features"].get<std::string>()});
    }

    std::shared_ptr<const SegmenterBackend> decoder;
    const auto dec = doc.value("decoder", nlohmann::json{{"kind", "none"}});
    const std::string kind = dec.value("kind", "none");
    if (kind == "synthetic")
    {
        auto suite = synthetic::load_suite(base / dec.at("suite").get<std::string>());
        decoder = synthetic::make_backend(suite);
    }
    else if (kind == "graph")
    {
        if (!graph_loader)
            throw ContractError("file backend: graph decoders are not available here");
        decoder = graph_loader(base / dec.at("path").get<std::string>(), working, logit);
    }
    else if (kind != "none")
    {
        throw DataError("file backend manifest: unknown decoder kind '" + kind + "'");
    }

    auto backend = std::make_shared<FileBackend>(native, working, logit, dims, std::move(entries),
                                                 std::move(decoder));
    return {backend, backend};
}

void write_file_backend(const fs::path& manifest, int working_resolution, int logit_resolution,
                        FeatureDims feature_dims, const std::vector<FileBackendImage>& images,
                        const nlohmann::json& decoder)
{
    const fs::path base = manifest.parent_path();
    nlohmann::json doc;
    doc["format"] = "zsas-file-backend/1";
    doc["working_resolution"] = working_resolution;
    doc["logit_resolution"] = logit_resolution;
    doc["feature_dims"] = {feature_dims.channels, feature_dims.height, feature_dims.width};
    doc["decoder"] = decoder;
    doc["images"] = nlohmann::json::object();
    for (std::size_t i = 0; i < images.size(); ++i)
    {
        const auto& img = images[i];
        const std::string stem = "tensors/" + std::to_string(i);
        io::write_score_grid(base / (stem + "_map.f32"), img.anomaly_map);
        io::write_feature_grid(base / (stem + "_feat.f32"), img.features);
        doc["images"][img.id] = {{"anomaly_map", stem + "_map.f32"}, {"features", stem + "_feat.f32"}};
    }
    io::write_json(manifest, doc);
}

}  // namespace zsas
