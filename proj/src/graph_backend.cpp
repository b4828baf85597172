#include "zsas/graph_backend.hpp"

#include <algorithm>
#include <array>
#include <mutex>
#include <sstream>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>

#include "zsas/imgproc.hpp"
#include "zsas/onnx_model_info.hpp"

namespace zsas {

namespace fs = std::filesystem;

namespace {

struct Preprocess
{
    std::array<double, 3> mean{};
    std::array<double, 3> std{};
    int input_size = 0;
};

std::array<double, 3> parse_triplet(const std::string& text, const fs::path& path, const char* key)
{
    try
    {
        const auto doc = nlohmann::json::parse(text);
        if (doc.is_array() && doc.size() == 3)
            return {doc[0].get<double>(), doc[1].get<double>(), doc[2].get<double>()};
    }
    catch (const nlohmann::json::exception&)
    {
    }
    throw ContractError(path.string() + ": metadata '" + key + "' must be a JSON array of 3 numbers");
}

Preprocess read_preprocess(const onnx::ModelInfo& info, const fs::path& path)
{
    Preprocess p;
    for (const char* key : {"mean", "std", "input_size"})
    {
        if (!info.meta(key))
            throw ContractError(path.string() + ": missing metadata '" + key + "'");
    }
    p.mean = parse_triplet(*info.meta("mean"), path, "mean");
    p.std = parse_triplet(*info.meta("std"), path, "std");
    for (double s : p.std)
    {
        if (!(s > 0.0))
            throw ContractError(path.string() + ": metadata 'std' must be positive");
    }
    try
    {
        p.input_size = std::stoi(*info.meta("input_size"));
    }
    catch (const std::exception&)
    {
        throw ContractError(path.string() + ": metadata 'input_size' must be an integer");
    }
    return p;
}

std::string describe_all(const std::vector<onnx::TensorInfo>& tensors)
{
    std::string out;
    for (const auto& t : tensors)
        out += (out.empty() ? "" : ", ") + t.describe();
    return out.empty() ? "(none)" : out;
}

/// An expected tensor; -1 matches any dim, -2 binds the value into *slot.
struct Expect
{
    std::string name;
    std::vector<std::int64_t> dims;
    std::vector<int*> slots;  ///< one per -2 dim, in order
};

std::string describe(const Expect& e)
{
    std::ostringstream out;
    out << e.name << "[";
    for (std::size_t i = 0; i < e.dims.size(); ++i)
    {
        if (i)
            out << ",";
        if (e.dims[i] < 0)
            out << "*";
        else
            out << e.dims[i];
    }
    out << "]";
    return out.str();
}

void check_signature(const fs::path& path, const std::vector<onnx::TensorInfo>& found,
                     std::vector<Expect> expected, const char* what)
{
    std::vector<std::string> problems;
    for (auto& e : expected)
    {
        auto it = std::find_if(found.begin(), found.end(), [&](const auto& t) { return t.name == e.name; });
        if (it == found.end())
        {
            problems.push_back("missing " + e.name);
            continue;
        }
        bool ok = it->dims.size() == e.dims.size() && it->elem_type == 1;
        std::size_t slot = 0;
        for (std::size_t i = 0; ok && i < e.dims.size(); ++i)
        {
            if (e.dims[i] == -2)
            {
                if (it->dims[i] < 1)
                    ok = false;
                else if (*e.slots[slot] > 0 && *e.slots[slot] != it->dims[i])
                    ok = false;
                else
                    *e.slots[slot] = static_cast<int>(it->dims[i]);
                ++slot;
            }
            else if (e.dims[i] >= 0 && it->dims[i] != e.dims[i])
            {
                ok = false;
            }
        }
        if (!ok)
            problems.push_back(e.name + " has shape " + it->describe());
    }
    if (!problems.empty())
    {
        std::string expected_text;
        for (const auto& e : expected)
            expected_text += (expected_text.empty() ? "" : ", ") + describe(e);
        std::string detail;
        for (const auto& p : problems)
            detail += (detail.empty() ? "" : "; ") + p;
        throw ContractError(path.string() + ": " + what + " signature mismatch (" + detail +
                            "). Expected " + expected_text + "; found " + describe_all(found));
    }
}

cv::dnn::Net load_net(const fs::path& path)
{
    try
    {
        auto net = cv::dnn::readNetFromONNX(path.string());
        if (net.empty())
            throw ContractError(path.string() + ": graph could not be loaded");
        net.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
        net.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
        return net;
    }
    catch (const cv::Exception& e)
    {
        throw ContractError(path.string() + ": graph could not be loaded: " + e.what());
    }
}

cv::Mat make_blob(const std::vector<int>& dims)
{
    return cv::Mat(static_cast<int>(dims.size()), dims.data(), CV_32F, cv::Scalar(0));
}

/// Resized, normalized NCHW blob.
cv::Mat image_blob(const RgbImage& image, const Preprocess& pre)
{
    const int S = pre.input_size;
    cv::Mat blob = make_blob({1, 3, S, S});
    auto* out = blob.ptr<float>();
    for (int c = 0; c < 3; ++c)
    {
        std::vector<float> plane(static_cast<std::size_t>(image.height) * image.width);
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x)
                plane[static_cast<std::size_t>(y) * image.width + x] = image.at(y, x, c);
        const auto resized = imgproc::resize_bilinear(ScoreGrid(image.height, image.width, std::move(plane)), S, S);
        const auto v = resized.values();
        for (std::size_t i = 0; i < v.size(); ++i)
            out[static_cast<std::size_t>(c) * S * S + i] = static_cast<float>((v[i] - pre.mean[c]) / pre.std[c]);
    }
    return blob;
}

class GraphScorer final : public ScorerBackend
{
public:
    explicit GraphScorer(const fs::path& path)
    {
        const auto info = onnx::read_model_info(path);
        pre_ = read_preprocess(info, path);
        int res = 0;
        int res2 = 0;
        check_signature(path, info.inputs, {{"image", {1, 3, pre_.input_size, pre_.input_size}, {}}}, "scorer");
        check_signature(path, info.outputs, {{"anomaly_map", {1, 1, -2, -2}, {&res, &res2}}}, "scorer");
        if (res != res2)
            throw ContractError(path.string() + ": scorer anomaly_map must be square");
        resolution_ = res;
        net_ = load_net(path);
    }

    std::string name() const override { return "graph"; }
    int native_resolution() const override { return resolution_; }

    ScoreGrid score(const ImageInput& image) const override
    {
        const auto blob = image_blob(image.load_pixels(), pre_);
        cv::Mat out;
        try
        {
            std::lock_guard lock(mutex_);
            net_.setInput(blob, "image");
            out = net_.forward("anomaly_map").clone();
        }
        catch (const cv::Exception& e)
        {
            throw BackendError("scorer inference failed for '" + image.id + "': " + e.what());
        }
        if (out.total() != static_cast<std::size_t>(resolution_) * resolution_)
            throw ContractError("scorer produced " + std::to_string(out.total()) + " values");
        const auto* p = out.ptr<float>();
        std::vector<float> values(p, p + out.total());
        for (auto& v : values)
            v = std::clamp(v, 0.0f, 1.0f);
        return ScoreGrid(resolution_, resolution_, std::move(values), true);
    }

private:
    Preprocess pre_;
    int resolution_ = 0;
    mutable cv::dnn::Net net_;
    mutable std::mutex mutex_;
};

class GraphSegmenter final : public SegmenterBackend
{
public:
    GraphSegmenter(const fs::path* encoder, const fs::path& decoder)
    {
        const auto dec = onnx::read_model_info(decoder);
        int C = 0, h = 0, w = 0, L = 0, L2 = 0, K = 0, K2 = 0, K3 = 0, S = 0, S2 = 0;
        check_signature(decoder, dec.inputs,
                        {{"image_embeddings", {1, -2, -2, -2}, {&C, &h, &w}},
                         {"point_coords", {1, -1, 2}, {}},
                         {"point_labels", {1, -1}, {}},
                         {"mask_input", {1, 1, -2, -2}, {&L, &L2}},
                         {"has_mask_input", {1}, {}},
                         {"orig_im_size", {2}, {}}},
                        "decoder");
        check_signature(decoder, dec.outputs,
                        {{"masks", {1, -2, -2, -2}, {&K, &S, &S2}},
                         {"iou_predictions", {1, -2}, {&K2}},
                         {"low_res_masks", {1, -2, -1, -1}, {&K3}}},
                        "decoder");
        if (L != L2 || S != S2 || K != K2 || K != K3)
            throw ContractError(decoder.string() + ": decoder output shapes disagree");
        const auto coords = dec.input("point_coords")->dims[1];
        const auto labels = dec.input("point_labels")->dims[1];
        if (coords != labels)
            throw ContractError(decoder.string() + ": point_coords and point_labels disagree on N");
        num_points_ = static_cast<int>(coords);
        dims_ = {C, h, w};
        logit_ = L;
        working_ = S;
        candidates_ = K;

        if (encoder)
        {
            const auto enc = onnx::read_model_info(*encoder);
            pre_ = read_preprocess(enc, *encoder);
            check_signature(*encoder, enc.inputs, {{"image", {1, 3, pre_.input_size, pre_.input_size}, {}}},
                            "encoder");
            check_signature(*encoder, enc.outputs, {{"image_embeddings", {1, C, h, w}, {}}}, "encoder");
            if (pre_.input_size != working_)
            {
                throw ContractError(encoder->string() + ": encoder input_size " +
                                    std::to_string(pre_.input_size) +
                                    " differs from decoder mask size " + std::to_string(working_));
            }
            encoder_ = load_net(*encoder);
            has_encoder_ = true;
        }
        decoder_ = load_net(decoder);
    }

    std::string name() const override { return "graph"; }
    int working_resolution() const override { return working_; }
    int logit_resolution() const override { return logit_; }
    FeatureDims feature_dims() const override { return dims_; }

    Embedding encode(const ImageInput& image) const override
    {
        if (!has_encoder_)
            throw ContractError("graph segmenter: no encoder graph loaded");
        const auto blob = image_blob(image.load_pixels(), pre_);
        cv::Mat out;
        try
        {
            std::lock_guard lock(encoder_mutex_);
            encoder_.setInput(blob, "image");
            out = encoder_.forward("image_embeddings").clone();
        }
        catch (const cv::Exception& e)
        {
            throw BackendError("encoder inference failed for '" + image.id + "': " + e.what());
        }
        const auto* p = out.ptr<float>();
        return {image.id, FeatureGrid(dims_.channels, dims_.height, dims_.width,
                                      std::vector<float>(p, p + out.total()))};
    }

    std::vector<DecodeCandidate> decode(const Embedding& embedding, const PromptSet& prompts,
                                        bool multimask) const override
    {
        check_embedding(*this, embedding);

        std::vector<std::array<float, 3>> points;  // x, y, label
        for (const auto& p : prompts.points)
            points.push_back({static_cast<float>(p.x), static_cast<float>(p.y),
                              p.polarity == Polarity::positive ? 1.0f : 0.0f});
        if (prompts.box)
        {
            points.push_back({static_cast<float>(prompts.box->x_min), static_cast<float>(prompts.box->y_min), 2.0f});
            points.push_back({static_cast<float>(prompts.box->x_max), static_cast<float>(prompts.box->y_max), 3.0f});
        }
        else
        {
            points.push_back({0.0f, 0.0f, -1.0f});
        }
        const int n = num_points_ > 0 ? num_points_ : static_cast<int>(points.size());
        if (static_cast<int>(points.size()) > n)
        {
            throw ContractError("graph decoder takes " + std::to_string(n) + " points, prompts need " +
                                std::to_string(points.size()));
        }

        cv::Mat emb = make_blob({1, dims_.channels, dims_.height, dims_.width});
        std::copy(embedding.features.values().begin(), embedding.features.values().end(), emb.ptr<float>());
        cv::Mat coords = make_blob({1, n, 2});
        cv::Mat labels = make_blob({1, n});
        for (int i = 0; i < n; ++i)
        {
            const bool real = i < static_cast<int>(points.size());
            coords.ptr<float>()[2 * i] = real ? points[i][0] : 0.0f;
            coords.ptr<float>()[2 * i + 1] = real ? points[i][1] : 0.0f;
            labels.ptr<float>()[i] = real ? points[i][2] : -1.0f;
        }
        cv::Mat mask_input = make_blob({1, 1, logit_, logit_});
        cv::Mat has_mask = make_blob({1});
        if (prompts.dense_logit)
        {
            const auto& d = *prompts.dense_logit;
            if (d.height() != logit_ || d.width() != logit_)
                throw ContractError("dense logit prompt must be " + std::to_string(logit_) + "x" +
                                    std::to_string(logit_));
            std::copy(d.values().begin(), d.values().end(), mask_input.ptr<float>());
            has_mask.ptr<float>()[0] = 1.0f;
        }
        cv::Mat orig = make_blob({2});
        orig.ptr<float>()[0] = static_cast<float>(working_);
        orig.ptr<float>()[1] = static_cast<float>(working_);

        std::vector<cv::Mat> outs;
        try
        {
            std::lock_guard lock(decoder_mutex_);
            decoder_.setInput(emb, "image_embeddings");
            decoder_.setInput(coords, "point_coords");
            decoder_.setInput(labels, "point_labels");
            decoder_.setInput(mask_input, "mask_input");
            decoder_.setInput(has_mask, "has_mask_input");
            decoder_.setInput(orig, "orig_im_size");
            decoder_.forward(outs, std::vector<cv::String>{"masks", "iou_predictions", "low_res_masks"});
            for (auto& o : outs)
                o = o.clone();
        }
        catch (const cv::Exception& e)
        {
            throw BackendError(std::string("decoder inference failed: ") + e.what());
        }

        const std::size_t mask_px = static_cast<std::size_t>(working_) * working_;
        const std::size_t logit_px = static_cast<std::size_t>(logit_) * logit_;
        if (outs.size() != 3 || outs[0].total() != mask_px * candidates_ ||
            outs[1].total() != static_cast<std::size_t>(candidates_) ||
            outs[2].total() != logit_px * candidates_)
        {
            throw ContractError("graph decoder outputs do not match its declared shapes");
        }

        const int count = multimask ? candidates_ : 1;
        std::vector<DecodeCandidate> result;
        for (int k = 0; k < count; ++k)
        {
            const float* m = outs[0].ptr<float>() + k * mask_px;
            std::vector<std::uint8_t> mask(mask_px);
            for (std::size_t i = 0; i < mask_px; ++i)
                mask[i] = m[i] > 0.0f ? 1 : 0;
            const float* l = outs[2].ptr<float>() + k * logit_px;
            result.push_back({BinaryMask(working_, working_, std::move(mask)),
                              ScoreGrid(logit_, logit_, std::vector<float>(l, l + logit_px)),
                              static_cast<double>(outs[1].ptr<float>()[k])});
        }
        return result;
    }

private:
    Preprocess pre_;
    FeatureDims dims_;
    int working_ = 0;
    int logit_ = 0;
    int candidates_ = 1;
    int num_points_ = 0;
    bool has_encoder_ = false;
    mutable cv::dnn::Net encoder_;
    mutable cv::dnn::Net decoder_;
    mutable std::mutex encoder_mutex_;
    mutable std::mutex decoder_mutex_;
};

}  // namespace

BackendPair load_graph_backend(const fs::path& encoder_graph, const fs::path& decoder_graph,
                               const fs::path& scorer_graph)
{
    auto segmenter = std::make_shared<GraphSegmenter>(&encoder_graph, decoder_graph);
    auto scorer = std::make_shared<GraphScorer>(scorer_graph);
    return {scorer, segmenter};
}

std::shared_ptr<const SegmenterBackend> load_graph_decoder(const fs::path& decoder_graph,
                                                           int working_resolution, int logit_resolution)
{
    auto segmenter = std::make_shared<GraphSegmenter>(nullptr, decoder_graph);
    if (segmenter->working_resolution() != working_resolution ||
        segmenter->logit_resolution() != logit_resolution)
    {
        throw ContractError(decoder_graph.string() + ": decoder works at " +
                            std::to_string(segmenter->working_resolution()) + " / logits " +
                            std::to_string(segmenter->logit_resolution()) + ", expected " +
                            std::to_string(working_resolution) + " / " +
                            std::to_string(logit_resolution));
    }
    return segmenter;
}

}  // namespace zsas
