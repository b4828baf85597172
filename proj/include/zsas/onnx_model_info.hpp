#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace zsas::onnx {

/// One graph input or output. Dynamic dims are reported as -1.
struct TensorInfo
{
    std::string name;
    int elem_type = 0;  ///< ONNX TensorProto.DataType (1 = float)
    std::vector<std::int64_t> dims;

    std::string describe() const;
};

/// Just enough of an ONNX ModelProto to check signatures and read metadata.
struct ModelInfo
{
    std::map<std::string, std::string> metadata;
    std::vector<TensorInfo> inputs;  ///< initializers excluded
    std::vector<TensorInfo> outputs;

    const TensorInfo* input(const std::string& name) const;
    const TensorInfo* output(const std::string& name) const;
    std::optional<std::string> meta(const std::string& key) const;
};

/// Parses the protobuf wire format directly. Throws ContractError on
/// anything that is not a well-formed model.
ModelInfo parse_model_info(const std::string& bytes);
ModelInfo read_model_info(const std::filesystem::path& path);

}  // namespace zsas::onnx
