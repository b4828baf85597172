#include "zsas/onnx_model_info.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

#include "zsas/errors.hpp"

namespace zsas::onnx {

namespace {

// Protobuf wire reader over a byte range.
class Reader
{
public:
    explicit Reader(std::string_view data) : data_(data) {}

    bool done() const { return pos_ >= data_.size(); }

    std::uint64_t varint()
    {
        std::uint64_t out = 0;
        for (int shift = 0; shift < 64; shift += 7)
        {
            if (pos_ >= data_.size())
                fail("truncated varint");
            const auto byte = static_cast<std::uint8_t>(data_[pos_++]);
            out |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
            if (!(byte & 0x80))
                return out;
        }
        fail("varint too long");
    }

    std::string_view bytes()
    {
        const auto n = varint();
        if (n > data_.size() - pos_)
            fail("length-delimited field overruns the buffer");
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    void skip(int wire)
    {
        switch (wire)
        {
        case 0: varint(); break;
        case 1: advance(8); break;
        case 2: bytes(); break;
        case 5: advance(4); break;
        default: fail("unsupported wire type " + std::to_string(wire));
        }
    }

    /// Next (field, wire type).
    std::pair<int, int> tag()
    {
        const auto t = varint();
        const int field = static_cast<int>(t >> 3);
        if (field == 0)
            fail("field number 0");
        return {field, static_cast<int>(t & 7)};
    }

    [[noreturn]] static void fail(const std::string& why)
    {
        throw ContractError("malformed ONNX model: " + why);
    }

private:
    void advance(std::size_t n)
    {
        if (n > data_.size() - pos_)
            fail("truncated fixed-width field");
        pos_ += n;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

void expect_wire(int wire, int expected)
{
    if (wire != expected)
        Reader::fail("unexpected wire type");
}

void parse_shape(std::string_view data, TensorInfo& info)
{
    Reader r(data);
    while (!r.done())
    {
        auto [field, wire] = r.tag();
        if (field != 1)
        {
            r.skip(wire);
            continue;
        }
        expect_wire(wire, 2);
        Reader dim(r.bytes());
        std::int64_t value = -1;
        while (!dim.done())
        {
            auto [f, w] = dim.tag();
            if (f == 1 && w == 0)
                value = static_cast<std::int64_t>(dim.varint());
            else
                dim.skip(w);
        }
        info.dims.push_back(value);
    }
}

void parse_value_info(std::string_view data, TensorInfo& info)
{
    Reader r(data);
    while (!r.done())
    {
        auto [field, wire] = r.tag();
        if (field == 1 && wire == 2)
        {
            info.name = std::string(r.bytes());
        }
        else if (field == 2 && wire == 2)
        {
            Reader type(r.bytes());
            while (!type.done())
            {
                auto [tf, tw] = type.tag();
                if (tf != 1 || tw != 2)
                {
                    type.skip(tw);
                    continue;
                }
                Reader tensor(type.bytes());
                while (!tensor.done())
                {
                    auto [f, w] = tensor.tag();
                    if (f == 1 && w == 0)
                        info.elem_type = static_cast<int>(tensor.varint());
                    else if (f == 2 && w == 2)
                        parse_shape(tensor.bytes(), info);
                    else
                        tensor.skip(w);
                }
            }
        }
        else
        {
            r.skip(wire);
        }
    }
}

std::string initializer_name(std::string_view data)
{
    Reader r(data);
    while (!r.done())
    {
        auto [field, wire] = r.tag();
        if (field == 8 && wire == 2)
            return std::string(r.bytes());
        r.skip(wire);
    }
    return {};
}

}  // namespace

std::string TensorInfo::describe() const
{
    std::ostringstream out;
    out << name << "[";
    for (std::size_t i = 0; i < dims.size(); ++i)
    {
        if (i)
            out << ",";
        if (dims[i] < 0)
            out << "?";
        else
            out << dims[i];
    }
    out << "]";
    return out.str();
}

const TensorInfo* ModelInfo::input(const std::string& name) const
{
    auto it = std::find_if(inputs.begin(), inputs.end(), [&](const auto& t) { return t.name == name; });
    return it == inputs.end() ? nullptr : &*it;
}

const TensorInfo* ModelInfo::output(const std::string& name) const
{
    auto it = std::find_if(outputs.begin(), outputs.end(), [&](const auto& t) { return t.name == name; });
    return it == outputs.end() ? nullptr : &*it;
}

std::optional<std::string> ModelInfo::meta(const std::string& key) const
{
    auto it = metadata.find(key);
    if (it == metadata.end())
        return std::nullopt;
    return it->second;
}

ModelInfo parse_model_info(const std::string& bytes)
{
    ModelInfo info;
    bool has_graph = false;
    std::set<std::string> initializers;
    std::vector<TensorInfo> inputs;

    Reader model(bytes);
    while (!model.done())
    {
        auto [field, wire] = model.tag();
        if (field == 7)
        {
            expect_wire(wire, 2);
            has_graph = true;
            Reader graph(model.bytes());
            while (!graph.done())
            {
                auto [f, w] = graph.tag();
                if (f == 5 && w == 2)
                {
                    initializers.insert(initializer_name(graph.bytes()));
                }
                else if ((f == 11 || f == 12) && w == 2)
                {
                    TensorInfo t;
                    parse_value_info(graph.bytes(), t);
                    (f == 11 ? inputs : info.outputs).push_back(std::move(t));
                }
                else
                {
                    graph.skip(w);
                }
            }
        }
        else if (field == 14)
        {
            expect_wire(wire, 2);
            Reader prop(model.bytes());
            std::string key;
            std::string value;
            while (!prop.done())
            {
                auto [f, w] = prop.tag();
                if (f == 1 && w == 2)
                    key = std::string(prop.bytes());
                else if (f == 2 && w == 2)
                    value = std::string(prop.bytes());
                else
                    prop.skip(w);
            }
            info.metadata[key] = value;
        }
        else
        {
            model.skip(wire);
        }
    }
    if (!has_graph)
        Reader::fail("no graph");

    for (auto& t : inputs)
    {
        if (!initializers.count(t.name))
            info.inputs.push_back(std::move(t));
    }
    return info;
}

ModelInfo read_model_info(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ContractError("cannot open graph " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try
    {
        return parse_model_info(buffer.str());
    }
    catch (const ContractError& e)
    {
        throw ContractError(path.string() + ": " + e.what());
    }
}

}  // namespace zsas::onnx
