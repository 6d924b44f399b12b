#include "can/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "can/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian");
static_assert(sizeof(double) == 8, "checkpoint blobs are 64-bit floats");

namespace can {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'N', 'C', 'K', 'P', 'T', '1'};

using nlohmann::json;

void append_blob(std::string& out, const Tensor& t) {
    const std::size_t bytes = t.size() * sizeof(double);
    const std::size_t pos = out.size();
    out.resize(pos + bytes);
    std::memcpy(out.data() + pos, t.data(), bytes);
}

Tensor read_blob(const std::string& blobs, std::size_t offset,
                 const std::vector<std::size_t>& shape) {
    std::size_t count = shape.empty() ? 0 : 1;
    for (std::size_t d : shape) count *= d;
    const std::size_t bytes = count * sizeof(double);
    if (offset + bytes > blobs.size())
        throw ParseError("checkpoint blob region truncated", 0, 0);
    can::DoubleVec values(count);
    std::memcpy(values.data(), blobs.data() + offset, bytes);
    return Tensor(shape, std::move(values));
}

}  // namespace

void write_checkpoint(const std::string& path, const std::string& extras_json,
                      const ParameterStore& store) {
    json manifest;
    manifest["format"] = "CANCKPT1";
    if (extras_json.empty()) {
        manifest["extras"] = json::object();
    } else {
        json extras = json::parse(extras_json, nullptr, /*allow_exceptions=*/false);
        if (extras.is_discarded())
            throw ContractViolation("checkpoint extras are not valid JSON");
        manifest["extras"] = std::move(extras);
    }

    std::string blobs;
    json dir = json::array();
    for (const std::string& name : store.names()) {
        const ParamEntry& e = store.entry(name);
        json entry;
        entry["name"] = name;
        entry["shape"] = e.value.shape();
        entry["offset"] = blobs.size();
        entry["trainable"] = e.trainable;
        entry["step"] = e.step;
        dir.push_back(std::move(entry));
        append_blob(blobs, e.value);  // value, then both moment buffers
        append_blob(blobs, e.m);
        append_blob(blobs, e.v);
    }
    manifest["tensors"] = std::move(dir);

    const std::string text = manifest.dump();
    const std::uint64_t len = text.size();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ContractViolation("cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(blobs.data(), static_cast<std::streamsize>(blobs.size()));
    if (!out) throw ContractViolation("write failed for '" + path + "'");
}

CheckpointData read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint '" + path + "'", 0, 0);
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());

    if (data.size() < sizeof(kMagic) + sizeof(std::uint64_t) ||
        std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
        throw ParseError("'" + path + "' is not a checkpoint file", 0, 0);

    std::uint64_t len = 0;
    std::memcpy(&len, data.data() + sizeof(kMagic), sizeof(len));
    const std::size_t header = sizeof(kMagic) + sizeof(std::uint64_t);
    if (header + len > data.size())
        throw ParseError("checkpoint manifest truncated", 0, 0);

    const json manifest =
        json::parse(data.substr(header, len), nullptr, /*allow_exceptions=*/false);
    if (manifest.is_discarded() || manifest.value("format", "") != "CANCKPT1")
        throw ParseError("checkpoint manifest is malformed", 0, 0);

    const std::string blobs = data.substr(header + len);
    CheckpointData result;
    result.extras_json = manifest.value("extras", json::object()).dump();
    for (const json& entry : manifest.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        const auto offset = entry.at("offset").get<std::size_t>();
        Tensor value = read_blob(blobs, offset, shape);
        const std::size_t bytes = value.size() * sizeof(double);
        result.store.create(name, std::move(value), entry.value("trainable", true));
        ParamEntry& e = result.store.entry(name);
        e.m = read_blob(blobs, offset + bytes, shape);
        e.v = read_blob(blobs, offset + 2 * bytes, shape);
        e.step = entry.value("step", std::int64_t{0});
    }
    return result;
}

}  // namespace can
