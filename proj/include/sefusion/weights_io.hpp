#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sefusion/errors.hpp"
#include "sefusion/tensor.hpp"

namespace sefusion {

// Container layout:
//   bytes 0-3    magic "MSRW"
//   bytes 4-7    format version, u32 little-endian (= 1)
//   bytes 8-15   header byte length, u64 little-endian
//   header       UTF-8 JSON object: name -> {shape, offset, dtype:"f32"},
//                space-padded so the payload starts 64-byte aligned
//   payload      little-endian IEEE-754 f32 runs; each entry's offset is
//                relative to the payload start and 64-byte aligned, with
//                zero padding between entries.
namespace container {

static_assert(std::endian::native == std::endian::little,
              "container writer assumes a little-endian host");

constexpr char kMagic[4] = {'M', 'S', 'R', 'W'};
constexpr uint32_t kVersion = 1;
constexpr uint64_t kAlign = 64;

inline uint64_t align_up(uint64_t v) { return (v + kAlign - 1) / kAlign * kAlign; }

inline void write(const std::string& path, const std::map<std::string, Tensor<float>>& entries) {
    nlohmann::json header = nlohmann::json::object();
    uint64_t offset = 0;
    for (const auto& [name, t] : entries) {
        header[name] = {{"shape", t.shape.dims()},
                        {"offset", offset},
                        {"dtype", "f32"}};
        offset = align_up(offset + static_cast<uint64_t>(t.numel()) * 4);
    }

    std::string htext = header.dump();
    const uint64_t prefix = 16;
    while ((prefix + htext.size()) % kAlign != 0) htext.push_back(' ');

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(kMagic, 4);
    uint32_t ver = kVersion;
    out.write(reinterpret_cast<const char*>(&ver), 4);
    uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));

    uint64_t pos = 0;
    const std::string zeros(kAlign, '\0');
    for (const auto& [name, t] : entries) {
        const uint64_t want = header[name]["offset"].get<uint64_t>();
        while (pos < want) {
            const uint64_t n = std::min<uint64_t>(kAlign, want - pos);
            out.write(zeros.data(), static_cast<std::streamsize>(n));
            pos += n;
        }
        out.write(reinterpret_cast<const char*>(t.v.data()),
                  static_cast<std::streamsize>(t.v.size() * 4));
        pos += static_cast<uint64_t>(t.v.size()) * 4;
    }
    if (!out) throw IoError("write failed for " + path);
}

inline std::map<std::string, Tensor<float>> read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError(path + ": not a weight container (bad magic)");
    uint32_t ver;
    std::memcpy(&ver, bytes.data() + 4, 4);
    if (ver != kVersion)
        throw FormatError(path + ": unsupported container version " + std::to_string(ver));
    uint64_t hlen;
    std::memcpy(&hlen, bytes.data() + 8, 8);
    if (16 + hlen > bytes.size()) throw FormatError(path + ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(16, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": malformed container header: " + e.what());
    }
    if (!header.is_object()) throw FormatError(path + ": container header must be an object");

    const uint64_t payload_start = 16 + hlen;
    std::map<std::string, Tensor<float>> out;
    for (auto it = header.begin(); it != header.end(); ++it) {
        const auto& meta = it.value();
        if (!meta.contains("shape") || !meta.contains("offset") || !meta.contains("dtype"))
            throw FormatError(path + ": entry " + it.key() + " missing shape/offset/dtype");
        if (meta["dtype"].get<std::string>() != "f32")
            throw FormatError(path + ": entry " + it.key() + " has unsupported dtype");
        std::vector<int64_t> dims = meta["shape"].get<std::vector<int64_t>>();
        Shape shape(dims);
        const uint64_t off = meta["offset"].get<uint64_t>();
        const uint64_t nbytes = static_cast<uint64_t>(shape.numel()) * 4;
        if (payload_start + off + nbytes > bytes.size())
            throw FormatError(path + ": truncated payload for entry " + it.key());
        std::vector<float> vals(static_cast<size_t>(shape.numel()));
        std::memcpy(vals.data(), bytes.data() + payload_start + off, nbytes);
        out.emplace(it.key(), Tensor<float>(std::move(shape), std::move(vals)));
    }
    return out;
}

}  // namespace container

}  // namespace sefusion
