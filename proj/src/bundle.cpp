#include "tdd/bundle.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tdd/errors.hpp"
#include "tdd/tensor.hpp"

namespace tdd {

void save_bundle(const std::vector<BundleEntry>& entries, const std::string& base) {
    std::string manifest = "[";
    std::vector<unsigned char> payload;
    std::size_t offset = 0;
    for (std::size_t e = 0; e < entries.size(); ++e) {
        const auto& entry = entries[e];
        if (entry.values.size() != static_cast<std::size_t>(numel_of(entry.shape)))
            throw ArgumentError("argument error: bundle entry " + entry.name + " has " +
                                std::to_string(entry.values.size()) + " values for shape " +
                                shape_str(entry.shape));
        if (e) manifest += ",";
        manifest += "{\"name\":" + nlohmann::json(entry.name).dump() + ",\"shape\":[";
        for (std::size_t d = 0; d < entry.shape.size(); ++d) {
            if (d) manifest += ",";
            manifest += std::to_string(entry.shape[d]);
        }
        manifest += "],\"offset\":" + std::to_string(offset) + "}";
        for (const float v : entry.values) {
            const auto u = std::bit_cast<std::uint32_t>(v);
            payload.push_back(static_cast<unsigned char>(u & 0xff));
            payload.push_back(static_cast<unsigned char>((u >> 8) & 0xff));
            payload.push_back(static_cast<unsigned char>((u >> 16) & 0xff));
            payload.push_back(static_cast<unsigned char>((u >> 24) & 0xff));
        }
        offset += entry.values.size() * 4;
    }
    manifest += "]\n";

    std::ofstream jm(base + ".tb.json", std::ios::binary | std::ios::trunc);
    if (!jm) throw IoError("i/o error: cannot write manifest " + base + ".tb.json");
    jm << manifest;
    std::ofstream bin(base + ".tb.bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw IoError("i/o error: cannot write payload " + base + ".tb.bin");
    bin.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!bin) throw IoError("i/o error: short write to " + base + ".tb.bin");
}

std::vector<BundleEntry> load_bundle(const std::string& base) {
    std::ifstream jm(base + ".tb.json");
    if (!jm) throw IoError("i/o error: cannot open manifest " + base + ".tb.json");
    std::stringstream buf;
    buf << jm.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("format error: manifest " + base + ".tb.json is not valid JSON (" + e.what() + ")");
    }
    if (!j.is_array()) throw FormatError("format error: manifest " + base + ".tb.json must be a JSON list");

    std::ifstream bin(base + ".tb.bin", std::ios::binary);
    if (!bin) throw IoError("i/o error: cannot open payload " + base + ".tb.bin");
    bin.seekg(0, std::ios::end);
    const auto nbytes = static_cast<std::size_t>(bin.tellg());
    bin.seekg(0, std::ios::beg);
    std::vector<unsigned char> raw(nbytes);
    bin.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(nbytes));
    if (!bin) throw IoError("i/o error: short read from " + base + ".tb.bin");

    std::vector<BundleEntry> entries;
    std::size_t expected_end = 0;
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("name") || !item.contains("shape") || !item.contains("offset"))
            throw FormatError("format error: manifest entry missing name/shape/offset in " + base + ".tb.json");
        BundleEntry e;
        e.name = item.at("name").get<std::string>();
        e.shape = item.at("shape").get<std::vector<int>>();
        const auto offset = item.at("offset").get<std::size_t>();
        const auto count = static_cast<std::size_t>(numel_of(e.shape));
        if (offset + count * 4 > nbytes)
            throw SizeError("size error: bundle entry " + e.name + " overruns payload (" +
                            std::to_string(offset + count * 4) + " > " + std::to_string(nbytes) + " bytes)");
        e.values.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t o = offset + 4 * i;
            const std::uint32_t u = static_cast<std::uint32_t>(raw[o]) |
                                    (static_cast<std::uint32_t>(raw[o + 1]) << 8) |
                                    (static_cast<std::uint32_t>(raw[o + 2]) << 16) |
                                    (static_cast<std::uint32_t>(raw[o + 3]) << 24);
            e.values[i] = std::bit_cast<float>(u);
        }
        expected_end = std::max(expected_end, offset + count * 4);
        entries.push_back(std::move(e));
    }
    if (expected_end != nbytes)
        throw SizeError("size error: payload " + base + ".tb.bin holds " + std::to_string(nbytes) +
                        " bytes, manifest implies " + std::to_string(expected_end));
    return entries;
}

} // namespace tdd
