#include "tdd/hsi.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tdd {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string base_of(const std::string& path) {
    if (ends_with(path, ".hsi.json")) return path.substr(0, path.size() - 9);
    if (ends_with(path, ".hsi.bin")) return path.substr(0, path.size() - 8);
    return path;
}

int require_positive_int(const nlohmann::json& j, const char* field, const std::string& where) {
    if (!j.contains(field))
        throw FormatError("format error: missing field \"" + std::string(field) + "\" in " + where);
    const auto& v = j.at(field);
    if (!v.is_number_integer() || v.get<long long>() < 1)
        throw FormatError("format error: field \"" + std::string(field) + "\" must be a positive integer in " + where);
    return v.get<int>();
}

void require_string_value(const nlohmann::json& j, const char* field, const char* expected,
                          const std::string& where) {
    if (!j.contains(field))
        throw FormatError("format error: missing field \"" + std::string(field) + "\" in " + where);
    if (!j.at(field).is_string() || j.at(field).get<std::string>() != expected)
        throw FormatError("format error: field \"" + std::string(field) + "\" must be \"" + expected +
                          "\" in " + where);
}

std::vector<float> read_payload(const std::string& bin_path, std::size_t expected_count) {
    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw IoError("i/o error: cannot open payload " + bin_path);
    in.seekg(0, std::ios::end);
    const auto nbytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    if (nbytes != expected_count * 4)
        throw SizeError("size error: payload " + bin_path + " holds " + std::to_string(nbytes) +
                        " bytes, header implies " + std::to_string(expected_count * 4));
    std::vector<unsigned char> raw(nbytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(nbytes));
    if (!in) throw IoError("i/o error: short read from " + bin_path);

    std::vector<float> out(expected_count);
    for (std::size_t i = 0; i < expected_count; ++i) {
        const std::uint32_t u = static_cast<std::uint32_t>(raw[4 * i]) |
                                (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                                (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                                (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
        out[i] = std::bit_cast<float>(u);
    }
    return out;
}

void write_payload(const std::string& bin_path, const std::vector<float>& values) {
    std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("i/o error: cannot open payload for writing: " + bin_path);
    std::vector<unsigned char> raw(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto u = std::bit_cast<std::uint32_t>(values[i]);
        raw[4 * i] = static_cast<unsigned char>(u & 0xff);
        raw[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
        raw[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
        raw[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("i/o error: short write to " + bin_path);
}

} // namespace

std::string container_header_path(const std::string& path) { return base_of(path) + ".hsi.json"; }
std::string container_payload_path(const std::string& path) { return base_of(path) + ".hsi.bin"; }

HsiCube load_cube(const std::string& path) {
    const std::string header_path = container_header_path(path);
    std::ifstream in(header_path);
    if (!in) throw IoError("i/o error: cannot open header " + header_path);
    std::stringstream buf;
    buf << in.rdbuf();

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("format error: header " + header_path + " is not valid JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw FormatError("format error: header " + header_path + " is not a JSON object");

    HsiCube cube;
    cube.height = require_positive_int(j, "height", header_path);
    cube.width = require_positive_int(j, "width", header_path);
    cube.bands = require_positive_int(j, "bands", header_path);
    require_string_value(j, "dtype", "f32", header_path);
    require_string_value(j, "order", "bsq", header_path);
    require_string_value(j, "endian", "little", header_path);
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "height" && key != "width" && key != "bands" && key != "dtype" && key != "order" &&
            key != "endian")
            throw FormatError("format error: unknown field \"" + key + "\" in " + header_path);
    }

    cube.data = read_payload(container_payload_path(path), cube.size());
    for (const float v : cube.data)
        if (!std::isfinite(v))
            throw DataError("data error: non-finite value in " + container_payload_path(path));
    return cube;
}

void save_cube(const HsiCube& cube, const std::string& path) {
    if (cube.height < 1 || cube.width < 1 || cube.bands < 1 || cube.data.size() != cube.size())
        throw ArgumentError("argument error: cube dimensions/data length inconsistent");
    for (const float v : cube.data)
        if (!std::isfinite(v)) throw DataError("data error: refusing to save non-finite value");

    // Canonical one-line header with fixed field order so saved containers
    // round-trip byte-identically.
    char header[160];
    std::snprintf(header, sizeof(header),
                  "{\"height\":%d,\"width\":%d,\"bands\":%d,\"dtype\":\"f32\",\"order\":\"bsq\","
                  "\"endian\":\"little\"}\n",
                  cube.height, cube.width, cube.bands);
    const std::string header_path = container_header_path(path);
    std::ofstream out(header_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("i/o error: cannot open header for writing: " + header_path);
    out << header;
    if (!out) throw IoError("i/o error: short write to " + header_path);
    out.close();

    write_payload(container_payload_path(path), cube.data);
}

std::size_t BinaryMask::ones() const {
    std::size_t n = 0;
    for (const auto v : values) n += v;
    return n;
}

BinaryMask load_mask(const std::string& path) {
    const HsiCube cube = load_cube(path);
    if (cube.bands != 1)
        throw FormatError("format error: mask container must have bands=1, got " + std::to_string(cube.bands));
    BinaryMask mask;
    mask.height = cube.height;
    mask.width = cube.width;
    mask.values.resize(cube.data.size());
    for (std::size_t i = 0; i < cube.data.size(); ++i) {
        if (cube.data[i] == 0.0f)
            mask.values[i] = 0;
        else if (cube.data[i] == 1.0f)
            mask.values[i] = 1;
        else
            throw DataError("data error: mask value " + std::to_string(cube.data[i]) + " is not 0 or 1");
    }
    return mask;
}

void save_mask(const BinaryMask& mask, const std::string& path) {
    HsiCube cube;
    cube.height = mask.height;
    cube.width = mask.width;
    cube.bands = 1;
    cube.data.resize(mask.values.size());
    for (std::size_t i = 0; i < mask.values.size(); ++i) cube.data[i] = mask.values[i] ? 1.0f : 0.0f;
    save_cube(cube, path);
}

ScoreMap load_map(const std::string& path) {
    const HsiCube cube = load_cube(path);
    if (cube.bands != 1)
        throw FormatError("format error: score-map container must have bands=1, got " +
                          std::to_string(cube.bands));
    ScoreMap map;
    map.height = cube.height;
    map.width = cube.width;
    map.scores.assign(cube.data.begin(), cube.data.end());
    return map;
}

void save_map(const ScoreMap& map, const std::string& path) {
    HsiCube cube;
    cube.height = map.height;
    cube.width = map.width;
    cube.bands = 1;
    cube.data.resize(map.scores.size());
    for (std::size_t i = 0; i < map.scores.size(); ++i) cube.data[i] = static_cast<float>(map.scores[i]);
    save_cube(cube, path);
}

HsiCube normalize_cube(const HsiCube& cube) {
    HsiCube out = cube;
    const std::size_t plane = static_cast<std::size_t>(cube.height) * cube.width;
    for (int b = 0; b < cube.bands; ++b) {
        float* band = out.data.data() + static_cast<std::size_t>(b) * plane;
        float lo = band[0], hi = band[0];
        for (std::size_t i = 1; i < plane; ++i) {
            lo = std::min(lo, band[i]);
            hi = std::max(hi, band[i]);
        }
        if (hi == lo) {
            for (std::size_t i = 0; i < plane; ++i) band[i] = 0.0f;
        } else {
            const float range = hi - lo;
            for (std::size_t i = 0; i < plane; ++i) band[i] = (band[i] - lo) / range;
        }
    }
    return out;
}

std::vector<int> patch_origins(int extent, int size, int stride) {
    std::vector<int> origins;
    for (int o = 0; o + size <= extent; o += stride) origins.push_back(o);
    if (origins.empty() || origins.back() + size < extent) origins.push_back(extent - size);
    return origins;
}

Patch copy_patch(const HsiCube& cube, int row, int col, int size) {
    if (row < 0 || col < 0 || size < 2 || row + size > cube.height || col + size > cube.width)
        throw ArgumentError("argument error: patch (" + std::to_string(row) + "," + std::to_string(col) +
                            ") size " + std::to_string(size) + " out of bounds");
    Patch p;
    p.row = row;
    p.col = col;
    p.size = size;
    p.bands = cube.bands;
    p.data.resize(static_cast<std::size_t>(size) * size * cube.bands);
    for (int b = 0; b < cube.bands; ++b)
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c) p.at(r, c, b) = cube.at(row + r, col + c, b);
    return p;
}

std::vector<Patch> extract_patches(const HsiCube& cube, int size, int stride) {
    if (size < 2 || size > std::min(cube.height, cube.width))
        throw ArgumentError("argument error: patch size " + std::to_string(size) +
                            " exceeds image extent " + std::to_string(std::min(cube.height, cube.width)));
    if (stride < 1 || stride > size)
        throw ArgumentError("argument error: stride must lie in [1, patch size] so tiles cover every pixel");
    const auto rows = patch_origins(cube.height, size, stride);
    const auto cols = patch_origins(cube.width, size, stride);
    std::vector<Patch> patches;
    patches.reserve(rows.size() * cols.size());
    for (const int r : rows)
        for (const int c : cols) patches.push_back(copy_patch(cube, r, c, size));
    return patches;
}

} // namespace tdd
