#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdd/errors.hpp"

namespace tdd {

// Hyperspectral cube, stored band-sequential in memory (band-major, then
// row, then column) to match the on-disk container payload.
struct HsiCube {
    int height = 0;
    int width = 0;
    int bands = 0;
    std::vector<float> data; // size height*width*bands, BSQ order

    float& at(int row, int col, int band) {
        return data[(static_cast<std::size_t>(band) * height + row) * width + col];
    }
    float at(int row, int col, int band) const {
        return data[(static_cast<std::size_t>(band) * height + row) * width + col];
    }
    std::size_t size() const { return static_cast<std::size_t>(height) * width * bands; }
};

struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> values; // each exactly 0 or 1

    std::uint8_t& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
    std::uint8_t at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
    std::size_t ones() const;
};

struct ScoreMap {
    int height = 0;
    int width = 0;
    std::vector<double> scores;

    double& at(int row, int col) { return scores[static_cast<std::size_t>(row) * width + col]; }
    double at(int row, int col) const { return scores[static_cast<std::size_t>(row) * width + col]; }
};

// Square patch copied out of a cube. Data is BSQ like the cube.
struct Patch {
    int row = 0; // origin in the source cube
    int col = 0;
    int size = 0; // side length P
    int bands = 0;
    std::vector<float> data; // size*size*bands

    float& at(int r, int c, int b) {
        return data[(static_cast<std::size_t>(b) * size + r) * size + c];
    }
    float at(int r, int c, int b) const {
        return data[(static_cast<std::size_t>(b) * size + r) * size + c];
    }
};

// Container I/O. A container is a pair of files: `<base>.hsi.json` (one-line
// header) and `<base>.hsi.bin` (little-endian f32 payload, BSQ). `path` may
// name either file or just the base.
HsiCube load_cube(const std::string& path);
void save_cube(const HsiCube& cube, const std::string& path);

// Masks and score maps reuse the container with bands = 1.
BinaryMask load_mask(const std::string& path);
void save_mask(const BinaryMask& mask, const std::string& path);
ScoreMap load_map(const std::string& path);
void save_map(const ScoreMap& map, const std::string& path);

// Resolved file names for a container path (exposed for tooling/tests).
std::string container_header_path(const std::string& path);
std::string container_payload_path(const std::string& path);

// Per-band linear rescale to [0,1]; a constant band maps to all zeros.
HsiCube normalize_cube(const HsiCube& cube);

// Tile the cube with `size`x`size` patches at stride `stride`. Origins run
// 0, S, 2S, ... and the final origin in each axis is clamped so the last
// patch ends exactly at the border; every pixel is covered.
std::vector<Patch> extract_patches(const HsiCube& cube, int size, int stride);

// The origin schedule used by extract_patches, for one axis.
std::vector<int> patch_origins(int extent, int size, int stride);

// Copy one patch out of a cube (bounds-checked).
Patch copy_patch(const HsiCube& cube, int row, int col, int size);

} // namespace tdd
