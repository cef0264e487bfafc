#include "tdd/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tdd {

RectRegion select_anomaly_region(int patch_size, double max_fraction, Rng& rng) {
    if (patch_size < 2) throw ArgumentError("argument error: patch size must be >= 2");
    if (max_fraction <= 0.0 || max_fraction >= 0.5)
        throw ArgumentError("argument error: max_fraction must lie in (0, 0.5)");
    const double max_area = max_fraction * patch_size * patch_size;
    if (max_area < 1.0)
        throw ArgumentError("argument error: no anomaly region fits: max_fraction*P^2 < 1");

    RectRegion r;
    do {
        r.h = rng.uniform_int(1, patch_size);
        r.w = rng.uniform_int(1, patch_size);
    } while (static_cast<double>(r.h) * r.w > max_area);
    r.top = rng.uniform_int(0, patch_size - r.h);
    r.left = rng.uniform_int(0, patch_size - r.w);
    return r;
}

Patch spectral_shuffle(const Patch& patch, Rng& rng) {
    Patch out = patch;
    const int p = patch.size;
    const int b = patch.bands;
    std::vector<float> spectrum(b);
    for (int r = 0; r < p; ++r) {
        for (int c = 0; c < p; ++c) {
            for (int k = 0; k < b; ++k) spectrum[k] = patch.at(r, c, k);
            // Fisher-Yates
            for (int k = b - 1; k > 0; --k) {
                const int j = rng.uniform_int(0, k);
                std::swap(spectrum[k], spectrum[j]);
            }
            for (int k = 0; k < b; ++k) out.at(r, c, k) = spectrum[k];
        }
    }
    return out;
}

void implant_anomaly(const Patch& source, const Patch& shuffled, const RectRegion& region, Patch& x3,
                     BinaryMask& y3) {
    if (source.size != shuffled.size || source.bands != shuffled.bands)
        throw ArgumentError("argument error: implant shapes differ");
    if (region.top < 0 || region.left < 0 || region.h < 1 || region.w < 1 ||
        region.top + region.h > source.size || region.left + region.w > source.size)
        throw ArgumentError("argument error: region does not fit the patch");

    x3 = source;
    y3.height = source.size;
    y3.width = source.size;
    y3.values.assign(static_cast<std::size_t>(source.size) * source.size, 0);
    for (int r = region.top; r < region.top + region.h; ++r) {
        for (int c = region.left; c < region.left + region.w; ++c) {
            for (int b = 0; b < source.bands; ++b) x3.at(r, c, b) = shuffled.at(r, c, b);
            y3.at(r, c) = 1;
        }
    }
}

AffineMatrix affine_matrix(const AffineParams& params) {
    const double a = params.s * std::cos(params.theta);
    const double b = params.s * std::sin(params.theta);
    return {a, b, (1.0 - a) * params.cx - b * params.cy,
            -b, a, b * params.cx + (1.0 - a) * params.cy};
}

TrainingSample warp_sample(const Patch& x3, const BinaryMask& y3, const AffineParams& params) {
    if (y3.height != x3.size || y3.width != x3.size)
        throw ArgumentError("argument error: warp label/patch shapes differ");
    const int p = x3.size;
    const AffineMatrix t = affine_matrix(params);

    TrainingSample out;
    out.params = params;
    out.x = x3;
    out.y = y3;

    // Forward map: q = A*p + t_total with A = s*[cos sin; -sin cos] and
    // t_total folding the center compensation plus (dx, dy). Inverse map for
    // output pixel q: p = A^{-1} (q - t_total), A^{-1} = (1/s)[cos -sin; sin cos].
    const double tx = t[2] + params.dx;
    const double ty = t[5] + params.dy;
    const double inv_s = 1.0 / params.s;
    const double ca = std::cos(params.theta);
    const double sa = std::sin(params.theta);

    for (int row = 0; row < p; ++row) {
        for (int col = 0; col < p; ++col) {
            const double qx = col - tx;
            const double qy = row - ty;
            const double sx = inv_s * (ca * qx - sa * qy);
            const double sy = inv_s * (sa * qx + ca * qy);
            const int nx = static_cast<int>(std::lround(sx));
            const int ny = static_cast<int>(std::lround(sy));
            const bool inside = nx >= 0 && nx < p && ny >= 0 && ny < p;
            const int cx = std::clamp(nx, 0, p - 1);
            const int cy = std::clamp(ny, 0, p - 1);
            for (int b = 0; b < x3.bands; ++b) out.x.at(row, col, b) = x3.at(cy, cx, b);
            out.y.at(row, col) = inside ? y3.at(ny, nx) : 0;
        }
    }
    return out;
}

SimStages simulate_sample(const HsiCube& cube, int patch_size, const SimConfig& cfg, Rng& rng,
                          std::uint64_t substream_seed) {
    if (patch_size < 2 || patch_size > std::min(cube.height, cube.width))
        throw ArgumentError("argument error: patch size does not fit the cube");

    constexpr int kMaxRedraws = 100;
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
        SimStages st;
        const int row = rng.uniform_int(0, cube.height - patch_size);
        const int col = rng.uniform_int(0, cube.width - patch_size);
        st.source = copy_patch(cube, row, col, patch_size);

        RectRegion merged_label_region; // only used when cfg.regions == 1
        st.shuffled = spectral_shuffle(st.source, rng);
        st.x3 = st.source;
        st.y3.height = patch_size;
        st.y3.width = patch_size;
        st.y3.values.assign(static_cast<std::size_t>(patch_size) * patch_size, 0);
        const int n_regions = std::max(1, cfg.regions);
        const double per_region_fraction = cfg.max_fraction / n_regions;
        for (int k = 0; k < n_regions; ++k) {
            const RectRegion region = select_anomaly_region(patch_size, per_region_fraction, rng);
            Patch pasted;
            BinaryMask label;
            implant_anomaly(st.x3, st.shuffled, region, pasted, label);
            st.x3 = pasted;
            for (std::size_t i = 0; i < label.values.size(); ++i)
                st.y3.values[i] = st.y3.values[i] | label.values[i];
            merged_label_region = region;
        }

        AffineParams params;
        params.theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        params.s = rng.uniform(cfg.scale_min, cfg.scale_max);
        params.dx = rng.uniform(-cfg.translate_frac * patch_size, cfg.translate_frac * patch_size);
        params.dy = rng.uniform(-cfg.translate_frac * patch_size, cfg.translate_frac * patch_size);
        params.cx = (patch_size - 1) / 2.0;
        params.cy = (patch_size - 1) / 2.0;

        st.sample = warp_sample(st.x3, st.y3, params);
        st.sample.region = merged_label_region;
        st.sample.seed = substream_seed;
        st.sample.origin_row = row;
        st.sample.origin_col = col;
        if (st.sample.y.ones() > 0) return st;
        // warped label fell entirely outside the patch: redraw
    }
    throw NumericError("numeric error: could not draw a sample with a nonempty warped label");
}

std::vector<TrainingSample> simulate_dataset(const HsiCube& cube, int patch_size, int n_samples,
                                             const SimConfig& cfg, std::uint64_t seed) {
    if (n_samples < 0) throw ArgumentError("argument error: n_samples must be >= 0");
    std::vector<TrainingSample> out;
    out.reserve(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) {
        const std::uint64_t sub = seed ^ static_cast<std::uint64_t>(i);
        Rng rng(sub);
        out.push_back(simulate_sample(cube, patch_size, cfg, rng, sub).sample);
    }
    return out;
}

} // namespace tdd
