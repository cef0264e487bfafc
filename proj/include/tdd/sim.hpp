#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tdd/hsi.hpp"
#include "tdd/rng.hpp"

namespace tdd {

// Rectangular anomaly region inside a patch.
struct RectRegion {
    int top = 0;
    int left = 0;
    int h = 0;
    int w = 0;

    bool contains(int row, int col) const {
        return row >= top && row < top + h && col >= left && col < left + w;
    }
    int area() const { return h * w; }
};

// Rotation/scale/translation about the patch center.
// alpha = s*cos(theta), beta = s*sin(theta); positive theta is anti-clockwise.
struct AffineParams {
    double theta = 0.0;
    double s = 1.0;
    double dx = 0.0;
    double dy = 0.0;
    double cx = 0.0; // patch center, (P-1)/2
    double cy = 0.0;
};

// 2x3 affine matrix, row-major: [a b tx; c d ty] acting on (x=col, y=row).
using AffineMatrix = std::array<double, 6>;

struct TrainingSample {
    Patch x;      // simulated patch, P x P x B
    BinaryMask y; // anomaly label, P x P
    RectRegion region;
    AffineParams params;
    std::uint64_t seed = 0; // substream seed that produced this sample
    int origin_row = 0;     // crop origin in the source cube
    int origin_col = 0;
};

struct SimConfig {
    double max_fraction = 0.2; // region area <= max_fraction * P^2
    double scale_min = 0.7;
    double scale_max = 1.3;
    double translate_frac = 0.15; // |dx|,|dy| <= translate_frac * P
    int regions = 1;              // rectangles implanted per patch pre-warp
};

// Procedure 1: uniform rectangle with area <= max_fraction * P^2
// (h, w rejection-sampled, then uniform placement).
RectRegion select_anomaly_region(int patch_size, double max_fraction, Rng& rng);

// Procedure 2a: independent uniform permutation of every pixel's spectrum.
Patch spectral_shuffle(const Patch& patch, Rng& rng);

// Procedure 2b: paste the shuffled pixels inside `region`; label = region.
void implant_anomaly(const Patch& source, const Patch& shuffled, const RectRegion& region, Patch& x3,
                     BinaryMask& y3);

// Closed-form matrix for the rotation/scale-about-center transform.
AffineMatrix affine_matrix(const AffineParams& params);

// Procedure 3: apply p' = T*p + b to patch and label together, by inverse
// mapping with nearest-neighbor sampling. Out-of-patch samples replicate the
// nearest border pixel for x and are 0 for y.
TrainingSample warp_sample(const Patch& x3, const BinaryMask& y3, const AffineParams& params);

// Intermediate stages of one simulated sample, for inspection/testing.
struct SimStages {
    Patch source;
    Patch shuffled; // X2
    Patch x3;
    BinaryMask y3;
    TrainingSample sample; // X4 / Y4
};

// Run Procedures 1-3 on one randomly cropped patch, drawing everything from
// `rng`. Redraws (bounded) if the warped label is empty.
SimStages simulate_sample(const HsiCube& cube, int patch_size, const SimConfig& cfg, Rng& rng,
                          std::uint64_t substream_seed);

// Full dataset: n samples, each from substream seed ^ index, so the result
// does not depend on evaluation order.
std::vector<TrainingSample> simulate_dataset(const HsiCube& cube, int patch_size, int n_samples,
                                             const SimConfig& cfg, std::uint64_t seed);

} // namespace tdd
