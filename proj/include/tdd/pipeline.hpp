#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tdd/bundle.hpp"
#include "tdd/hsi.hpp"
#include "tdd/net.hpp"
#include "tdd/sim.hpp"

namespace tdd {

struct TrainConfig {
    int patch_size = 10;
    int n_samples = 512;
    int batch_size = 16;
    int steps = 2000;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    SimConfig sim;

    void validate() const;
    std::string to_json_string() const;
    static TrainConfig from_json_string(const std::string& text);
};

struct TrainMeta {
    int steps_run = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::string source; // cube id / free-form provenance
};

// Trained network: parameter bundle + config + the band count it was
// trained with.
struct Checkpoint {
    NetworkConfig config;
    int in_bands = 0;
    std::uint64_t seed = 0;
    int patch_size = 0;
    TrainMeta meta;
    std::vector<BundleEntry> parameters;
};

// Thrown when the running loss goes non-finite; carries the last checkpoint
// whose update was still finite.
struct TrainDiverged : NumericError {
    TrainDiverged(int at_step, Checkpoint last, const std::string& msg)
        : NumericError(msg), step(at_step), last_good(std::move(last)) {}
    int step;
    Checkpoint last_good;
};

using ProgressFn = std::function<void(int step, double loss)>;

// Unsupervised training: simulate a labeled dataset from the (normalized)
// cube, then minimize the multi-scale loss with the adaptive-moment
// optimizer. Deterministic for a fixed seed.
Checkpoint train(const HsiCube& cube, const TrainConfig& tcfg, NetworkConfig ncfg,
                 const ProgressFn& progress = nullptr);

// Band ranges [begin, end) used when the test image has more bands than the
// checkpoint: consecutive full segments, with a final segment taken from the
// end of the spectrum when a remainder is left. Every band is covered.
std::vector<std::pair<int, int>> band_segments(int test_bands, int train_bands);

// Adapt a cube with B2 bands for a network trained on B1: passthrough when
// equal, 1-D linear spectral interpolation when B2 < B1, segmentation with
// the tail rule when B2 > B1.
std::vector<HsiCube> adapt_bands(const HsiCube& cube, int train_bands);

// Averaging helper for multi-segment detection results.
ScoreMap average_maps(const std::vector<ScoreMap>& maps);

// Tiled whole-image inference: per band-segment, run the frozen network on
// every patch, average overlaps, then average across segments.
ScoreMap infer(const HsiCube& cube, const Checkpoint& ckpt, int patch_size, int stride, int threads = 1);

// Checkpoint container: `<base>.ckpt.json` sidecar + `<base>.tb.json/.bin`
// parameter bundle. Round-trips bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::string& base);
Checkpoint load_checkpoint(const std::string& base);

// Build a float network with the checkpoint's parameters loaded.
TddNet<float> restore_network(const Checkpoint& ckpt);

} // namespace tdd
