#include "tdd/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace tdd {

void TrainConfig::validate() const {
    if (patch_size < 4) throw ArgumentError("argument error: patch_size must be >= 4");
    if (n_samples < 0) throw ArgumentError("argument error: n_samples must be >= 0");
    if (batch_size < 1) throw ArgumentError("argument error: batch_size must be >= 1");
    if (steps < 0) throw ArgumentError("argument error: steps must be >= 0");
    if (lr <= 0.0) throw ArgumentError("argument error: lr must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ArgumentError("argument error: beta1/beta2 must lie in [0, 1)");
    if (eps <= 0.0) throw ArgumentError("argument error: eps must be > 0");
}

std::string TrainConfig::to_json_string() const {
    nlohmann::ordered_json j;
    j["patch_size"] = patch_size;
    j["n_samples"] = n_samples;
    j["batch_size"] = batch_size;
    j["steps"] = steps;
    j["lr"] = lr;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["eps"] = eps;
    j["seed"] = seed;
    j["sim"] = {{"max_fraction", sim.max_fraction},
                {"scale_min", sim.scale_min},
                {"scale_max", sim.scale_max},
                {"translate_frac", sim.translate_frac},
                {"regions", sim.regions}};
    return j.dump();
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("format error: train config is not valid JSON (") + e.what() + ")");
    }
    TrainConfig cfg;
    try {
        if (j.contains("patch_size")) cfg.patch_size = j.at("patch_size").get<int>();
        if (j.contains("n_samples")) cfg.n_samples = j.at("n_samples").get<int>();
        if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
        if (j.contains("steps")) cfg.steps = j.at("steps").get<int>();
        if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
        if (j.contains("beta1")) cfg.beta1 = j.at("beta1").get<double>();
        if (j.contains("beta2")) cfg.beta2 = j.at("beta2").get<double>();
        if (j.contains("eps")) cfg.eps = j.at("eps").get<double>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("sim")) {
            const auto& s = j.at("sim");
            if (s.contains("max_fraction")) cfg.sim.max_fraction = s.at("max_fraction").get<double>();
            if (s.contains("scale_min")) cfg.sim.scale_min = s.at("scale_min").get<double>();
            if (s.contains("scale_max")) cfg.sim.scale_max = s.at("scale_max").get<double>();
            if (s.contains("translate_frac")) cfg.sim.translate_frac = s.at("translate_frac").get<double>();
            if (s.contains("regions")) cfg.sim.regions = s.at("regions").get<int>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("format error: bad train config field (") + e.what() + ")");
    }
    return cfg;
}

namespace {

Tensor<float> patch_to_tensor(const Patch& p) {
    // patch data is band-major, which is exactly the [B, P, P] layout
    return Tensor<float>::from({p.bands, p.size, p.size}, p.data);
}

Checkpoint snapshot(const TddNet<float>& net, const TrainConfig& tcfg, const TrainMeta& meta) {
    Checkpoint ck;
    ck.config = net.config();
    ck.in_bands = net.config().in_bands;
    ck.seed = tcfg.seed;
    ck.patch_size = tcfg.patch_size;
    ck.meta = meta;
    ck.parameters = net.export_parameters();
    return ck;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    for (auto& th : pool) th.join();
}

} // namespace

Checkpoint train(const HsiCube& cube, const TrainConfig& tcfg, NetworkConfig ncfg, const ProgressFn& progress) {
    tcfg.validate();
    if (ncfg.in_bands == 0) ncfg.in_bands = cube.bands;
    if (ncfg.in_bands != cube.bands)
        throw ArgumentError("argument error: network expects " + std::to_string(ncfg.in_bands) +
                            " bands, cube has " + std::to_string(cube.bands));

    const auto dataset = simulate_dataset(cube, tcfg.patch_size, tcfg.n_samples, tcfg.sim, tcfg.seed);
    if (tcfg.steps > 0 && dataset.empty())
        throw ArgumentError("argument error: cannot train on an empty dataset");

    TddNet<float> net(ncfg, tcfg.seed);
    OptimState<float> opt;
    opt.lr = tcfg.lr;
    opt.beta1 = tcfg.beta1;
    opt.beta2 = tcfg.beta2;
    opt.eps = tcfg.eps;
    opt.init(net.parameters());

    TrainMeta meta;
    // most recent parameter state whose loss came out finite
    Checkpoint last_good = snapshot(net, tcfg, meta);

    Rng batch_rng(tcfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const float inv_batch = 1.0f / static_cast<float>(tcfg.batch_size);
    for (int step = 0; step < tcfg.steps; ++step) {
        const Checkpoint entering = snapshot(net, tcfg, meta);
        net.zero_grad();
        double step_loss = 0.0;
        for (int b = 0; b < tcfg.batch_size; ++b) {
            const auto& sample = dataset[batch_rng.uniform_u64(dataset.size())];
            const Tensor<float> x = patch_to_tensor(sample.x);
            const Tensor<float> term = scale(net.loss(net.forward(x), sample.y), inv_batch);
            backward(term);
            step_loss += static_cast<double>(term.values()[0]);
        }
        if (!std::isfinite(step_loss))
            throw TrainDiverged(step, last_good,
                                "numeric error: non-finite loss at step " + std::to_string(step));
        last_good = entering;
        try {
            optim_step(net.parameters(), opt);
        } catch (const NumericError& e) {
            throw TrainDiverged(step, last_good, std::string(e.what()) + " at step " + std::to_string(step));
        }
        if (step == 0) meta.initial_loss = step_loss;
        meta.final_loss = step_loss;
        meta.steps_run = step + 1;
        if (progress) progress(step, step_loss);
    }
    return snapshot(net, tcfg, meta);
}

std::vector<std::pair<int, int>> band_segments(int test_bands, int train_bands) {
    if (test_bands < 1 || train_bands < 1)
        throw ArgumentError("argument error: band counts must be >= 1");
    if (test_bands <= train_bands) return {{0, test_bands}};
    std::vector<std::pair<int, int>> segs;
    for (int start = 0; start + train_bands <= test_bands; start += train_bands)
        segs.emplace_back(start, start + train_bands);
    if (test_bands % train_bands != 0) segs.emplace_back(test_bands - train_bands, test_bands);
    return segs;
}

namespace {

HsiCube interpolate_bands(const HsiCube& cube, int target_bands) {
    HsiCube out;
    out.height = cube.height;
    out.width = cube.width;
    out.bands = target_bands;
    out.data.resize(out.size());
    const int b2 = cube.bands;
    for (int j = 0; j < target_bands; ++j) {
        const double pos = target_bands == 1 ? 0.0
                                             : static_cast<double>(j) * (b2 - 1) / (target_bands - 1);
        const int i0 = static_cast<int>(std::floor(pos));
        const int i1 = std::min(i0 + 1, b2 - 1);
        const float f = static_cast<float>(pos - i0);
        for (int r = 0; r < cube.height; ++r)
            for (int c = 0; c < cube.width; ++c) {
                const float v0 = cube.at(r, c, i0);
                const float v1 = cube.at(r, c, i1);
                out.at(r, c, j) = v0 + f * (v1 - v0);
            }
    }
    return out;
}

HsiCube slice_bands(const HsiCube& cube, int begin, int end) {
    HsiCube out;
    out.height = cube.height;
    out.width = cube.width;
    out.bands = end - begin;
    const std::size_t plane = static_cast<std::size_t>(cube.height) * cube.width;
    out.data.assign(cube.data.begin() + static_cast<std::ptrdiff_t>(begin * plane),
                    cube.data.begin() + static_cast<std::ptrdiff_t>(end * plane));
    return out;
}

} // namespace

std::vector<HsiCube> adapt_bands(const HsiCube& cube, int train_bands) {
    if (train_bands < 1) throw ArgumentError("argument error: train band count must be >= 1");
    if (cube.bands == train_bands) return {cube};
    if (cube.bands < train_bands) return {interpolate_bands(cube, train_bands)};
    std::vector<HsiCube> out;
    for (const auto& [begin, end] : band_segments(cube.bands, train_bands))
        out.push_back(slice_bands(cube, begin, end));
    return out;
}

ScoreMap average_maps(const std::vector<ScoreMap>& maps) {
    if (maps.empty()) throw ArgumentError("argument error: cannot average zero maps");
    ScoreMap out = maps[0];
    for (std::size_t i = 1; i < maps.size(); ++i) {
        if (maps[i].height != out.height || maps[i].width != out.width)
            throw ArgumentError("argument error: segment map sizes differ");
        for (std::size_t k = 0; k < out.scores.size(); ++k) out.scores[k] += maps[i].scores[k];
    }
    const double inv = 1.0 / static_cast<double>(maps.size());
    for (auto& v : out.scores) v *= inv;
    return out;
}

ScoreMap infer(const HsiCube& cube, const Checkpoint& ckpt, int patch_size, int stride, int threads) {
    if (patch_size < 4) throw ArgumentError("argument error: inference patch size must be >= 4");
    if (patch_size > std::min(cube.height, cube.width))
        throw ArgumentError("argument error: patch size exceeds image extent");
    if (stride < 1) throw ArgumentError("argument error: stride must be >= 1");

    const TddNet<float> net = restore_network(ckpt);
    const auto segments = adapt_bands(cube, ckpt.in_bands);

    std::vector<ScoreMap> seg_maps;
    for (const auto& seg : segments) {
        const auto patches = extract_patches(seg, patch_size, stride);
        std::vector<std::vector<float>> outs(patches.size());
        parallel_for(static_cast<int>(patches.size()), threads, [&](int i) {
            const Tensor<float> x = patch_to_tensor(patches[static_cast<std::size_t>(i)]);
            outs[static_cast<std::size_t>(i)] = net.score_map(x).values();
        });
        // serial accumulation in patch order keeps results thread-count independent
        ScoreMap acc;
        acc.height = cube.height;
        acc.width = cube.width;
        acc.scores.assign(static_cast<std::size_t>(cube.height) * cube.width, 0.0);
        std::vector<int> counts(acc.scores.size(), 0);
        for (std::size_t i = 0; i < patches.size(); ++i) {
            const auto& p = patches[i];
            for (int r = 0; r < patch_size; ++r)
                for (int c = 0; c < patch_size; ++c) {
                    const std::size_t idx = static_cast<std::size_t>(p.row + r) * cube.width + (p.col + c);
                    acc.scores[idx] += static_cast<double>(outs[i][static_cast<std::size_t>(r) * patch_size + c]);
                    counts[idx] += 1;
                }
        }
        for (std::size_t k = 0; k < acc.scores.size(); ++k) acc.scores[k] /= counts[k];
        seg_maps.push_back(std::move(acc));
    }
    return average_maps(seg_maps);
}

namespace {

std::string ckpt_base_of(const std::string& path) {
    const std::string suffix = ".ckpt.json";
    if (path.size() >= suffix.size() &&
        path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
        return path.substr(0, path.size() - suffix.size());
    return path;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& base_in) {
    const std::string base = ckpt_base_of(base_in);
    save_bundle(ckpt.parameters, base);

    nlohmann::ordered_json j;
    j["format"] = "tdd-ckpt-1";
    j["config"] = nlohmann::ordered_json::parse(ckpt.config.to_json_string());
    j["in_bands"] = ckpt.in_bands;
    j["seed"] = ckpt.seed;
    j["patch_size"] = ckpt.patch_size;
    j["train_meta"] = {{"steps_run", ckpt.meta.steps_run},
                       {"initial_loss", ckpt.meta.initial_loss},
                       {"final_loss", ckpt.meta.final_loss},
                       {"source", ckpt.meta.source}};
    std::ofstream out(base + ".ckpt.json", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("i/o error: cannot write checkpoint sidecar " + base + ".ckpt.json");
    out << j.dump() << "\n";
    if (!out) throw IoError("i/o error: short write to " + base + ".ckpt.json");
}

Checkpoint load_checkpoint(const std::string& base_in) {
    const std::string base = ckpt_base_of(base_in);
    std::ifstream in(base + ".ckpt.json");
    if (!in) throw IoError("i/o error: cannot open checkpoint sidecar " + base + ".ckpt.json");
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("format error: checkpoint sidecar is not valid JSON (" + std::string(e.what()) + ")");
    }
    Checkpoint ck;
    try {
        if (j.value("format", "") != "tdd-ckpt-1")
            throw FormatError("format error: unknown checkpoint format \"" + j.value("format", "") + "\"");
        ck.config = NetworkConfig::from_json_string(j.at("config").dump());
        ck.in_bands = j.at("in_bands").get<int>();
        ck.seed = j.at("seed").get<std::uint64_t>();
        ck.patch_size = j.value("patch_size", 0);
        const auto& m = j.at("train_meta");
        ck.meta.steps_run = m.value("steps_run", 0);
        ck.meta.initial_loss = m.value("initial_loss", 0.0);
        ck.meta.final_loss = m.value("final_loss", 0.0);
        ck.meta.source = m.value("source", "");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("format error: bad checkpoint field (" + std::string(e.what()) + ")");
    }
    if (ck.in_bands != ck.config.in_bands)
        throw FormatError("format error: checkpoint in_bands disagrees with its network config");
    ck.parameters = load_bundle(base);
    restore_network(ck); // validates the parameter inventory
    return ck;
}

TddNet<float> restore_network(const Checkpoint& ckpt) {
    TddNet<float> net(ckpt.config, ckpt.seed);
    net.import_parameters(ckpt.parameters);
    return net;
}

} // namespace tdd
