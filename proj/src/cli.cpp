#include "tdd/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "tdd/evalkit.hpp"
#include "tdd/pipeline.hpp"
#include "tdd/sim.hpp"

namespace fs = std::filesystem;

namespace tdd {

int worker_threads() {
    const char* env = std::getenv("TDD_THREADS");
    if (!env || !*env) return 1;
    const int v = std::atoi(env);
    if (v < 0) return 1;
    if (v == 0) return std::max(1u, std::thread::hardware_concurrency());
    return v;
}

void write_pgm(const ScoreMap& map, const std::string& path) {
    double lo = map.scores[0], hi = map.scores[0];
    for (const double v : map.scores) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi > lo ? hi - lo : 1.0;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("i/o error: cannot write preview " + path);
    out << "P5\n" << map.width << " " << map.height << "\n255\n";
    for (const double v : map.scores)
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround((v - lo) / range * 255.0))));
    if (!out) throw IoError("i/o error: short write to " + path);
}

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("i/o error: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("i/o error: cannot write " + path);
    out << text;
    if (!out) throw IoError("i/o error: short write to " + path);
}

void write_provenance(const fs::path& out_dir, const std::vector<std::string>& args, std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["command"] = args;
    j["seed"] = seed;
    j["formats"] = {{"hsi", "1"}, {"tb", "1"}, {"ckpt", "tdd-ckpt-1"}};
    write_text((out_dir / "provenance.json").string(), j.dump() + "\n");
}

fs::path ensure_out_dir(const std::string& out) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("i/o error: cannot create output directory " + out + " (" + ec.message() + ")");
    return dir;
}

struct ConfigBundle {
    TrainConfig train;
    NetworkConfig net;
};

// Config file: {"train": {...TrainConfig...}, "network": {...NetworkConfig...}},
// both sections optional.
ConfigBundle load_config(const std::string& path) {
    ConfigBundle cfg;
    if (path.empty()) return cfg;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("format error: config " + path + " is not valid JSON (" + e.what() + ")");
    }
    if (j.contains("train")) cfg.train = TrainConfig::from_json_string(j.at("train").dump());
    if (j.contains("network")) cfg.net = NetworkConfig::from_json_string(j.at("network").dump());
    return cfg;
}

int cmd_simulate(const std::vector<std::string>& args, const std::string& cube_path, const std::string& out,
                 const std::string& config_path, int patch_size, int n_samples, std::uint64_t seed) {
    ConfigBundle cfg = load_config(config_path);
    if (patch_size > 0) cfg.train.patch_size = patch_size;
    if (n_samples >= 0) cfg.train.n_samples = n_samples;
    cfg.train.seed = seed;

    const HsiCube cube = normalize_cube(load_cube(cube_path));
    const auto dataset =
        simulate_dataset(cube, cfg.train.patch_size, cfg.train.n_samples, cfg.train.sim, cfg.train.seed);

    const fs::path dir = ensure_out_dir(out);
    nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& s = dataset[i];
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%05zu", i);
        const std::string x_base = (dir / (std::string(name) + ".x")).string();
        const std::string y_base = (dir / (std::string(name) + ".y")).string();
        HsiCube xc;
        xc.height = s.x.size;
        xc.width = s.x.size;
        xc.bands = s.x.bands;
        xc.data = s.x.data;
        save_cube(xc, x_base);
        save_mask(s.y, y_base);
        manifest.push_back({{"sample_id", i},
                            {"x_path", std::string(name) + ".x.hsi.json"},
                            {"y_path", std::string(name) + ".y.hsi.json"},
                            {"seed", s.seed},
                            {"params",
                             {{"origin", {s.origin_row, s.origin_col}},
                              {"region", {{"top", s.region.top}, {"left", s.region.left}, {"h", s.region.h}, {"w", s.region.w}}},
                              {"affine",
                               {{"theta", s.params.theta}, {"s", s.params.s}, {"dx", s.params.dx}, {"dy", s.params.dy}}}}}});
    }
    write_text((dir / "manifest.json").string(), manifest.dump() + "\n");
    write_provenance(dir, args, cfg.train.seed);
    std::cout << "simulated " << dataset.size() << " samples -> " << (dir / "manifest.json").string() << "\n";
    return 0;
}

int cmd_train(const std::vector<std::string>& args, const std::string& cube_path, const std::string& out,
              const std::string& config_path, int patch_size, int n_samples, int steps, std::uint64_t seed,
              bool seed_given) {
    ConfigBundle cfg = load_config(config_path);
    if (patch_size > 0) cfg.train.patch_size = patch_size;
    if (n_samples >= 0) cfg.train.n_samples = n_samples;
    if (steps >= 0) cfg.train.steps = steps;
    if (seed_given) cfg.train.seed = seed;

    const HsiCube cube = normalize_cube(load_cube(cube_path));
    const fs::path dir = ensure_out_dir(out);
    try {
        Checkpoint ck = train(cube, cfg.train, cfg.net);
        ck.meta.source = cube_path;
        save_checkpoint(ck, (dir / "model").string());
        write_provenance(dir, args, cfg.train.seed);
        std::cout << "trained " << ck.meta.steps_run << " steps, loss " << ck.meta.initial_loss << " -> "
                  << ck.meta.final_loss << ", checkpoint " << (dir / "model.ckpt.json").string() << "\n";
        return 0;
    } catch (const TrainDiverged& e) {
        // keep the last finite state around for inspection
        save_checkpoint(e.last_good, (dir / "model.last_good").string());
        write_provenance(dir, args, cfg.train.seed);
        std::cerr << e.what() << "; last-good checkpoint written to "
                  << (dir / "model.last_good.ckpt.json").string() << "\n";
        return 3;
    }
}

int cmd_infer(const std::vector<std::string>& args, const std::string& cube_path, const std::string& ckpt_path,
              const std::string& out, int patch_size, int stride) {
    const HsiCube cube = normalize_cube(load_cube(cube_path));
    const Checkpoint ck = load_checkpoint(ckpt_path);
    const int p = patch_size > 0 ? patch_size : (ck.patch_size > 0 ? ck.patch_size : 10);
    const int s = stride > 0 ? stride : p;
    const ScoreMap map = infer(cube, ck, p, s, worker_threads());

    const fs::path dir = ensure_out_dir(out);
    save_map(map, (dir / "scores").string());
    write_pgm(map, (dir / "scores.pgm").string());
    write_provenance(dir, args, ck.seed);
    std::cout << "score map " << map.height << "x" << map.width << " -> "
              << (dir / "scores.hsi.json").string() << "\n";
    return 0;
}

int cmd_grx(const std::vector<std::string>& args, const std::string& cube_path, const std::string& out) {
    const HsiCube cube = normalize_cube(load_cube(cube_path));
    const ScoreMap map = grx(cube);
    const fs::path dir = ensure_out_dir(out);
    save_map(map, (dir / "scores").string());
    write_pgm(map, (dir / "scores.pgm").string());
    write_provenance(dir, args, 0);
    std::cout << "grx map " << map.height << "x" << map.width << " -> " << (dir / "scores.hsi.json").string()
              << "\n";
    return 0;
}

int cmd_eval(const std::vector<std::string>& args, const std::string& scores_path, const std::string& gt_path,
             const std::string& out, std::string dataset, std::string method) {
    const ScoreMap scores = load_map(scores_path);
    const BinaryMask gt = load_mask(gt_path);
    if (dataset.empty()) dataset = fs::path(container_header_path(gt_path)).stem().stem().string();
    if (method.empty()) method = fs::path(container_header_path(scores_path)).stem().stem().string();

    const RocSeries series = roc_series(scores, gt);
    const AucReport report = auc_report(series);
    const SeparabilityStats sep = separability_stats(scores, gt);

    const fs::path dir = ensure_out_dir(out);
    write_text((dir / "auc.csv").string(), auc_csv_header() + "\n" + auc_csv_row(dataset, method, report) + "\n");
    write_text((dir / "roc.csv").string(), roc_csv(series));
    write_text((dir / "separability.csv").string(),
               separability_csv_header() + "\n" + separability_csv_row(method, sep) + "\n");
    write_provenance(dir, args, 0);
    std::cout << auc_csv_header() << "\n" << auc_csv_row(dataset, method, report) << "\n";
    return 0;
}

// Merge eval outputs into one table and recheck the derived-metric
// identities for every row.
int cmd_report(const std::vector<std::string>& args, const std::vector<std::string>& inputs,
               const std::string& out) {
    std::string merged = auc_csv_header() + ",identity_ok\n";
    bool all_ok = true;
    for (const auto& input : inputs) {
        std::istringstream in(read_text(input));
        std::string line;
        if (!std::getline(in, line)) throw FormatError("format error: empty csv " + input);
        if (line != auc_csv_header())
            throw FormatError("format error: unexpected csv header in " + input);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> cells;
            std::istringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) cells.push_back(cell);
            if (cells.size() != 9) throw FormatError("format error: bad csv row in " + input + ": " + line);
            const double df = std::stod(cells[2]), dt = std::stod(cells[3]), ft = std::stod(cells[4]);
            const AucReport expect = auc_report_from_base(df, dt, ft);
            const auto near = [](double a, double b, double tol) { return std::abs(a - b) <= tol; };
            bool ok = near(std::stod(cells[5]), expect.auc_td, 5e-4) &&
                      near(std::stod(cells[6]), expect.auc_bs, 5e-4) &&
                      near(std::stod(cells[7]), expect.auc_odp, 5e-4);
            if (cells[8] == "inf") {
                ok = ok && expect.snpr_infinite;
            } else if (expect.snpr_infinite) {
                ok = false;
            } else {
                ok = ok && std::abs(std::stod(cells[8]) - expect.auc_snpr) <=
                               5e-3 * std::max(1.0, std::abs(expect.auc_snpr));
            }
            if (!ok) {
                all_ok = false;
                std::cerr << "identity violation in " << input << ": " << line << "\n";
            }
            merged += line + "," + (ok ? "yes" : "no") + "\n";
        }
    }
    const fs::path dir = ensure_out_dir(out);
    write_text((dir / "report.csv").string(), merged);
    write_provenance(dir, args, 0);
    std::cout << merged;
    if (!all_ok) std::cerr << "warning: some rows violate the derived-metric identities\n";
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"transferred direct detection for hyperspectral anomaly maps"};
    app.name("tdd");
    app.require_subcommand(1);

    std::string cube_path, ckpt_path, scores_path, gt_path, config_path, out_path, dataset, method;
    std::vector<std::string> report_inputs;
    int patch_size = -1, stride = -1, n_samples = -1, steps = -1;
    std::uint64_t seed = 0;

    auto* sim_cmd = app.add_subcommand("simulate", "simulate labeled anomaly samples from a cube");
    sim_cmd->add_option("--cube", cube_path, "input cube container")->required();
    sim_cmd->add_option("--out", out_path, "output directory")->required();
    sim_cmd->add_option("--config", config_path, "JSON config file");
    sim_cmd->add_option("--patch-size", patch_size, "patch side length");
    sim_cmd->add_option("--n-samples", n_samples, "number of samples");
    sim_cmd->add_option("--seed", seed, "RNG seed");

    auto* train_cmd = app.add_subcommand("train", "train a detector on simulated samples");
    train_cmd->add_option("--cube", cube_path, "training cube container")->required();
    train_cmd->add_option("--out", out_path, "output directory")->required();
    train_cmd->add_option("--config", config_path, "JSON config file");
    train_cmd->add_option("--patch-size", patch_size, "patch side length");
    train_cmd->add_option("--n-samples", n_samples, "simulated dataset size");
    train_cmd->add_option("--steps", steps, "optimizer steps");
    auto* seed_opt = train_cmd->add_option("--seed", seed, "RNG seed");

    auto* infer_cmd = app.add_subcommand("infer", "run a checkpoint over a cube");
    infer_cmd->add_option("--cube", cube_path, "input cube container")->required();
    infer_cmd->add_option("--ckpt", ckpt_path, "checkpoint base path")->required();
    infer_cmd->add_option("--out", out_path, "output directory")->required();
    infer_cmd->add_option("--patch-size", patch_size, "tile size (default: training patch size)");
    infer_cmd->add_option("--stride", stride, "tile stride (default: patch size)");

    auto* grx_cmd = app.add_subcommand("grx", "global RX baseline detector");
    grx_cmd->add_option("--cube", cube_path, "input cube container")->required();
    grx_cmd->add_option("--out", out_path, "output directory")->required();

    auto* eval_cmd = app.add_subcommand("eval", "3D-ROC evaluation of a score map");
    eval_cmd->add_option("--scores", scores_path, "score-map container")->required();
    eval_cmd->add_option("--gt", gt_path, "ground-truth mask container")->required();
    eval_cmd->add_option("--out", out_path, "output directory")->required();
    eval_cmd->add_option("--dataset", dataset, "dataset label for the csv row");
    eval_cmd->add_option("--method", method, "method label for the csv row");

    auto* report_cmd = app.add_subcommand("report", "merge eval csv files and check identities");
    report_cmd->add_option("--out", out_path, "output directory")->required();
    report_cmd->add_option("inputs", report_inputs, "auc.csv files")->required();

    try {
        std::vector<std::string> rest(args.begin() + 1, args.end());
        std::reverse(rest.begin(), rest.end());
        app.parse(std::move(rest));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (sim_cmd->parsed())
            return cmd_simulate(args, cube_path, out_path, config_path, patch_size, n_samples, seed);
        if (train_cmd->parsed())
            return cmd_train(args, cube_path, out_path, config_path, patch_size, n_samples, steps, seed,
                             seed_opt->count() > 0);
        if (infer_cmd->parsed()) return cmd_infer(args, cube_path, ckpt_path, out_path, patch_size, stride);
        if (grx_cmd->parsed()) return cmd_grx(args, cube_path, out_path);
        if (eval_cmd->parsed()) return cmd_eval(args, scores_path, gt_path, out_path, dataset, method);
        if (report_cmd->parsed()) return cmd_report(args, report_inputs, out_path);
        std::cerr << "usage error: no subcommand\n";
        return 1;
    } catch (const ArgumentError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const Error& e) { // format/size/data/io
        std::cerr << e.what() << "\n";
        return 2;
    }
}

} // namespace tdd
