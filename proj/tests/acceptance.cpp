// Acceptance suite: one check per project criterion, each printing a single
// PASS/FAIL line. Run with no arguments for all criteria or with a list of
// criterion numbers (the ctest entries run one each).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tdd/evalkit.hpp"
#include "tdd/net.hpp"
#include "tdd/pipeline.hpp"
#include "tdd/sim.hpp"

using namespace tdd;
using D = Tensor<double>;

namespace {

// ---------------------------------------------------------------------------
// Criterion 1: derived-metric reproduction over the published AUC score
// tables for the four benchmark scenes (32 rows, 8 detectors each).
// TD/BS/SNPR identities for every row, and the standard ODP identity
// (dt - ft + 1) for the 28 non-TDD rows.

struct TableRow {
    const char* dataset;
    const char* method;
    double df, dt, ft, td, bs, odp, snpr;
};

// Published digits, transcribed verbatim (including their inconsistencies).
const TableRow kRows[] = {
    {"hydice", "GRX", 0.9938, 0.2487, 0.0571, 1.2425, 0.9367, 1.1916, 4.3555},
    {"hydice", "LRASR", 0.9920, 0.5189, 0.0490, 1.5109, 0.9430, 1.4699, 10.5898},
    {"hydice", "ADLR", 0.9624, 0.4640, 0.0713, 1.4264, 0.8911, 1.3927, 6.5077},
    {"hydice", "CRD", 0.9991, 0.5145, 0.0576, 1.5136, 0.9424, 1.4578, 9.0741},
    {"hydice", "SC_AAE", 0.9962, 0.5458, 0.1487, 1.5420, 0.8475, 1.3971, 3.6705},
    {"hydice", "Auto-AD", 0.9991, 0.2756, 0.0070, 1.2747, 0.9921, 1.2686, 39.3714},
    {"hydice", "DeepLR", 0.9996, 0.3054, 0.0156, 1.3050, 0.9840, 1.2898, 19.5769},
    {"hydice", "TDD", 0.9960, 0.8757, 0.0660, 1.8717, 0.9300, 1.8057, 13.2682},
    {"aviris1", "GRX", 0.9370, 0.0968, 0.0309, 1.0338, 0.9061, 1.0659, 3.1327},
    {"aviris1", "LRASR", 0.9146, 0.2956, 0.0665, 1.2102, 0.8481, 1.2291, 4.4451},
    {"aviris1", "ADLR", 0.9081, 0.3997, 0.0852, 1.3078, 0.8229, 1.3145, 4.6913},
    {"aviris1", "CRD", 0.9530, 0.1857, 0.0686, 1.1387, 0.8844, 1.1171, 2.7070},
    {"aviris1", "SC_AAE", 0.9820, 0.4607, 0.0307, 1.4427, 0.9513, 1.4300, 15.0065},
    {"aviris1", "Auto-AD", 0.9628, 0.0884, 0.0053, 1.0512, 0.9575, 1.0831, 16.6792},
    {"aviris1", "DeepLR", 0.9845, 0.2013, 0.0098, 1.1858, 0.9747, 1.1915, 20.5408},
    {"aviris1", "TDD", 0.9728, 0.3741, 0.0093, 1.3469, 0.9635, 1.3376, 40.2259},
    {"cri", "GRX", 0.9678, 0.2254, 0.0896, 1.1932, 0.8782, 1.1036, 2.5156},
    {"cri", "LRASR", 0.8652, 0.2327, 0.1908, 1.0979, 0.6744, 0.9071, 1.2196},
    {"cri", "ADLR", 0.9579, 0.9674, 0.6420, 1.9253, 0.3159, 1.2833, 1.5068},
    {"cri", "CRD", 0.9186, 0.2164, 0.0448, 1.1350, 0.8738, 1.0902, 4.8303},
    {"cri", "SC_AAE", 0.8849, 0.2506, 0.0241, 1.1355, 0.8608, 1.1114, 10.3983},
    {"cri", "Auto-AD", 0.9643, 0.2496, 0.0150, 1.2139, 0.9493, 1.1989, 16.6400},
    {"cri", "DeepLR", 0.9815, 0.2650, 0.0128, 1.2465, 0.9687, 1.2337, 20.7031},
    {"cri", "TDD", 0.9915, 0.6383, 0.1122, 1.6298, 0.8793, 1.5176, 5.6889},
    {"river", "GRX", 0.9988, 0.1999, 0.0211, 1.1987, 0.9777, 1.1776, 9.4739},
    {"river", "LRASR", 0.9815, 0.4090, 0.0682, 1.3905, 0.9133, 1.3223, 14.3915},
    {"river", "ADLR", 0.9560, 0.3955, 0.0140, 1.3515, 0.9420, 1.3375, 68.2857},
    {"river", "CRD", 0.9885, 0.0449, 0.0083, 1.0334, 0.9802, 1.0251, 119.0963},
    {"river", "SC_AAE", 0.9998, 0.8144, 0.0522, 1.8142, 0.9476, 1.7620, 19.1532},
    {"river", "Auto-AD", 0.9725, 0.2467, 0.0373, 1.2192, 0.9352, 1.1819, 26.0724},
    {"river", "DeepLR", 0.9925, 0.4692, 0.0776, 1.4617, 0.9149, 1.3841, 12.7899},
    {"river", "TDD", 0.9999, 0.3985, 0.0279, 1.3984, 0.9720, 1.3705, 35.8387},
};

bool criterion_1(std::string& detail) {
    int checks = 0, failures = 0;
    for (const TableRow& row : kRows) {
        const AucReport r = auc_report_from_base(row.df, row.dt, row.ft);
        const bool is_tdd = std::string(row.method) == "TDD";
        const auto fail = [&](const char* metric, double printed, double computed, double alt) {
            ++failures;
            std::printf("  row %s/%s %s: printed %.4f, recomputed %.4f%s\n", row.dataset, row.method,
                        metric, printed, computed,
                        std::abs(alt - printed) <= 5e-4 ? " (the table's own digits follow the alternative formula)"
                                                        : "");
        };
        ++checks;
        if (std::abs(r.auc_td - row.td) > 5e-4) fail("TD", row.td, r.auc_td, 0.0);
        ++checks;
        if (std::abs(r.auc_bs - row.bs) > 5e-4) fail("BS", row.bs, r.auc_bs, 0.0);
        ++checks;
        if (std::abs(r.auc_snpr - row.snpr) > 5e-3 * std::abs(row.snpr))
            fail("SNPR", row.snpr, r.auc_snpr, row.df / row.ft); // alt: df/ft
        if (!is_tdd) {
            ++checks;
            if (std::abs(r.auc_odp - row.odp) > 5e-4)
                fail("ODP", row.odp, r.auc_odp, row.df + row.dt - row.ft); // alt: df+dt-ft
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d/%d table identities hold (TD+BS+SNPR all rows, standard ODP non-TDD rows)",
                  checks - failures, checks);
    detail = buf;
    return failures == 0;
}

// ---------------------------------------------------------------------------
// Criterion 2: gradient correctness, per op and end to end.

bool criterion_2(std::string& detail) {
    double worst_op = 0.0;
    std::string worst_name = "none";
    for (const auto& [name, err] : oracles::op_gradient_suite(5)) {
        if (err > worst_op) {
            worst_op = err;
            worst_name = name;
        }
    }

    NetworkConfig cfg;
    cfg.in_bands = 6;
    cfg.encoder_channels = {8, 8, 8, 8, 8, 8};
    cfg.heads = 2;
    cfg.lam_window = {3, 3};
    TddNet<double> net(cfg, 81);
    Rng rng(82);
    // evaluate at a generic point: biases off the relu kink
    for (auto& p : net.parameters())
        if (p.name.ends_with(".b"))
            for (auto& v : p.tensor.values()) v = rng.uniform(-0.2, 0.2);
    std::vector<double> pv(6 * 16);
    for (auto& v : pv) v = rng.uniform(0.0, 1.0);
    BinaryMask label;
    label.height = 4;
    label.width = 4;
    label.values.assign(16, 0);
    label.values[5] = label.values[6] = 1;
    std::vector<D> params;
    for (auto& p : net.parameters()) params.push_back(p.tensor);
    const double net_err = oracles::max_grad_error(
        params, [&] { return net.loss(net.forward(D::from({6, 4, 4}, pv)), label); }, 1e-5, 6);

    char buf[160];
    std::snprintf(buf, sizeof(buf), "worst op error %.2e (%s, tol 1e-6); network loss error %.2e (tol 1e-5)",
                  worst_op, worst_name.c_str(), net_err);
    detail = buf;
    return worst_op < 1e-6 && net_err < 1e-5;
}

// ---------------------------------------------------------------------------
// Criterion 3: roc_series/auc_report equal a brute-force counting oracle.

bool criterion_3(std::string& detail) {
    Rng rng(30303);
    int mismatches = 0;
    const int kFixtures = 150;
    for (int trial = 0; trial < kFixtures; ++trial) {
        const int h = rng.uniform_int(2, 8);
        const int w = rng.uniform_int(2, 8);
        const int n = h * w;
        std::vector<double> scores(static_cast<std::size_t>(n));
        std::vector<std::uint8_t> gt(static_cast<std::size_t>(n), 0);
        for (auto& s : scores) s = rng.uniform(-1.0, 1.0);
        if (trial % 3 == 0)
            for (auto& s : scores) s = std::round(s * 4.0) / 4.0; // force duplicate scores
        int ones = 0;
        for (auto& g : gt) ones += (g = rng.uniform() < 0.4 ? 1 : 0);
        if (ones == 0) gt[0] = 1;
        if (ones == n) gt[0] = 0;

        ScoreMap map;
        map.height = h;
        map.width = w;
        map.scores = scores;
        BinaryMask mask;
        mask.height = h;
        mask.width = w;
        mask.values = gt;
        const RocSeries series = roc_series(map, mask);
        const AucReport report = auc_report(series);
        const auto oracle = oracles::brute_force_roc(scores, gt);
        if (series.thresholds != oracle.thresholds || series.pd != oracle.pd || series.pf != oracle.pf ||
            report.auc_df != oracle.auc_df || report.auc_dt != oracle.auc_dt ||
            report.auc_ft != oracle.auc_ft)
            ++mismatches;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d/%d random fixtures match the counting oracle exactly",
                  kFixtures - mismatches, kFixtures);
    detail = buf;
    return mismatches == 0;
}

// ---------------------------------------------------------------------------
// Criterion 4: simulation invariants over a 1000-sample seeded run.

bool criterion_4(std::string& detail) {
    const HsiCube cube = normalize_cube(oracles::synthetic_cube(32, 32, 12, 606));
    SimConfig cfg;
    const int p = 10;
    const double max_area = cfg.max_fraction * p * p;

    const auto run1 = simulate_dataset(cube, p, 1000, cfg, 2024);
    const auto run2 = simulate_dataset(cube, p, 1000, cfg, 2024);

    bool deterministic = run1.size() == run2.size();
    bool multiset_ok = true, area_ok = true, coreg_ok = true;
    for (std::size_t i = 0; i < run1.size(); ++i) {
        if (deterministic &&
            (run1[i].x.data != run2[i].x.data || run1[i].y.values != run2[i].y.values))
            deterministic = false;

        // replay the substream to observe the pre-warp stages
        Rng rng(run1[i].seed);
        const SimStages st = simulate_sample(cube, p, cfg, rng, run1[i].seed);
        if (st.sample.x.data != run1[i].x.data) deterministic = false;

        if (static_cast<double>(st.y3.ones()) > max_area || st.y3.ones() < 1) area_ok = false;
        for (int r = 0; r < p && multiset_ok; ++r)
            for (int c = 0; c < p; ++c) {
                std::vector<float> a(static_cast<std::size_t>(cube.bands)), b(a);
                for (int k = 0; k < cube.bands; ++k) {
                    a[static_cast<std::size_t>(k)] = st.source.at(r, c, k);
                    b[static_cast<std::size_t>(k)] = st.x3.at(r, c, k);
                }
                std::sort(a.begin(), a.end());
                std::sort(b.begin(), b.end());
                if (a != b) {
                    multiset_ok = false;
                    break;
                }
            }

        // independent inverse-map oracle for x/y co-registration: the label
        // must equal the source label pulled through the same inverse map
        const AffineParams& ap = st.sample.params;
        const double alpha = ap.s * std::cos(ap.theta);
        const double beta = ap.s * std::sin(ap.theta);
        const double tx = (1.0 - alpha) * ap.cx - beta * ap.cy + ap.dx;
        const double ty = beta * ap.cx + (1.0 - alpha) * ap.cy + ap.dy;
        const double det = alpha * alpha + beta * beta; // s^2
        for (int row = 0; row < p && coreg_ok; ++row)
            for (int col = 0; col < p; ++col) {
                const double qx = col - tx, qy = row - ty;
                const double sx = (alpha * qx - beta * qy) / det;
                const double sy = (beta * qx + alpha * qy) / det;
                const int nx = static_cast<int>(std::lround(sx));
                const int ny = static_cast<int>(std::lround(sy));
                const std::uint8_t expect =
                    (nx >= 0 && nx < p && ny >= 0 && ny < p) ? st.y3.at(ny, nx) : 0;
                if (st.sample.y.at(row, col) != expect) {
                    coreg_ok = false;
                    break;
                }
            }
    }
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "1000 samples: multiset %s, pre-warp area %s, co-registration %s, determinism %s",
                  multiset_ok ? "exact" : "VIOLATED", area_ok ? "bounded" : "VIOLATED",
                  coreg_ok ? "exact" : "VIOLATED", deterministic ? "byte-exact" : "VIOLATED");
    detail = buf;
    return multiset_ok && area_ok && coreg_ok && deterministic;
}

// ---------------------------------------------------------------------------
// Criterion 5: affine closed form and warp fixtures.

bool criterion_5(std::string& detail) {
    bool grid_ok = true;
    for (const double theta : {0.0, 0.25, 0.7, 1.3, 2.0, 2.9, 4.1, 5.5})
        for (const double s : {0.7, 0.85, 1.0, 1.15, 1.3})
            for (const double c : {0.5, 2.0, 4.5, 24.5}) {
                const AffineMatrix t = affine_matrix({theta, s, 0.0, 0.0, c, c});
                const double alpha = s * std::cos(theta), beta = s * std::sin(theta);
                if (t[0] != alpha || t[1] != beta || t[2] != (1.0 - alpha) * c - beta * c ||
                    t[3] != -beta || t[4] != alpha || t[5] != beta * c + (1.0 - alpha) * c)
                    grid_ok = false;
            }

    // exact identity warp
    Rng rng(515);
    Patch patch;
    patch.size = 5;
    patch.bands = 3;
    patch.data.resize(75);
    for (auto& v : patch.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
    BinaryMask mask;
    mask.height = 5;
    mask.width = 5;
    mask.values.assign(25, 0);
    mask.values[7] = mask.values[12] = 1;
    const TrainingSample id = warp_sample(patch, mask, {0.0, 1.0, 0.0, 0.0, 2.0, 2.0});
    const bool identity_ok = id.x.data == patch.data && id.y.values == mask.values;

    // hand-rotated 3x3 mask
    Patch p3;
    p3.size = 3;
    p3.bands = 1;
    p3.data.assign(9, 0.0f);
    BinaryMask m3;
    m3.height = 3;
    m3.width = 3;
    m3.values = {1, 1, 0, 0, 0, 0, 0, 0, 0};
    const TrainingSample rot =
        warp_sample(p3, m3, {std::numbers::pi / 2, 1.0, 0.0, 0.0, 1.0, 1.0});
    const bool rot_ok = rot.y.values == std::vector<std::uint8_t>{0, 0, 0, 1, 0, 0, 1, 0, 0};

    detail = std::string("closed form ") + (grid_ok ? "exact" : "VIOLATED") + ", identity warp " +
             (identity_ok ? "exact" : "VIOLATED") + ", quarter-turn mask " + (rot_ok ? "exact" : "VIOLATED");
    return grid_ok && identity_ok && rot_ok;
}

// ---------------------------------------------------------------------------
// Criterion 6: attention invariants.

bool criterion_6(std::string& detail) {
    Rng rng(626);
    const auto rand_vals = [&rng](int n, double lo = -1.0, double hi = 1.0) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (auto& x : v) x = rng.uniform(lo, hi);
        return v;
    };
    const int c = 8, h = 4, w = 5, hw = h * w;

    GamParams<double> gp;
    gp.q.w = D::from({c, c, 1, 1}, rand_vals(c * c), true);
    gp.q.b = D::from({c}, rand_vals(c), true);
    gp.k.w = D::from({c, c, 1, 1}, rand_vals(c * c), true);
    gp.k.b = D::from({c}, rand_vals(c), true);
    gp.map_w = D::from({c, c}, rand_vals(c * c), true);
    gp.out.w = D::from({c, 2 * c, 1, 1}, rand_vals(2 * c * c), true);
    gp.out.b = D::from({c}, rand_vals(c), true);

    LamParams<double> lp;
    lp.out.w = D::from({c, 2 * c, 1, 1}, rand_vals(2 * c * c), true);
    lp.out.b = D::from({c}, rand_vals(c), true);

    const D x = D::from({c, h, w}, rand_vals(c * hw, -0.9, 0.9));

    // shape preservation
    std::vector<std::vector<double>> gam_attn;
    const D gy = gam_forward(gp, x, 4, &gam_attn);
    std::vector<double> lam_weights;
    const D ly = lam_forward(lp, x, 3, 3, &lam_weights);
    const bool shapes_ok = gy.shape() == x.shape() && ly.shape() == x.shape();

    // attention weights sum to one
    bool sums_ok = true;
    for (const auto& a : gam_attn)
        for (int row = 0; row < hw; ++row) {
            double s = 0.0;
            for (int col = 0; col < hw; ++col) s += a[static_cast<std::size_t>(row) * hw + col];
            if (std::abs(s - 1.0) > 1e-6) sums_ok = false;
        }
    for (int center = 0; center < hw; ++center) {
        double s = 0.0;
        for (int k = 0; k < 9; ++k) s += lam_weights[static_cast<std::size_t>(center) * 9 + k];
        if (std::abs(s - 1.0) > 1e-6) sums_ok = false;
    }

    // permutation equivariance of the global module
    std::vector<int> perm(static_cast<std::size_t>(hw));
    for (int i = 0; i < hw; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = hw - 1; i > 0; --i)
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(rng.uniform_int(0, i))]);
    std::vector<double> xpv(static_cast<std::size_t>(c) * hw);
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < hw; ++i)
            xpv[static_cast<std::size_t>(ch) * hw + i] =
                x.values()[static_cast<std::size_t>(ch) * hw + perm[static_cast<std::size_t>(i)]];
    const D gyp = gam_forward(gp, D::from({c, h, w}, xpv), 4);
    bool equivariant = true;
    double worst_equiv = 0.0;
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < hw; ++i) {
            const double diff =
                std::abs(gyp.values()[static_cast<std::size_t>(ch) * hw + i] -
                         gy.values()[static_cast<std::size_t>(ch) * hw + perm[static_cast<std::size_t>(i)]]);
            worst_equiv = std::max(worst_equiv, diff);
            if (diff > 1e-5) equivariant = false;
        }

    // 1x1 window reduces to self-pass-through before fusion
    D d_i2;
    lam_forward(lp, x, 1, 1, static_cast<std::vector<double>*>(nullptr), &d_i2);
    const bool window1_ok = d_i2.values() == x.values();

    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "shape %s, weight sums %s, equivariance %s (max dev %.1e), 1x1 pass-through %s",
                  shapes_ok ? "preserved" : "VIOLATED", sums_ok ? "ok" : "VIOLATED",
                  equivariant ? "ok" : "VIOLATED", worst_equiv, window1_ok ? "exact" : "VIOLATED");
    detail = buf;
    return shapes_ok && sums_ok && equivariant && window1_ok;
}

// ---------------------------------------------------------------------------
// Criteria 7/8: desk-scale end-to-end training, then band-count transfer.

constexpr double kTddAucMin = 0.90;      // end-to-end detection floor
constexpr double kGrxBaselineMin = 0.85; // fixture-difficulty confirmation
constexpr double kTransferAucMin = 0.80; // cross-band-count floor
const char* kCkptDir = "acceptance_artifacts";

// Training cube for the end-to-end criteria: smooth low-rank background
// (rank 5, two smooth spectral components per mode) plus bounded per-band
// noise. The two-component spectra give the training set enough spectral
// variety that the detector does not latch onto one band texture, which is
// what makes the interpolated-band transfer in criterion 8 work.
HsiCube training_cube() {
    Rng rng(3200);
    const int h = 32, w = 32, b = 20;
    HsiCube cube;
    cube.height = h;
    cube.width = w;
    cube.bands = b;
    cube.data.assign(static_cast<std::size_t>(h) * w * b, 0.0f);
    struct Mode {
        double ar, ac, ph, f1, p1, f2, p2, wgt;
    };
    std::vector<Mode> modes;
    for (int m = 0; m < 5; ++m)
        modes.push_back({rng.uniform(0.05, 0.35), rng.uniform(0.05, 0.35), rng.uniform(0.0, 6.28),
                         rng.uniform(0.08, 0.6), rng.uniform(0.0, 6.28), rng.uniform(0.6, 1.6),
                         rng.uniform(0.0, 6.28), rng.uniform(0.4, 1.0)});
    for (int k = 0; k < b; ++k)
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                double v = 0.0;
                for (const auto& m : modes)
                    v += m.wgt * std::sin(m.ar * r + m.ac * c + m.ph) *
                         (0.5 + 0.3 * std::sin(m.f1 * k + m.p1) + 0.2 * std::sin(m.f2 * k + m.p2));
                cube.at(r, c, k) = static_cast<float>(v);
            }
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int k = 0; k < b; ++k) {
        float* band = cube.data.data() + static_cast<std::size_t>(k) * plane;
        float lo = band[0], hi = band[0];
        for (std::size_t i = 1; i < plane; ++i) {
            lo = std::min(lo, band[i]);
            hi = std::max(hi, band[i]);
        }
        const double amp = 0.02 * (hi - lo);
        for (std::size_t i = 0; i < plane; ++i) band[i] += static_cast<float>(rng.uniform(-amp, amp));
    }
    return cube;
}

NetworkConfig desk_config(int bands) {
    NetworkConfig cfg;
    cfg.in_bands = bands;
    cfg.encoder_channels = {16, 32, 48, 48, 48, 48};
    cfg.heads = 4;
    cfg.lam_window = {3, 3};
    return cfg;
}

TrainConfig desk_train_config() {
    TrainConfig tcfg;
    tcfg.patch_size = 10;
    tcfg.n_samples = 1024;
    tcfg.batch_size = 8;
    tcfg.steps = 2000;
    tcfg.seed = 7007;
    return tcfg;
}

// pooled detection AUC over simulated held-out samples scored by `scorer`
double pooled_auc(const std::vector<TrainingSample>& samples,
                  const std::function<std::vector<double>(const TrainingSample&)>& scorer) {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    for (const auto& s : samples) {
        const auto v = scorer(s);
        scores.insert(scores.end(), v.begin(), v.end());
        labels.insert(labels.end(), s.y.values.begin(), s.y.values.end());
    }
    ScoreMap map;
    map.height = 1;
    map.width = static_cast<int>(scores.size());
    map.scores = std::move(scores);
    BinaryMask gt;
    gt.height = 1;
    gt.width = static_cast<int>(labels.size());
    gt.values = std::move(labels);
    return auc_report(roc_series(map, gt)).auc_df;
}

HsiCube patch_as_cube(const Patch& p) {
    HsiCube cube;
    cube.height = p.size;
    cube.width = p.size;
    cube.bands = p.bands;
    cube.data = p.data;
    return cube;
}

Checkpoint train_desk_checkpoint() {
    const HsiCube cube = normalize_cube(training_cube());
    const TrainConfig tcfg = desk_train_config();
    return train(cube, tcfg, desk_config(20));
}

Checkpoint load_or_train_checkpoint() {
    const std::string base = std::string(kCkptDir) + "/ckpt_b20";
    if (std::filesystem::exists(base + ".ckpt.json")) return load_checkpoint(base);
    Checkpoint ck = train_desk_checkpoint();
    std::filesystem::create_directories(kCkptDir);
    save_checkpoint(ck, base);
    return ck;
}

bool criterion_7(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    const HsiCube cube = normalize_cube(training_cube());
    const TrainConfig tcfg = desk_train_config();
    const Checkpoint ck = train(cube, tcfg, desk_config(20));
    std::filesystem::create_directories(kCkptDir);
    save_checkpoint(ck, std::string(kCkptDir) + "/ckpt_b20");
    const double train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // 50 held-out simulated samples (fresh seed)
    SimConfig scfg;
    const auto held_out = simulate_dataset(cube, tcfg.patch_size, 50, scfg, 991);

    const TddNet<float> net = restore_network(ck);
    const double tdd_auc = pooled_auc(held_out, [&](const TrainingSample& s) {
        const auto v = net.score_map(Tensor<float>::from({s.x.bands, s.x.size, s.x.size}, s.x.data)).values();
        return std::vector<double>(v.begin(), v.end());
    });

    // GRX difficulty confirmation on the same fixtures, per-patch normalized
    const double grx_auc = pooled_auc(held_out, [&](const TrainingSample& s) {
        const ScoreMap m = grx(patch_as_cube(s.x));
        double lo = m.scores[0], hi = m.scores[0];
        for (const double v : m.scores) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        std::vector<double> out(m.scores.size(), 0.5);
        if (hi > lo)
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = (m.scores[i] - lo) / (hi - lo);
        return out;
    });

    char buf[220];
    std::snprintf(buf, sizeof(buf),
                  "trained %d steps in %.0f s (loss %.3f -> %.3f); held-out AUC_DF %.4f (floor %.2f), "
                  "GRX baseline %.4f (floor %.2f)",
                  ck.meta.steps_run, train_seconds, ck.meta.initial_loss, ck.meta.final_loss, tdd_auc,
                  kTddAucMin, grx_auc, kGrxBaselineMin);
    detail = buf;
    return tdd_auc >= kTddAucMin && grx_auc >= kGrxBaselineMin && train_seconds < 600.0 &&
           ck.meta.steps_run <= 2000;
}

bool criterion_8(std::string& detail) {
    // exact band-range checks for the two adaptation branches
    const bool segs_ok =
        band_segments(45, 20) == std::vector<std::pair<int, int>>{{0, 20}, {20, 40}, {25, 45}} &&
        band_segments(13, 20) == std::vector<std::pair<int, int>>{{0, 13}};

    const Checkpoint ck = load_or_train_checkpoint();

    SimConfig scfg;
    const auto transfer_auc = [&](int bands, std::uint64_t seed) {
        const HsiCube cube = normalize_cube(oracles::synthetic_cube(32, 32, bands, seed));
        const auto samples = simulate_dataset(cube, 10, 50, scfg, seed + 1);
        return pooled_auc(samples, [&](const TrainingSample& s) {
            const ScoreMap m = infer(patch_as_cube(s.x), ck, 10, 10);
            return m.scores;
        });
    };
    const double auc_13 = transfer_auc(13, 4113);
    const double auc_45 = transfer_auc(45, 4145);

    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "band ranges %s; transfer AUC_DF: B2=13 interpolation %.4f, B2=45 segments %.4f (floor %.2f)",
                  segs_ok ? "exact" : "VIOLATED", auc_13, auc_45, kTransferAucMin);
    detail = buf;
    return segs_ok && auc_13 >= kTransferAucMin && auc_45 >= kTransferAucMin;
}

// ---------------------------------------------------------------------------
// Criterion 9: GRX hand fixture and affine invariance.

bool criterion_9(std::string& detail) {
    HsiCube cube;
    cube.height = 2;
    cube.width = 2;
    cube.bands = 2;
    cube.data = {0.0f, 1.0f, 0.0f, 3.0f, 0.0f, 0.0f, 1.0f, 3.0f};
    const ScoreMap m = grx(cube, 0.0);
    const double fixture_err =
        std::max({std::abs(m.scores[0] - 8.0 / 11.0), std::abs(m.scores[1] - 24.0 / 11.0),
                  std::abs(m.scores[2] - 24.0 / 11.0), std::abs(m.scores[3] - 32.0 / 11.0)});

    Rng rng(99);
    HsiCube base;
    base.height = 10;
    base.width = 10;
    base.bands = 3;
    base.data.resize(base.size());
    for (auto& v : base.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
    const double a[3][3] = {{1.0, 0.1, -0.05}, {0.08, 1.1, 0.02}, {-0.03, 0.06, 0.95}};
    const double b[3] = {0.4, -0.2, 0.1};
    HsiCube mapped = base;
    for (int r = 0; r < 10; ++r)
        for (int c = 0; c < 10; ++c)
            for (int i = 0; i < 3; ++i) {
                double acc = b[i];
                for (int j = 0; j < 3; ++j) acc += a[i][j] * base.at(r, c, j);
                mapped.at(r, c, i) = static_cast<float>(acc);
            }
    const ScoreMap s1 = grx(base, 0.0);
    const ScoreMap s2 = grx(mapped, 0.0);
    double affine_err = 0.0;
    for (std::size_t i = 0; i < s1.scores.size(); ++i)
        affine_err = std::max(affine_err,
                              std::abs(s1.scores[i] - s2.scores[i]) / std::max(1.0, std::abs(s1.scores[i])));

    char buf[160];
    std::snprintf(buf, sizeof(buf), "hand fixture error %.2e (tol 1e-10); affine invariance error %.2e (tol 1e-6)",
                  fixture_err, affine_err);
    detail = buf;
    return fixture_err < 1e-10 && affine_err < 1e-6;
}

} // namespace

int main(int argc, char** argv) {
    using CriterionFn = bool (*)(std::string&);
    const std::pair<CriterionFn, const char*> criteria[] = {
        {criterion_1, "derived-metric reproduction of the published tables"},
        {criterion_2, "finite-difference gradient suite"},
        {criterion_3, "ROC oracle equivalence"},
        {criterion_4, "simulation invariants"},
        {criterion_5, "affine oracle"},
        {criterion_6, "attention invariants"},
        {criterion_7, "desk-scale end-to-end detection"},
        {criterion_8, "band-count transfer"},
        {criterion_9, "GRX correctness"},
    };

    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
    if (selected.empty())
        for (int i = 1; i <= 9; ++i) selected.push_back(i);

    bool all_ok = true;
    for (const int k : selected) {
        if (k < 1 || k > 9) {
            std::printf("unknown criterion %d\n", k);
            return 2;
        }
        std::string detail;
        const bool ok = criteria[k - 1].first(detail);
        std::printf("CRITERION %d: %s - %s (%s)\n", k, ok ? "PASS" : "FAIL", criteria[k - 1].second,
                    detail.c_str());
        all_ok = all_ok && ok;
    }
    return all_ok ? 0 : 1;
}
