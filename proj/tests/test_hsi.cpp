#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "tdd/hsi.hpp"

using namespace tdd;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

HsiCube random_cube(int h, int w, int b, std::uint64_t seed) {
    Rng rng(seed);
    HsiCube cube;
    cube.height = h;
    cube.width = w;
    cube.bands = b;
    cube.data.resize(cube.size());
    for (auto& v : cube.data) v = static_cast<float>(rng.uniform(-5.0, 5.0));
    return cube;
}

} // namespace

TEST_CASE("constant cube round-trips") {
    oracles::TempDir tmp("hsi_const");
    HsiCube cube;
    cube.height = 2;
    cube.width = 2;
    cube.bands = 3;
    cube.data.assign(12, 0.5f);
    save_cube(cube, tmp.file("c"));
    const HsiCube back = load_cube(tmp.file("c"));
    CHECK(back.height == 2);
    CHECK(back.width == 2);
    CHECK(back.bands == 3);
    CHECK(back.data == cube.data);
}

TEST_CASE("save(load(p)) is byte-identical") {
    oracles::TempDir tmp("hsi_bytes");
    const HsiCube cube = random_cube(4, 5, 3, 11);
    save_cube(cube, tmp.file("a"));
    save_cube(load_cube(tmp.file("a")), tmp.file("b"));
    CHECK(slurp(tmp.file("a.hsi.json")) == slurp(tmp.file("b.hsi.json")));
    CHECK(slurp(tmp.file("a.hsi.bin")) == slurp(tmp.file("b.hsi.bin")));
}

TEST_CASE("payload byte layout") {
    oracles::TempDir tmp("hsi_layout");
    HsiCube one;
    one.height = 1;
    one.width = 1;
    one.bands = 1;
    one.data = {0.0f};
    save_cube(one, tmp.file("one"));
    const std::string payload = slurp(tmp.file("one.hsi.bin"));
    CHECK(payload == std::string(4, '\0'));
    const std::string header = slurp(tmp.file("one.hsi.json"));
    CHECK(header ==
          "{\"height\":1,\"width\":1,\"bands\":1,\"dtype\":\"f32\",\"order\":\"bsq\",\"endian\":\"little\"}\n");

    save_cube(random_cube(2, 3, 4, 5), tmp.file("p"));
    CHECK(slurp(tmp.file("p.hsi.bin")).size() == 2 * 3 * 4 * 4);
}

TEST_CASE("seeded random cube round-trips exactly") {
    oracles::TempDir tmp("hsi_rand");
    const HsiCube cube = random_cube(7, 9, 6, 42);
    save_cube(cube, tmp.file("r"));
    const HsiCube back = load_cube(tmp.file("r"));
    CHECK(back.data == cube.data);
}

TEST_CASE("header/payload validation errors") {
    oracles::TempDir tmp("hsi_err");
    const HsiCube cube = random_cube(2, 2, 3, 1);
    save_cube(cube, tmp.file("m"));

    SUBCASE("declared bands disagree with payload size") {
        std::ofstream h(tmp.file("m.hsi.json"), std::ios::trunc);
        h << "{\"height\":2,\"width\":2,\"bands\":4,\"dtype\":\"f32\",\"order\":\"bsq\",\"endian\":\"little\"}\n";
        h.close();
        CHECK_THROWS_AS(load_cube(tmp.file("m")), SizeError);
    }
    SUBCASE("missing field is named") {
        std::ofstream h(tmp.file("m.hsi.json"), std::ios::trunc);
        h << "{\"height\":2,\"width\":2,\"dtype\":\"f32\",\"order\":\"bsq\",\"endian\":\"little\"}\n";
        h.close();
        try {
            load_cube(tmp.file("m"));
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("bands") != std::string::npos);
        }
    }
    SUBCASE("unknown field rejected") {
        std::ofstream h(tmp.file("m.hsi.json"), std::ios::trunc);
        h << "{\"height\":2,\"width\":2,\"bands\":3,\"dtype\":\"f32\",\"order\":\"bsq\",\"endian\":\"little\","
             "\"extra\":1}\n";
        h.close();
        CHECK_THROWS_AS(load_cube(tmp.file("m")), FormatError);
    }
    SUBCASE("wrong dtype rejected") {
        std::ofstream h(tmp.file("m.hsi.json"), std::ios::trunc);
        h << "{\"height\":2,\"width\":2,\"bands\":3,\"dtype\":\"f64\",\"order\":\"bsq\",\"endian\":\"little\"}\n";
        h.close();
        CHECK_THROWS_AS(load_cube(tmp.file("m")), FormatError);
    }
    SUBCASE("non-finite payload rejected") {
        // overwrite one float with a NaN bit pattern
        std::fstream bin(tmp.file("m.hsi.bin"), std::ios::in | std::ios::out | std::ios::binary);
        const unsigned char nan_bytes[4] = {0x00, 0x00, 0xc0, 0x7f};
        bin.write(reinterpret_cast<const char*>(nan_bytes), 4);
        bin.close();
        CHECK_THROWS_AS(load_cube(tmp.file("m")), DataError);
    }
    SUBCASE("missing payload file") {
        std::filesystem::remove(tmp.file("m.hsi.bin"));
        CHECK_THROWS_AS(load_cube(tmp.file("m")), IoError);
    }
}

TEST_CASE("mask containers enforce binary values") {
    oracles::TempDir tmp("hsi_mask");
    BinaryMask mask;
    mask.height = 2;
    mask.width = 3;
    mask.values = {0, 1, 1, 0, 0, 1};
    save_mask(mask, tmp.file("g"));
    const BinaryMask back = load_mask(tmp.file("g"));
    CHECK(back.values == mask.values);

    HsiCube bad;
    bad.height = 1;
    bad.width = 2;
    bad.bands = 1;
    bad.data = {0.0f, 0.25f};
    save_cube(bad, tmp.file("bad"));
    CHECK_THROWS_AS(load_mask(tmp.file("bad")), DataError);
}

TEST_CASE("score maps round-trip through the f32 container") {
    oracles::TempDir tmp("hsi_map");
    ScoreMap map;
    map.height = 2;
    map.width = 2;
    map.scores = {0.0, 0.25, 0.5, 1.0};
    save_map(map, tmp.file("s"));
    const ScoreMap back = load_map(tmp.file("s"));
    CHECK(back.scores == map.scores);
}

TEST_CASE("normalize_cube") {
    HsiCube cube;
    cube.height = 1;
    cube.width = 3;
    cube.bands = 2;
    cube.data = {2.0f, 4.0f, 6.0f, /*band 2:*/ 7.0f, 7.0f, 7.0f};

    const HsiCube norm = normalize_cube(cube);
    CHECK(norm.data[0] == 0.0f);
    CHECK(norm.data[1] == 0.5f);
    CHECK(norm.data[2] == 1.0f);
    // constant band maps to zeros
    CHECK(norm.data[3] == 0.0f);
    CHECK(norm.data[4] == 0.0f);
    CHECK(norm.data[5] == 0.0f);

    SUBCASE("idempotent on grid values") {
        const HsiCube twice = normalize_cube(norm);
        CHECK(twice.data == norm.data);
    }
}

TEST_CASE("normalization is per band") {
    const HsiCube cube = random_cube(6, 6, 4, 3);
    const HsiCube norm = normalize_cube(cube);
    const std::size_t plane = 36;
    for (int b = 0; b < 4; ++b) {
        float lo = 1.0f, hi = 0.0f;
        for (std::size_t i = 0; i < plane; ++i) {
            const float v = norm.data[b * plane + i];
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo == 0.0f);
        CHECK(hi == 1.0f);
    }
}

TEST_CASE("patch grid") {
    HsiCube cube = random_cube(10, 10, 2, 9);

    SUBCASE("whole-image patch") {
        const auto patches = extract_patches(cube, 10, 10);
        REQUIRE(patches.size() == 1);
        CHECK(patches[0].row == 0);
        CHECK(patches[0].col == 0);
    }
    SUBCASE("clamped border origins") {
        const auto origins = patch_origins(10, 4, 4);
        CHECK(origins == std::vector<int>{0, 4, 6});
        const auto patches = extract_patches(cube, 4, 4);
        CHECK(patches.size() == 9);
    }
    SUBCASE("oversized patch rejected") {
        CHECK_THROWS_AS(extract_patches(cube, 11, 4), ArgumentError);
    }
    SUBCASE("stride beyond the patch size rejected") {
        CHECK_THROWS_AS(extract_patches(cube, 4, 5), ArgumentError);
    }
    SUBCASE("patch data is a copy in cube layout") {
        const auto patches = extract_patches(cube, 4, 4);
        const auto& p = patches.back();
        for (int b = 0; b < 2; ++b)
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c) CHECK(p.at(r, c, b) == cube.at(p.row + r, p.col + c, b));
    }
}

TEST_CASE("patch coverage is total for random configurations") {
    Rng rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        const int h = rng.uniform_int(4, 24);
        const int w = rng.uniform_int(4, 24);
        const int p = rng.uniform_int(2, std::min(h, w));
        const int s = rng.uniform_int(1, p);
        HsiCube cube;
        cube.height = h;
        cube.width = w;
        cube.bands = 1;
        cube.data.assign(cube.size(), 0.0f);
        const auto patches = extract_patches(cube, p, s);
        std::vector<int> covered(static_cast<std::size_t>(h) * w, 0);
        for (const auto& patch : patches) {
            REQUIRE(patch.row + p <= h);
            REQUIRE(patch.col + p <= w);
            for (int r = 0; r < p; ++r)
                for (int c = 0; c < p; ++c) covered[static_cast<std::size_t>(patch.row + r) * w + patch.col + c]++;
        }
        const bool all = std::all_of(covered.begin(), covered.end(), [](int v) { return v >= 1; });
        CHECK(all);
    }
}
