#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "gdk/checkpoint.hpp"
#include "gdk/dataset.hpp"

using namespace gdk;
namespace fs = std::filesystem;

namespace {

std::vector<uint8_t> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

struct TempDir {
    fs::path path;
    TempDir(const char* tag) {
        path = fs::temp_directory_path() / (std::string("gdk_test_") + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("gen_scene is deterministic in the seed") {
    auto a = gen_scene(123, 16, 16);
    auto b = gen_scene(123, 16, 16);
    CHECK(a.condition.v == b.condition.v);
    CHECK(a.depth_gt.values == b.depth_gt.values);
    CHECK(a.normals_gt.vectors == b.normals_gt.vectors);
    CHECK(a.depth_gt.mask == b.depth_gt.mask);

    auto c = gen_scene(124, 16, 16);
    CHECK(c.depth_gt.values != a.depth_gt.values);
}

TEST_CASE("degenerate zero-bump scene is a constant plane") {
    SceneConfig cfg;
    cfg.bumps = 0;
    cfg.plane_amp = 0.0;
    cfg.speckle_fraction = 0.0;
    auto s = gen_scene(5, 16, 16, cfg);
    for (size_t i = 0; i < s.depth_gt.pixels(); ++i) {
        CHECK(s.depth_gt.values[i] == doctest::Approx(cfg.base_depth));
        CHECK(s.normals_gt.vectors[i * 3 + 0] == doctest::Approx(0.0).scale(1.0));
        CHECK(s.normals_gt.vectors[i * 3 + 1] == doctest::Approx(0.0).scale(1.0));
        CHECK(s.normals_gt.vectors[i * 3 + 2] == doctest::Approx(1.0));
    }
}

TEST_CASE("scene ground truth is self-consistent") {
    for (uint64_t seed : {1ull, 7ull, 42ull}) {
        auto s = gen_scene(seed, 16, 16);
        size_t valid = 0;
        for (size_t i = 0; i < s.depth_gt.pixels(); ++i) {
            CHECK(s.depth_gt.values[i] > 0.0);
            const double* n = &s.normals_gt.vectors[i * 3];
            double norm = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
            CHECK(std::abs(norm - 1.0) <= 1e-6);
            valid += s.depth_gt.mask[i];
        }
        CHECK(static_cast<double>(valid) >= 0.9 * static_cast<double>(s.depth_gt.pixels()));
    }
}

TEST_CASE("filter normals agree with analytic normals on a 64x64 scene") {
    auto s = gen_scene(42, 64, 64);
    auto filt = normals_from_depth(s.depth_gt);
    double sum_deg = 0.0;
    size_t n = 0;
    constexpr double rad_to_deg = 180.0 / std::numbers::pi;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            size_t i = static_cast<size_t>(y) * 64 + x;
            if (!filt.mask[i] || !s.normals_gt.mask[i]) continue;
            const double* a = &s.normals_gt.vectors[i * 3];
            const double* b = &filt.vectors[i * 3];
            double dot = std::clamp(a[0] * b[0] + a[1] * b[1] + a[2] * b[2], -1.0, 1.0);
            sum_deg += std::acos(dot) * rad_to_deg;
            ++n;
        }
    }
    REQUIRE(n > 0);
    CHECK(sum_deg / static_cast<double>(n) <= 2.0);
}

TEST_CASE("sample files round-trip bit-exactly") {
    TempDir tmp("sample");
    auto s = gen_scene(99, 16, 16);
    fs::path p = tmp.path / "s.gds";
    save_sample(p, s);
    auto loaded = load_sample(p);
    fs::path p2 = tmp.path / "s2.gds";
    save_sample(p2, loaded);
    CHECK(read_bytes(p) == read_bytes(p2));
    CHECK(loaded.depth_gt.mask == s.depth_gt.mask);
    CHECK(loaded.condition.h == 16);
}

TEST_CASE("sample parse errors carry position and plane names") {
    TempDir tmp("parse");
    auto s = gen_scene(7, 8, 8);
    fs::path p = tmp.path / "s.gds";
    save_sample(p, s);
    auto bytes = read_bytes(p);

    SUBCASE("corrupt magic is rejected up front") {
        auto bad = bytes;
        bad[0] = 'X';
        write_bytes(p, bad);
        CHECK_THROWS_WITH_AS(load_sample(p), doctest::Contains("bad magic"), ParseError);
    }
    SUBCASE("truncation names the missing plane") {
        // cut inside the depth plane: header(4+4+4+4) + condition(64*4) + half of depth
        auto bad = bytes;
        bad.resize(16 + 64 * 4 + 32);
        write_bytes(p, bad);
        CHECK_THROWS_WITH_AS(load_sample(p), doctest::Contains("plane 'depth'"), ParseError);
    }
    SUBCASE("truncation in the mask names the mask") {
        auto bad = bytes;
        bad.resize(bad.size() - 4);
        write_bytes(p, bad);
        CHECK_THROWS_WITH_AS(load_sample(p), doctest::Contains("validity mask"), ParseError);
    }
    SUBCASE("trailing garbage is rejected") {
        auto bad = bytes;
        bad.push_back(0);
        write_bytes(p, bad);
        CHECK_THROWS_WITH_AS(load_sample(p), doctest::Contains("trailing bytes"), ParseError);
    }
}

TEST_CASE("make_dataset splits, regenerates identically, and matches the golden checksum") {
    TempDir tmp("dataset");
    fs::path dir = tmp.path / "d1";
    auto m = make_dataset(dir, 16, 42, 0.5, 16, 16);
    CHECK(m.train_indices.size() == 8);
    CHECK(m.test_indices.size() == 8);

    // disjoint and exhaustive
    std::vector<int> all = m.train_indices;
    all.insert(all.end(), m.test_indices.begin(), m.test_indices.end());
    std::sort(all.begin(), all.end());
    for (int i = 0; i < 16; ++i) CHECK(all[i] == i);

    // regeneration is byte-identical
    fs::path dir2 = tmp.path / "d2";
    make_dataset(dir2, 16, 42, 0.5, 16, 16);
    for (int i = 0; i < 16; ++i) {
        CHECK(read_bytes(dir / sample_filename(i)) == read_bytes(dir2 / sample_filename(i)));
    }
    CHECK(read_bytes(dir / "manifest.json") == read_bytes(dir2 / "manifest.json"));

    // golden checksum over the concatenated sample bytes, recorded at first
    // generation of (n=16, seed=42, 16x16)
    uint64_t h = 0xcbf29ce484222325ull;
    for (int i = 0; i < 16; ++i) {
        for (uint8_t b : read_bytes(dir / sample_filename(i))) {
            h ^= b;
            h *= 0x100000001b3ull;
        }
    }
    CHECK(hex64(h) == "066f1e8154c170a8");
}

TEST_CASE("two-sample dataset splits one and one") {
    TempDir tmp("split");
    auto m = make_dataset(tmp.path / "d", 2, 7, 0.5, 8, 8);
    CHECK(m.train_indices.size() == 1);
    CHECK(m.test_indices.size() == 1);
    CHECK_THROWS_AS(make_dataset(tmp.path / "bad", 1, 7, 0.5, 8, 8), std::invalid_argument);
    CHECK_THROWS_AS(make_dataset(tmp.path / "bad", 4, 7, 1.5, 8, 8), std::invalid_argument);
}

TEST_CASE("family mixing is deterministic and roughly honors the ratio") {
    TempDir tmp("mix");
    make_dataset(tmp.path / "a", 32, 3, 0.5, 8, 8, SceneConfig{}, 0.25);
    make_dataset(tmp.path / "b", 32, 3, 0.5, 8, 8, SceneConfig{}, 0.25);
    int alt_count = 0;
    for (int i = 0; i < 32; ++i) {
        CHECK(read_bytes(tmp.path / "a" / sample_filename(i)) ==
              read_bytes(tmp.path / "b" / sample_filename(i)));
        // the alternate family has no bumps and a deeper base; detect by
        // comparing against the primary-family generation of the same seed
        auto got = load_sample(tmp.path / "a" / sample_filename(i));
        auto primary = gen_scene(3ull ^ static_cast<uint64_t>(i), 8, 8);
        save_sample(tmp.path / "probe.gds", primary);
        alt_count += (read_bytes(tmp.path / "probe.gds") !=
                      read_bytes(tmp.path / "a" / sample_filename(i)));
    }
    CHECK(alt_count > 0);
    CHECK(alt_count < 32);
}

TEST_CASE("manifest round-trips through JSON") {
    TempDir tmp("manifest");
    auto m = make_dataset(tmp.path / "d", 4, 11, 0.5, 8, 8);
    auto loaded = load_manifest(tmp.path / "d");
    CHECK(loaded.count == m.count);
    CHECK(loaded.seed == m.seed);
    CHECK(loaded.train_indices == m.train_indices);
    CHECK(loaded.test_indices == m.test_indices);
    auto samples = load_samples(tmp.path / "d", loaded.test_indices);
    CHECK(samples.size() == loaded.test_indices.size());
}

TEST_CASE("checkpoints round-trip bit-exactly with and without optimizer state") {
    TempDir tmp("ckpt");
    DenoiserDims dims;
    dims.h = 8;
    dims.w = 8;
    dims.width = 16;
    dims.embed_dim = 8;
    auto params = DenoiserParams::random_init(dims, 3);

    SUBCASE("parameters only") {
        fs::path p = tmp.path / "a.gdk";
        save_checkpoint(p, params);
        auto loaded = load_checkpoint(p);
        CHECK(loaded.params.dims == dims);
        CHECK(!loaded.opt.has_value());
        fs::path p2 = tmp.path / "b.gdk";
        save_checkpoint(p2, loaded.params);
        CHECK(read_bytes(p) == read_bytes(p2));
        // loaded values are the f32 image of the saved doubles
        for (size_t i = 0; i < params.theta.size(); i += 173) {
            CHECK(loaded.params.theta[i] == static_cast<double>(static_cast<float>(params.theta[i])));
        }
    }
    SUBCASE("with optimizer state") {
        auto st = AdamState::zeros(params.size());
        st.step = 77;
        for (size_t i = 0; i < st.m.size(); ++i) st.m[i] = 0.01 * static_cast<double>(i % 13);
        fs::path p = tmp.path / "c.gdk";
        save_checkpoint(p, params, &st);
        auto loaded = load_checkpoint(p);
        REQUIRE(loaded.opt.has_value());
        CHECK(loaded.opt->step == 77);
        fs::path p2 = tmp.path / "d.gdk";
        save_checkpoint(p2, loaded.params, &*loaded.opt);
        CHECK(read_bytes(p) == read_bytes(p2));
    }
    SUBCASE("corrupt magic and truncation are positioned errors") {
        fs::path p = tmp.path / "e.gdk";
        save_checkpoint(p, params);
        auto bytes = read_bytes(p);
        auto bad = bytes;
        bad[1] = 'Z';
        write_bytes(p, bad);
        CHECK_THROWS_AS(load_checkpoint(p), ParseError);
        bad = bytes;
        bad.resize(40);
        write_bytes(p, bad);
        CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("parameter array"), ParseError);
    }
}

TEST_CASE("prediction files round-trip and reject corruption") {
    TempDir tmp("pred");
    Field values(8, 8, 1);
    for (size_t i = 0; i < values.size(); ++i) values.v[i] = 0.125 * static_cast<double>(i);
    std::vector<uint8_t> mask(64, 1);
    mask[5] = 0;
    fs::path p = tmp.path / "p.gdp";
    save_prediction(p, values, mask);
    auto loaded = load_prediction(p);
    CHECK(loaded.mask == mask);
    fs::path p2 = tmp.path / "q.gdp";
    save_prediction(p2, loaded.values, loaded.mask);
    CHECK(read_bytes(p) == read_bytes(p2));

    auto bad = read_bytes(p);
    bad.resize(20);
    write_bytes(p, bad);
    CHECK_THROWS_AS(load_prediction(p), ParseError);
}

TEST_SUITE_END();
