#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gdk/binary_io.hpp"
#include "gdk/scene.hpp"
#include "gdk/training.hpp"
#include "gdk/version.hpp"

namespace gdk {

// ---------------------------------------------------------------------------
// sample files: "GDS1" | version | h | w | f32 planes (condition, depth,
// nx, ny, nz) | packed validity bits
// ---------------------------------------------------------------------------

inline void save_sample(const std::filesystem::path& path, const GeoSample& s) {
    ByteWriter wtr;
    wtr.magic("GDS1");
    wtr.u32(1);
    wtr.u32(static_cast<uint32_t>(s.depth_gt.h));
    wtr.u32(static_cast<uint32_t>(s.depth_gt.w));
    wtr.f32_plane(s.condition.v);
    wtr.f32_plane(s.depth_gt.values);
    const size_t n = s.depth_gt.pixels();
    for (int ch = 0; ch < 3; ++ch) {
        std::vector<double> plane(n);
        for (size_t i = 0; i < n; ++i) plane[i] = s.normals_gt.vectors[i * 3 + ch];
        wtr.f32_plane(plane);
    }
    wtr.mask_bits(s.depth_gt.mask);
    wtr.save(path);
}

inline GeoSample load_sample(const std::filesystem::path& path) {
    ByteReader rdr = ByteReader::from_file(path);
    rdr.expect_magic("GDS1");
    uint32_t version = rdr.u32("version");
    if (version != 1) throw ParseError(path.filename().string() + ": unsupported version", rdr.offset());
    int h = static_cast<int>(rdr.u32("height"));
    int w = static_cast<int>(rdr.u32("width"));
    if (h < 1 || w < 1 || static_cast<long long>(h) * w > (1ll << 26)) {
        throw ParseError(path.filename().string() + ": implausible dimensions", rdr.offset());
    }
    const size_t n = static_cast<size_t>(h) * w;

    GeoSample s;
    s.condition = Field(h, w, 1);
    s.condition.v = rdr.f32_plane(n, "plane 'condition'");
    s.depth_gt = DepthMap(h, w);
    s.depth_gt.values = rdr.f32_plane(n, "plane 'depth'");
    s.normals_gt = NormalMap(h, w);
    const char* plane_names[3] = {"plane 'normal_x'", "plane 'normal_y'", "plane 'normal_z'"};
    for (int ch = 0; ch < 3; ++ch) {
        auto plane = rdr.f32_plane(n, plane_names[ch]);
        for (size_t i = 0; i < n; ++i) s.normals_gt.vectors[i * 3 + ch] = plane[i];
    }
    auto mask = rdr.mask_bits(n, "validity mask");
    s.depth_gt.mask = mask;
    s.normals_gt.mask = std::move(mask);
    rdr.expect_end();
    return s;
}

// ---------------------------------------------------------------------------
// prediction files: "GDP1" | version | h | w | channels | f32 values | mask
// ---------------------------------------------------------------------------

inline void save_prediction(const std::filesystem::path& path, const Field& values,
                            const std::vector<uint8_t>& mask) {
    ByteWriter wtr;
    wtr.magic("GDP1");
    wtr.u32(1);
    wtr.u32(static_cast<uint32_t>(values.h));
    wtr.u32(static_cast<uint32_t>(values.w));
    wtr.u32(static_cast<uint32_t>(values.c));
    wtr.f32_plane(values.v);
    wtr.mask_bits(mask);
    wtr.save(path);
}

struct Prediction {
    Field values;
    std::vector<uint8_t> mask;
};

inline Prediction load_prediction(const std::filesystem::path& path) {
    ByteReader rdr = ByteReader::from_file(path);
    rdr.expect_magic("GDP1");
    uint32_t version = rdr.u32("version");
    if (version != 1) throw ParseError(path.filename().string() + ": unsupported version", rdr.offset());
    int h = static_cast<int>(rdr.u32("height"));
    int w = static_cast<int>(rdr.u32("width"));
    int c = static_cast<int>(rdr.u32("channels"));
    if (h < 1 || w < 1 || c < 1 || c > 4) {
        throw ParseError(path.filename().string() + ": implausible dimensions", rdr.offset());
    }
    Prediction p;
    p.values = Field(h, w, c);
    p.values.v = rdr.f32_plane(p.values.size(), "plane 'values'");
    p.mask = rdr.mask_bits(static_cast<size_t>(h) * w, "validity mask");
    rdr.expect_end();
    return p;
}

// ---------------------------------------------------------------------------
// dataset = directory of sample files plus a JSON manifest
// ---------------------------------------------------------------------------

struct DatasetManifest {
    int count = 0;
    int h = 0;
    int w = 0;
    int generator_version = kGeneratorVersion;
    uint64_t seed = 0;
    double split_fraction = 0.5;
    std::vector<int> train_indices;
    std::vector<int> test_indices;
};

inline std::string sample_filename(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%04d.gds", index);
    return buf;
}

inline nlohmann::ordered_json manifest_to_json(const DatasetManifest& m) {
    nlohmann::ordered_json j;
    j["count"] = m.count;
    j["h"] = m.h;
    j["w"] = m.w;
    j["generator_version"] = m.generator_version;
    j["seed"] = m.seed;
    j["split_fraction"] = m.split_fraction;
    j["train_indices"] = m.train_indices;
    j["test_indices"] = m.test_indices;
    return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.count = j.at("count").get<int>();
    m.h = j.at("h").get<int>();
    m.w = j.at("w").get<int>();
    m.generator_version = j.at("generator_version").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    m.split_fraction = j.at("split_fraction").get<double>();
    m.train_indices = j.at("train_indices").get<std::vector<int>>();
    m.test_indices = j.at("test_indices").get<std::vector<int>>();
    return m;
}

struct SplitIndices {
    std::vector<int> train;
    std::vector<int> test;
};

// Deterministic train/test split: order indices by a per-index hash so
// membership is a pure function of (seed, index), then cut at the fraction.
inline SplitIndices split_dataset_indices(int n, uint64_t seed, double split_fraction) {
    if (n < 2) throw std::invalid_argument("split_dataset_indices: need at least 2 samples");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
        throw std::invalid_argument("split_dataset_indices: split_fraction must be in (0,1)");
    }
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        uint64_t ka = derive_seed(seed, static_cast<uint64_t>(a));
        uint64_t kb = derive_seed(seed, static_cast<uint64_t>(b));
        return ka != kb ? ka < kb : a < b;
    });
    int k_train = std::clamp(static_cast<int>(std::llround(split_fraction * n)), 1, n - 1);
    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + k_train);
    s.test.assign(order.begin() + k_train, order.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

// Scene i is generated from seed XOR i. A nonzero mix fraction draws that
// share of scenes (chosen by per-index hash) from the alternate family; the
// ratio is a knob, with no claim that the two families match any particular
// real dataset blend.
inline DatasetManifest make_dataset(const std::filesystem::path& dir, int n, uint64_t seed,
                                    double split_fraction, int h, int w,
                                    const SceneConfig& scene_cfg = {}, double mix = 0.0,
                                    const SceneConfig& alt_cfg = scene_family_alt()) {
    if (!(mix >= 0.0 && mix < 1.0)) throw std::invalid_argument("make_dataset: mix must be in [0,1)");
    SplitIndices split = split_dataset_indices(n, seed, split_fraction);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("make_dataset: cannot create " + dir.string() + ": " + ec.message());

    DatasetManifest m;
    m.count = n;
    m.h = h;
    m.w = w;
    m.seed = seed;
    m.split_fraction = split_fraction;
    m.train_indices = std::move(split.train);
    m.test_indices = std::move(split.test);

    for (int i = 0; i < n; ++i) {
        uint64_t scene_seed = seed ^ static_cast<uint64_t>(i);
        bool use_alt = mix > 0.0 &&
                       (derive_seed(seed ^ 0xA17ull, static_cast<uint64_t>(i)) >> 11) * 0x1.0p-53 < mix;
        GeoSample s = gen_scene(scene_seed, h, w, use_alt ? alt_cfg : scene_cfg);
        save_sample(dir / sample_filename(i), s);
    }

    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("make_dataset: cannot write manifest in " + dir.string());
    out << manifest_to_json(m).dump(2) << "\n";
    return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw std::runtime_error("missing manifest: " + (dir / "manifest.json").string());
    nlohmann::json j = nlohmann::json::parse(in);
    return manifest_from_json(j);
}

inline std::vector<GeoSample> load_samples(const std::filesystem::path& dir, const std::vector<int>& indices) {
    std::vector<GeoSample> out;
    out.reserve(indices.size());
    for (int i : indices) out.push_back(load_sample(dir / sample_filename(i)));
    return out;
}

// ---------------------------------------------------------------------------
// training-sample preparation
// ---------------------------------------------------------------------------

// Depth targets go through percentile normalization to [-1, 1]; normals are
// already in range. Invalid pixels are filled with 0 and excluded by the mask.
inline TrainSample make_train_sample(const GeoSample& g, TargetKind target) {
    TrainSample s;
    s.condition = g.condition;
    s.gt_depth = g.depth_gt;
    s.gt_normals = g.normals_gt;

    if (target == TargetKind::Depth) {
        DepthMap z = preprocess_depth(g.depth_gt);
        s.target = Field(z.h, z.w, 1);
        s.target.v = z.values;
        s.mask = z.mask;
        for (size_t i = 0; i < s.mask.size(); ++i) {
            if (!s.mask[i]) s.target.v[i] = 0.0;
        }
    } else {
        s.target = Field(g.normals_gt.h, g.normals_gt.w, 3);
        s.target.v = g.normals_gt.vectors;
        s.mask = g.normals_gt.mask;
        for (size_t i = 0; i < s.mask.size(); ++i) {
            if (!s.mask[i]) {
                for (int ch = 0; ch < 3; ++ch) s.target.v[i * 3 + ch] = 0.0;
            }
        }
    }
    return s;
}

inline std::vector<TrainSample> make_train_samples(const std::vector<GeoSample>& samples, TargetKind target) {
    std::vector<TrainSample> out;
    out.reserve(samples.size());
    for (const auto& g : samples) out.push_back(make_train_sample(g, target));
    return out;
}

}  // namespace gdk
