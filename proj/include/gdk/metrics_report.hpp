#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"

#include "gdk/geometry.hpp"

namespace gdk {

// Zero-shot evaluation row: depth metrics (AbsRel, delta1) and normal metrics
// (mean angular error, % below 11.25 deg), plus the alignment that was used.
// Fields that do not apply to the evaluated task are left at 0.
struct MetricsReport {
    double absrel = 0.0;
    double delta1 = 0.0;
    double mean_angular_deg = 0.0;
    double pct_below_11_25 = 0.0;
    long long n_valid_pixels = 0;
    AlignmentParams alignment;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["absrel"] = absrel;
        j["delta1"] = delta1;
        j["mean_angular_deg"] = mean_angular_deg;
        j["pct_below_11_25"] = pct_below_11_25;
        j["n_valid_pixels"] = n_valid_pixels;
        j["scale"] = alignment.scale;
        j["shift"] = alignment.shift;
        return j;
    }

    static MetricsReport from_json(const nlohmann::json& j) {
        MetricsReport r;
        r.absrel = j.at("absrel").get<double>();
        r.delta1 = j.at("delta1").get<double>();
        r.mean_angular_deg = j.at("mean_angular_deg").get<double>();
        r.pct_below_11_25 = j.at("pct_below_11_25").get<double>();
        r.n_valid_pixels = j.at("n_valid_pixels").get<long long>();
        r.alignment.scale = j.at("scale").get<double>();
        r.alignment.shift = j.at("shift").get<double>();
        return r;
    }

    static std::string csv_header() {
        return "absrel,delta1,mean_angular_deg,pct_below_11_25,n_valid_pixels,scale,shift";
    }

    std::string csv_row() const {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%lld,%.9g,%.9g", absrel, delta1,
                      mean_angular_deg, pct_below_11_25, n_valid_pixels, alignment.scale,
                      alignment.shift);
        return buf;
    }
};

inline MetricsReport evaluate_depth_sample(const DepthMap& pred, const DepthMap& gt) {
    MetricsReport r;
    r.alignment = align_affine(pred, gt);
    DepthMap aligned = apply_alignment(pred, r.alignment);
    r.absrel = absrel_aligned(aligned, gt);
    r.delta1 = delta1_aligned(aligned, gt);
    for (size_t i = 0; i < pred.pixels(); ++i) {
        r.n_valid_pixels += (pred.mask[i] && gt.mask[i]) ? 1 : 0;
    }
    return r;
}

inline MetricsReport evaluate_normals_sample(const NormalMap& pred, const NormalMap& gt) {
    MetricsReport r;
    auto [mean_deg, pct] = metric_normals(pred, gt);
    r.mean_angular_deg = mean_deg;
    r.pct_below_11_25 = pct;
    for (size_t i = 0; i < pred.pixels(); ++i) {
        r.n_valid_pixels += (pred.mask[i] && gt.mask[i]) ? 1 : 0;
    }
    return r;
}

// Uniform mean of per-sample metrics; pixel counts are summed.
inline MetricsReport aggregate_reports(const std::vector<MetricsReport>& rows) {
    if (rows.empty()) throw std::invalid_argument("aggregate_reports: no rows");
    MetricsReport out;
    for (const auto& r : rows) {
        out.absrel += r.absrel;
        out.delta1 += r.delta1;
        out.mean_angular_deg += r.mean_angular_deg;
        out.pct_below_11_25 += r.pct_below_11_25;
        out.n_valid_pixels += r.n_valid_pixels;
        out.alignment.scale += r.alignment.scale;
        out.alignment.shift += r.alignment.shift;
    }
    double inv = 1.0 / static_cast<double>(rows.size());
    out.absrel *= inv;
    out.delta1 *= inv;
    out.mean_angular_deg *= inv;
    out.pct_below_11_25 *= inv;
    out.alignment.scale *= inv;
    out.alignment.shift *= inv;
    return out;
}

}  // namespace gdk
