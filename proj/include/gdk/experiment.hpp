#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdk/dataset.hpp"
#include "gdk/diffusion.hpp"
#include "gdk/metrics_report.hpp"
#include "gdk/training.hpp"

namespace gdk {

inline DenoiserFn model_fn(const DenoiserParams& params) {
    return [&params](const Field& z, const Field& x, int t) { return denoiser_forward(params, z, x, t); };
}

// Depth prediction for one sample under a given plan/noise, with the sample's
// validity mask attached for evaluation.
inline DepthMap infer_depth(const DenoiserParams& params, const GeoSample& sample,
                            const TimestepPlan& plan, const NoiseSpec& noise,
                            const NoiseSchedule& sched) {
    Field out = run_inference(model_fn(params), sample.condition, 1, plan, noise, sched);
    DepthMap pred;
    pred.h = out.h;
    pred.w = out.w;
    pred.values = std::move(out.v);
    pred.mask = sample.depth_gt.mask;
    return pred;
}

inline NormalMap infer_normals(const DenoiserParams& params, const GeoSample& sample,
                               const TimestepPlan& plan, const NoiseSpec& noise,
                               const NoiseSchedule& sched) {
    Field out = run_inference(model_fn(params), sample.condition, 3, plan, noise, sched);
    NormalMap pred;
    pred.h = out.h;
    pred.w = out.w;
    pred.vectors = std::move(out.v);
    pred.mask = sample.depth_gt.mask;
    return pred;
}

// Mean test-set depth metrics for one (plan, noise, ensemble) cell. Ensemble
// members differ only in their noise seed; member seeds derive from
// (eval_seed, sample index, member index) so the sweep is reproducible.
inline MetricsReport evaluate_depth_cell(const DenoiserParams& params,
                                         const std::vector<GeoSample>& test_set,
                                         const TimestepPlan& plan, const NoiseSpec& noise,
                                         int ensemble_size, uint64_t eval_seed,
                                         const NoiseSchedule& sched) {
    std::vector<MetricsReport> rows;
    rows.reserve(test_set.size());
    for (size_t si = 0; si < test_set.size(); ++si) {
        const GeoSample& sample = test_set[si];
        std::vector<DepthMap> members;
        members.reserve(ensemble_size);
        for (int m = 0; m < ensemble_size; ++m) {
            NoiseSpec spec = noise;
            spec.seed = derive_seed(eval_seed, si * 1000003ull + static_cast<uint64_t>(m));
            members.push_back(infer_depth(params, sample, plan, spec, sched));
        }
        DepthMap pred = ensemble(members);
        rows.push_back(evaluate_depth_sample(pred, sample.depth_gt));
    }
    return aggregate_reports(rows);
}

inline MetricsReport evaluate_normals_single_step(const DenoiserParams& params,
                                                  const std::vector<GeoSample>& test_set,
                                                  const NoiseSchedule& sched) {
    auto plan = select_timesteps(sched.T, 1, TimestepMode::Trailing);
    NoiseSpec zeros{NoiseKind::Zeros, 4, 0.5, 0};
    std::vector<MetricsReport> rows;
    rows.reserve(test_set.size());
    for (const auto& sample : test_set) {
        NormalMap pred = infer_normals(params, sample, plan, zeros, sched);
        rows.push_back(evaluate_normals_sample(pred, sample.normals_gt));
    }
    return aggregate_reports(rows);
}

struct SweepRow {
    std::string mode;  // "leading", "trailing", or "e2e"
    int steps = 1;
    int ensemble = 1;
    double absrel = 0.0;
    double delta1 = 0.0;
};

inline std::string sweep_csv_header() { return "mode,steps,ensemble,absrel,delta1"; }

inline std::string sweep_csv_row(const SweepRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.9g,%.9g", r.mode.c_str(), r.steps, r.ensemble,
                  r.absrel, r.delta1);
    return buf;
}

// The timestep-selection experiment: sweep mode x steps x ensemble with the
// diffusion checkpoint (Gaussian starts), and append the deterministic
// single-step row of the end-to-end fine-tuned checkpoint as the reference.
inline std::vector<SweepRow> repro_bug_sweep(const DenoiserParams& diffusion_params,
                                             const DenoiserParams* e2e_params,
                                             const std::vector<GeoSample>& test_set,
                                             const NoiseSchedule& sched, uint64_t eval_seed) {
    std::vector<SweepRow> rows;
    NoiseSpec gaussian{NoiseKind::Gaussian, 4, 0.5, 0};
    for (auto mode : {TimestepMode::Leading, TimestepMode::Trailing}) {
        for (int k : {1, 2, 4, 10}) {
            for (int ens : {1, 5}) {
                auto plan = select_timesteps(sched.T, k, mode);
                MetricsReport rep =
                    evaluate_depth_cell(diffusion_params, test_set, plan, gaussian, ens, eval_seed, sched);
                SweepRow row;
                row.mode = (mode == TimestepMode::Leading) ? "leading" : "trailing";
                row.steps = k;
                row.ensemble = ens;
                row.absrel = rep.absrel;
                row.delta1 = rep.delta1;
                rows.push_back(row);
            }
        }
    }
    if (e2e_params) {
        auto plan = select_timesteps(sched.T, 1, TimestepMode::Trailing);
        NoiseSpec zeros{NoiseKind::Zeros, 4, 0.5, 0};
        MetricsReport rep = evaluate_depth_cell(*e2e_params, test_set, plan, zeros, 1, eval_seed, sched);
        rows.push_back({"e2e", 1, 1, rep.absrel, rep.delta1});
    }
    return rows;
}

}  // namespace gdk
