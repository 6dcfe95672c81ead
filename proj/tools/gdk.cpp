#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gdk/checkpoint.hpp"
#include "gdk/config.hpp"
#include "gdk/dataset.hpp"
#include "gdk/experiment.hpp"
#include "gdk/metrics_report.hpp"
#include "gdk/version.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;    // bad input, bad config, missing artifact
constexpr int kExitNumeric = 3;  // non-finite training loss and friends

struct MissingInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key=value config file");
    cmd->add_option("--set", opts.overrides, "config override key=value (repeatable)");
}

gdk::RunConfig load_config(const CommonOpts& opts) {
    auto cfg = gdk::RunConfig::defaults();
    if (!opts.config_path.empty()) cfg.load_file(opts.config_path);
    for (size_t i = 0; i < opts.overrides.size(); ++i) {
        cfg.apply_override(opts.overrides[i], static_cast<int>(i + 1));
    }
    return cfg;
}

fs::path report_dir_of(const gdk::RunConfig& cfg) {
    if (const char* env = std::getenv("GDK_REPORT_DIR"); env && *env) return fs::path(env);
    return fs::path(cfg.gets("paths.report_dir"));
}

ordered_json repro_stanza(const gdk::RunConfig& cfg) {
    ordered_json seeds;
    seeds["data.seed"] = cfg.getu("data.seed");
    seeds["train.seed"] = cfg.getu("train.seed");
    seeds["noise.seed"] = cfg.getu("noise.seed");
    seeds["eval.seed"] = cfg.getu("eval.seed");
    ordered_json j;
    j["config_hash"] = cfg.config_hash();
    j["seeds"] = std::move(seeds);
    j["version"] = std::string(gdk::kVersion);
    return j;
}

void write_report(const gdk::RunConfig& cfg, const std::string& command, ordered_json body) {
    fs::path dir = report_dir_of(cfg);
    fs::create_directories(dir);
    ordered_json j;
    j["command"] = command;
    for (auto& [k, v] : body.items()) j[k] = v;
    j["repro"] = repro_stanza(cfg);
    std::ofstream out(dir / (command + "_report.json"), std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report in " + dir.string());
    out << j.dump(2) << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

gdk::DatasetManifest require_dataset(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) {
        throw MissingInput("missing dataset: " + (dir / "manifest.json").string());
    }
    return gdk::load_manifest(dir);
}

gdk::Checkpoint require_checkpoint(const fs::path& path) {
    if (!fs::exists(path)) throw MissingInput("missing checkpoint: " + path.string());
    return gdk::load_checkpoint(path);
}

std::string plan_to_string(const gdk::TimestepPlan& plan) {
    std::string out = "[";
    for (size_t i = 0; i < plan.steps.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(plan.steps[i]);
    }
    out += "]";
    return out;
}

// ---------------------------------------------------------------------------
// timesteps
// ---------------------------------------------------------------------------

int run_timesteps(int T, int k, const std::string& mode_str, bool golden) {
    using namespace gdk;
    if (golden) {
        struct Row {
            int k;
            TimestepMode mode;
            std::vector<int> expect;
        };
        const std::vector<Row> rows = {
            {1, TimestepMode::Leading, {1}},
            {1, TimestepMode::Trailing, {1000}},
            {2, TimestepMode::Leading, {501, 1}},
            {2, TimestepMode::Trailing, {1000, 500}},
            {4, TimestepMode::Leading, {751, 501, 251, 1}},
            {4, TimestepMode::Trailing, {1000, 750, 500, 250}},
            {10, TimestepMode::Leading, {901, 801, 701, 601, 501, 401, 301, 201, 101, 1}},
            {10, TimestepMode::Trailing, {1000, 900, 800, 700, 600, 500, 400, 300, 200, 100}},
        };
        bool ok = true;
        for (const auto& row : rows) {
            auto plan = select_timesteps(1000, row.k, row.mode);
            bool match = plan.steps == row.expect;
            ok = ok && match;
            std::cout << (row.mode == TimestepMode::Leading ? "leading " : "trailing") << " k="
                      << row.k << "  " << plan_to_string(plan) << (match ? "" : "  MISMATCH") << "\n";
        }
        std::cout << (ok ? "golden check: ok" : "golden check: MISMATCH") << "\n";
        return ok ? kExitOk : 1;
    }

    auto mode = mode_str == "leading" ? gdk::TimestepMode::Leading : gdk::TimestepMode::Trailing;
    auto plan = select_timesteps(T, k, mode);
    std::cout << plan_to_string(plan) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int run_synth(const gdk::RunConfig& cfg) {
    fs::path dir = cfg.gets("paths.dataset");
    auto manifest = gdk::make_dataset(dir, cfg.geti("data.count"), cfg.getu("data.seed"),
                                      cfg.getd("data.split"), cfg.geti("data.h"), cfg.geti("data.w"),
                                      gdk::SceneConfig{}, cfg.getd("data.mix"));
    ordered_json body;
    body["dataset"] = dir.string();
    body["count"] = manifest.count;
    body["train_samples"] = manifest.train_indices.size();
    body["test_samples"] = manifest.test_indices.size();
    write_report(cfg, "synth", std::move(body));
    std::cout << "dataset: " << dir.string() << " (" << manifest.count << " samples, "
              << manifest.train_indices.size() << " train / " << manifest.test_indices.size()
              << " test)\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train / finetune
// ---------------------------------------------------------------------------

std::string train_log_csv(const std::vector<gdk::TrainLogEntry>& log) {
    std::string csv = "iteration,loss,lr\n";
    char buf[96];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", e.iteration, e.loss, e.lr);
        csv += buf;
    }
    return csv;
}

int run_train(const gdk::RunConfig& cfg) {
    using namespace gdk;
    if (loss_from(cfg) != LossKind::VMatching) {
        throw ConfigError("train: train.loss must be v_matching (use finetune for task losses)");
    }
    fs::path data_dir = cfg.gets("paths.dataset");
    auto manifest = require_dataset(data_dir);
    TargetKind target = target_from(cfg);
    auto samples = make_train_samples(load_samples(data_dir, manifest.train_indices), target);

    auto sched = schedule_from(cfg);
    DenoiserDims dims = dims_from(cfg, target);
    dims.h = manifest.h;
    dims.w = manifest.w;
    auto init = DenoiserParams::random_init(dims, cfg.getu("train.seed"));
    auto result = train_diffusion(std::move(init), samples, train_from(cfg), sched);

    fs::path ckpt = cfg.gets("paths.checkpoint");
    if (!ckpt.parent_path().empty()) fs::create_directories(ckpt.parent_path());
    save_checkpoint(ckpt, result.params, &result.opt);

    write_text(report_dir_of(cfg) / "train_log.csv", train_log_csv(result.log));
    ordered_json body;
    body["checkpoint"] = ckpt.string();
    body["iterations"] = result.log.size();
    body["first_loss"] = result.log.empty() ? 0.0 : result.log.front().loss;
    body["final_loss"] = result.log.empty() ? 0.0 : result.log.back().loss;
    write_report(cfg, "train", std::move(body));
    std::cout << "checkpoint: " << ckpt.string() << "\n";
    return kExitOk;
}

int run_finetune(gdk::RunConfig cfg) {
    using namespace gdk;
    if (loss_from(cfg) == LossKind::VMatching) {
        // default task for end-to-end fine-tuning
        cfg.force("train.loss", "affine_depth");
    }
    if (!cfg.was_set("noise.kind")) cfg.force("noise.kind", "zeros");

    fs::path data_dir = cfg.gets("paths.dataset");
    auto manifest = require_dataset(data_dir);
    TargetKind target = target_from(cfg);
    auto samples = make_train_samples(load_samples(data_dir, manifest.train_indices), target);
    auto sched = schedule_from(cfg);

    DenoiserParams init;
    const std::string init_path = cfg.gets("paths.init_checkpoint");
    if (!init_path.empty()) {
        auto ckpt = require_checkpoint(init_path);
        init = std::move(ckpt.params);
        int want = target == TargetKind::Normals ? 3 : 1;
        if (init.dims.channels != want || init.dims.h != manifest.h || init.dims.w != manifest.w) {
            throw ConfigError("finetune: checkpoint shape does not match the dataset/task");
        }
    } else {
        DenoiserDims dims = dims_from(cfg, target);
        dims.h = manifest.h;
        dims.w = manifest.w;
        init = DenoiserParams::random_init(dims, cfg.getu("train.seed"));
    }

    auto result = finetune_e2e(std::move(init), samples, train_from(cfg), sched);

    fs::path ckpt = cfg.gets("paths.checkpoint");
    if (!ckpt.parent_path().empty()) fs::create_directories(ckpt.parent_path());
    save_checkpoint(ckpt, result.params, &result.opt);

    write_text(report_dir_of(cfg) / "finetune_log.csv", train_log_csv(result.log));
    ordered_json body;
    body["checkpoint"] = ckpt.string();
    body["initialized_from"] = init_path.empty() ? "fresh" : init_path;
    body["noise_kind"] = cfg.gets("noise.kind");
    body["iterations"] = result.log.size();
    body["final_loss"] = result.log.empty() ? 0.0 : result.log.back().loss;
    body["skipped_samples"] = result.skipped_samples;
    write_report(cfg, "finetune", std::move(body));
    std::cout << "checkpoint: " << ckpt.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// infer / eval
// ---------------------------------------------------------------------------

std::vector<int> split_indices(const gdk::DatasetManifest& m, const std::string& split) {
    if (split == "train") return m.train_indices;
    if (split == "all") {
        std::vector<int> all = m.train_indices;
        all.insert(all.end(), m.test_indices.begin(), m.test_indices.end());
        std::sort(all.begin(), all.end());
        return all;
    }
    return m.test_indices;
}

int run_infer(const gdk::RunConfig& cfg, const std::string& split) {
    using namespace gdk;
    fs::path data_dir = cfg.gets("paths.dataset");
    auto manifest = require_dataset(data_dir);
    auto ckpt = require_checkpoint(cfg.gets("paths.checkpoint"));
    auto sched = schedule_from(cfg);
    auto plan = plan_from(cfg);
    NoiseSpec noise = noise_from(cfg);

    fs::path out_dir = cfg.gets("paths.predictions");
    fs::create_directories(out_dir);

    auto indices = split_indices(manifest, split);
    for (int idx : indices) {
        GeoSample sample = load_sample(data_dir / sample_filename(idx));
        NoiseSpec spec = noise;
        spec.seed = derive_seed(noise.seed, static_cast<uint64_t>(idx));
        Field pred = run_inference(model_fn(ckpt.params), sample.condition, ckpt.params.dims.channels,
                                   plan, spec, sched);
        char name[32];
        std::snprintf(name, sizeof(name), "pred_%04d.gdp", idx);
        save_prediction(out_dir / name, pred, sample.depth_gt.mask);
    }

    ordered_json body;
    body["predictions"] = out_dir.string();
    body["split"] = split;
    body["count"] = indices.size();
    body["plan"] = plan_to_string(plan);
    body["noise_kind"] = cfg.gets("noise.kind");
    write_report(cfg, "infer", std::move(body));
    std::cout << "predictions: " << out_dir.string() << " (" << indices.size() << " files)\n";
    return kExitOk;
}

int run_eval(const gdk::RunConfig& cfg, const std::string& split) {
    using namespace gdk;
    fs::path data_dir = cfg.gets("paths.dataset");
    auto manifest = require_dataset(data_dir);
    fs::path pred_dir = cfg.gets("paths.predictions");

    std::vector<MetricsReport> rows;
    ordered_json per_sample = ordered_json::array();
    int n_depth = 0, n_normals = 0, negative_scale = 0;

    for (int idx : split_indices(manifest, split)) {
        char name[32];
        std::snprintf(name, sizeof(name), "pred_%04d.gdp", idx);
        fs::path pred_path = pred_dir / name;
        if (!fs::exists(pred_path)) continue;
        Prediction pred = load_prediction(pred_path);
        GeoSample gt = load_sample(data_dir / sample_filename(idx));

        MetricsReport rep;
        if (pred.values.c == 1) {
            DepthMap pd;
            pd.h = pred.values.h;
            pd.w = pred.values.w;
            pd.values = pred.values.v;
            pd.mask = pred.mask;
            rep = evaluate_depth_sample(pd, gt.depth_gt);
            if (rep.alignment.scale <= 0.0) ++negative_scale;
            ++n_depth;
        } else if (pred.values.c == 3) {
            NormalMap nm;
            nm.h = pred.values.h;
            nm.w = pred.values.w;
            nm.vectors = pred.values.v;
            nm.mask = pred.mask;
            rep = evaluate_normals_sample(nm, gt.normals_gt);
            ++n_normals;
        } else {
            throw std::invalid_argument("eval: unsupported prediction channel count");
        }
        rows.push_back(rep);
        ordered_json row;
        row["index"] = idx;
        row["metrics"] = rep.to_json();
        per_sample.push_back(std::move(row));
    }
    if (rows.empty()) throw MissingInput("eval: no prediction files found under " + pred_dir.string());
    if (n_depth > 0 && n_normals > 0) {
        throw std::invalid_argument("eval: mixed depth and normal predictions in one run");
    }
    if (negative_scale > 0) {
        std::cerr << "warning: " << negative_scale << " sample(s) fitted with negative scale\n";
    }

    MetricsReport agg = aggregate_reports(rows);
    fs::path dir = report_dir_of(cfg);
    fs::create_directories(dir);
    write_text(dir / "metrics.csv", MetricsReport::csv_header() + "\n" + agg.csv_row() + "\n");

    ordered_json body;
    body["task"] = n_depth > 0 ? "depth" : "normals";
    body["samples"] = rows.size();
    body["metrics"] = agg.to_json();
    body["negative_scale_samples"] = negative_scale;
    body["per_sample"] = std::move(per_sample);
    write_report(cfg, "eval", std::move(body));

    std::cout << "absrel=" << agg.absrel << " delta1=" << agg.delta1
              << " mean_angular_deg=" << agg.mean_angular_deg << " pct_below_11_25="
              << agg.pct_below_11_25 << " (" << rows.size() << " samples)\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// repro-bug / ablate-noise
// ---------------------------------------------------------------------------

int run_repro_bug(const gdk::RunConfig& cfg, const std::string& e2e_path) {
    using namespace gdk;
    fs::path data_dir = cfg.gets("paths.dataset");
    auto manifest = require_dataset(data_dir);
    auto ckpt = require_checkpoint(cfg.gets("paths.checkpoint"));
    std::optional<Checkpoint> e2e;
    if (!e2e_path.empty()) e2e = require_checkpoint(e2e_path);

    auto sched = schedule_from(cfg);
    auto test_set = load_samples(data_dir, manifest.test_indices);
    auto rows = repro_bug_sweep(ckpt.params, e2e ? &e2e->params : nullptr, test_set, sched,
                                cfg.getu("eval.seed"));

    std::string csv = sweep_csv_header() + "\n";
    for (const auto& row : rows) csv += sweep_csv_row(row) + "\n";
    fs::path dir = report_dir_of(cfg);
    fs::create_directories(dir);
    write_text(dir / "repro_bug.csv", csv);

    ordered_json body;
    body["csv"] = (dir / "repro_bug.csv").string();
    body["rows"] = rows.size();
    write_report(cfg, "repro-bug", std::move(body));
    std::cout << csv;
    return kExitOk;
}

int run_ablate_noise(gdk::RunConfig cfg) {
    using namespace gdk;
    if (loss_from(cfg) == LossKind::VMatching) cfg.force("train.loss", "affine_depth");
    fs::path data_dir = cfg.gets("paths.dataset");
    auto manifest = require_dataset(data_dir);
    const std::string init_path = cfg.gets("paths.init_checkpoint");
    if (init_path.empty()) throw ConfigError("ablate-noise: paths.init_checkpoint is required");
    auto init = require_checkpoint(init_path);

    TargetKind target = target_from(cfg);
    auto train_set = make_train_samples(load_samples(data_dir, manifest.train_indices), target);
    auto test_set = load_samples(data_dir, manifest.test_indices);
    auto sched = schedule_from(cfg);

    std::string csv = "noise,absrel,delta1\n";
    ordered_json rows = ordered_json::array();
    for (auto [kind, name] : {std::pair{NoiseKind::Gaussian, "gaussian"},
                              std::pair{NoiseKind::Pyramid, "pyramid"},
                              std::pair{NoiseKind::Zeros, "zeros"}}) {
        TrainConfig tc = train_from(cfg);
        tc.noise.kind = kind;
        auto result = finetune_e2e(init.params, train_set, tc, sched);

        // evaluate with the same noise kind the variant was trained with
        auto plan = select_timesteps(sched.T, 1, TimestepMode::Trailing);
        NoiseSpec spec = tc.noise;
        MetricsReport rep =
            evaluate_depth_cell(result.params, test_set, plan, spec, 1, cfg.getu("eval.seed"), sched);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g\n", name, rep.absrel, rep.delta1);
        csv += buf;
        ordered_json row;
        row["noise"] = name;
        row["absrel"] = rep.absrel;
        row["delta1"] = rep.delta1;
        rows.push_back(std::move(row));
    }

    fs::path dir = report_dir_of(cfg);
    fs::create_directories(dir);
    write_text(dir / "ablation.csv", csv);
    ordered_json body;
    body["csv"] = (dir / "ablation.csv").string();
    body["rows"] = std::move(rows);
    write_report(cfg, "ablate-noise", std::move(body));
    std::cout << csv;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"toy image-conditional diffusion pipeline for geometry estimation"};
    app.set_version_flag("--version", std::string(gdk::kVersion));
    app.require_subcommand(1);

    // timesteps
    auto* ts = app.add_subcommand("timesteps", "print a DDIM timestep plan");
    int ts_T = 1000, ts_k = 1;
    std::string ts_mode = "trailing";
    bool ts_golden = false;
    ts->add_option("-T,--train-steps", ts_T, "training timestep count");
    ts->add_option("-k,--steps", ts_k, "inference step count");
    ts->add_option("--mode", ts_mode, "leading|trailing")
        ->check(CLI::IsMember({"leading", "trailing"}));
    ts->add_flag("--golden", ts_golden, "verify the T=1000 reference rows");

    CommonOpts synth_opts, train_opts, finetune_opts, infer_opts, eval_opts, repro_opts, ablate_opts;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, synth_opts);

    auto* train = app.add_subcommand("train", "diffusion (v-matching) training");
    add_common(train, train_opts);

    auto* finetune = app.add_subcommand("finetune", "end-to-end fine-tuning at t = T");
    add_common(finetune, finetune_opts);

    auto* infer = app.add_subcommand("infer", "write per-sample predictions");
    add_common(infer, infer_opts);
    std::string infer_split = "test";
    infer->add_option("--split", infer_split, "test|train|all")
        ->check(CLI::IsMember({"test", "train", "all"}));

    auto* eval = app.add_subcommand("eval", "evaluate predictions against ground truth");
    add_common(eval, eval_opts);
    std::string eval_split = "test";
    eval->add_option("--split", eval_split, "test|train|all")
        ->check(CLI::IsMember({"test", "train", "all"}));

    auto* repro = app.add_subcommand("repro-bug", "leading-vs-trailing sweep over steps and ensembles");
    add_common(repro, repro_opts);
    std::string repro_e2e;
    repro->add_option("--e2e-checkpoint", repro_e2e, "fine-tuned checkpoint for the reference row");

    auto* ablate = app.add_subcommand("ablate-noise", "fine-tune with gaussian/pyramid/zeros noise");
    add_common(ablate, ablate_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help, --version
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (ts->parsed()) return run_timesteps(ts_T, ts_k, ts_mode, ts_golden);
        if (synth->parsed()) return run_synth(load_config(synth_opts));
        if (train->parsed()) return run_train(load_config(train_opts));
        if (finetune->parsed()) return run_finetune(load_config(finetune_opts));
        if (infer->parsed()) return run_infer(load_config(infer_opts), infer_split);
        if (eval->parsed()) return run_eval(load_config(eval_opts), eval_split);
        if (repro->parsed()) return run_repro_bug(load_config(repro_opts), repro_e2e);
        if (ablate->parsed()) return run_ablate_noise(load_config(ablate_opts));
    } catch (const gdk::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
