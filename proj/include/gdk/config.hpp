#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdk/denoiser.hpp"
#include "gdk/noise.hpp"
#include "gdk/schedule.hpp"
#include "gdk/timesteps.hpp"
#include "gdk/training.hpp"
#include "gdk/version.hpp"

namespace gdk {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace cfgdetail {

enum class ValueType { Int, UInt, Real, Enum, String };

struct SchemaEntry {
    ValueType type;
    const char* default_value;
    double min = 0.0;
    double max = 0.0;
    bool min_exclusive = false;
    bool max_exclusive = false;
    std::vector<std::string> options;  // Enum only
    bool require_even = false;         // Int only
};

// The published key schema; unknown keys are rejected at parse time.
inline const std::map<std::string, SchemaEntry>& schema() {
    static const std::map<std::string, SchemaEntry> s = {
        {"schedule.t", {ValueType::Int, "1000", 1, 100000}},
        {"schedule.beta_start", {ValueType::Real, "0.00085", 0, 1, true, true}},
        {"schedule.beta_end", {ValueType::Real, "0.012", 0, 1, true, true}},
        {"schedule.spacing", {ValueType::Enum, "scaled_linear", 0, 0, false, false, {"linear", "scaled_linear"}}},
        {"plan.steps", {ValueType::Int, "1", 1, 100000}},
        {"plan.mode", {ValueType::Enum, "trailing", 0, 0, false, false, {"leading", "trailing"}}},
        {"noise.kind", {ValueType::Enum, "gaussian", 0, 0, false, false, {"gaussian", "pyramid", "zeros"}}},
        {"noise.levels", {ValueType::Int, "4", 1, 32}},
        {"noise.decay", {ValueType::Real, "0.5", 0, 1, true, true}},
        {"noise.seed", {ValueType::UInt, "0"}},
        {"model.width", {ValueType::Int, "256", 1, 65536}},
        {"model.embed_dim", {ValueType::Int, "32", 2, 1024, false, false, {}, true}},
        {"train.iterations", {ValueType::Int, "1500", 0, 10000000}},
        {"train.batch_size", {ValueType::Int, "8", 1, 4096}},
        {"train.learning_rate", {ValueType::Real, "0.001", 0, 1000, true}},
        {"train.warmup", {ValueType::Int, "100", 0, 1000000}},
        {"train.lr_decay", {ValueType::Real, "0.9995", 0, 1, true}},
        {"train.weight_decay", {ValueType::Real, "0", 0, 1}},
        {"train.loss",
         {ValueType::Enum, "v_matching", 0, 0, false, false, {"v_matching", "affine_depth", "angular_normals"}}},
        {"train.target", {ValueType::Enum, "depth", 0, 0, false, false, {"depth", "normals"}}},
        {"train.seed", {ValueType::UInt, "7"}},
        {"data.count", {ValueType::Int, "64", 2, 100000}},
        {"data.h", {ValueType::Int, "16", 8, 4096}},
        {"data.w", {ValueType::Int, "16", 8, 4096}},
        {"data.seed", {ValueType::UInt, "42"}},
        {"data.split", {ValueType::Real, "0.5", 0, 1, true, true}},
        {"data.mix", {ValueType::Real, "0", 0, 1, false, true}},
        {"eval.ensemble", {ValueType::Int, "1", 1, 64}},
        {"eval.seed", {ValueType::UInt, "1000"}},
        {"paths.dataset", {ValueType::String, "data"}},
        {"paths.checkpoint", {ValueType::String, "checkpoint.gdk"}},
        {"paths.init_checkpoint", {ValueType::String, ""}},
        {"paths.predictions", {ValueType::String, "predictions"}},
        {"paths.report_dir", {ValueType::String, "reports"}},
    };
    return s;
}

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline void validate_value(const std::string& key, const SchemaEntry& entry, const std::string& value,
                           const std::string& where) {
    auto fail = [&](const std::string& why) {
        throw ConfigError(where + ": " + why + " for key '" + key + "'");
    };
    switch (entry.type) {
        case ValueType::String:
            return;
        case ValueType::Enum: {
            if (std::find(entry.options.begin(), entry.options.end(), value) == entry.options.end()) {
                std::string opts;
                for (const auto& o : entry.options) opts += (opts.empty() ? "" : "|") + o;
                fail("invalid value '" + value + "' (expected one of " + opts + ")");
            }
            return;
        }
        case ValueType::UInt: {
            try {
                size_t used = 0;
                (void)std::stoull(value, &used);
                if (used != value.size()) fail("invalid unsigned integer '" + value + "'");
            } catch (const std::exception&) {
                fail("invalid unsigned integer '" + value + "'");
            }
            return;
        }
        case ValueType::Int:
        case ValueType::Real: {
            double v = 0.0;
            try {
                size_t used = 0;
                v = std::stod(value, &used);
                if (used != value.size()) fail("invalid number '" + value + "'");
            } catch (const std::exception&) {
                fail("invalid number '" + value + "'");
            }
            if (entry.type == ValueType::Int) {
                if (v != std::floor(v)) fail("expected an integer, got '" + value + "'");
                if (entry.require_even && static_cast<long long>(v) % 2 != 0) {
                    fail("expected an even integer, got '" + value + "'");
                }
            }
            bool lo_ok = entry.min_exclusive ? v > entry.min : v >= entry.min;
            bool hi_ok = entry.max_exclusive ? v < entry.max : v <= entry.max;
            if (entry.max == 0.0 && entry.min == 0.0 && !entry.min_exclusive) return;  // unconstrained
            if (!lo_ok || !hi_ok) {
                std::ostringstream os;
                os << "value " << value << " out of range " << (entry.min_exclusive ? "(" : "[") << entry.min
                   << ", " << entry.max << (entry.max_exclusive ? ")" : "]");
                fail(os.str());
            }
            return;
        }
    }
}

}  // namespace cfgdetail

// Flat key=value configuration ("#" starts a comment) validated against the
// schema above; flag overrides use the same key=value form.
class RunConfig {
  public:
    static RunConfig defaults() {
        RunConfig cfg;
        for (const auto& [key, entry] : cfgdetail::schema()) cfg.values_[key] = entry.default_value;
        return cfg;
    }

    void load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path.string());
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string where = path.filename().string() + ":" + std::to_string(lineno);
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = cfgdetail::trim(line);
            if (line.empty()) continue;
            set_line(line, where);
        }
    }

    // --set key=value, numbered for error reporting
    void apply_override(const std::string& kv, int index) {
        set_line(kv, "override #" + std::to_string(index));
    }

    int geti(const std::string& key) const { return static_cast<int>(std::stoll(raw(key))); }
    double getd(const std::string& key) const { return std::stod(raw(key)); }
    uint64_t getu(const std::string& key) const { return std::stoull(raw(key)); }
    const std::string& gets(const std::string& key) const { return raw(key); }

    bool was_set(const std::string& key) const { return explicit_keys_.count(key) > 0; }

    void force(const std::string& key, const std::string& value) {
        set_line(key + "=" + value, "internal");
    }

    // Sorted canonical "key=value" lines; the basis of the config hash.
    std::string canonical_text() const {
        std::string out;
        for (const auto& [k, v] : values_) {
            out += k;
            out += '=';
            out += v;
            out += '\n';
        }
        return out;
    }

    std::string config_hash() const { return hex64(fnv1a64(canonical_text())); }

  private:
    const std::string& raw(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
        return it->second;
    }

    void set_line(const std::string& line, const std::string& where) {
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected key=value, got '" + line + "'");
        }
        std::string key = cfgdetail::trim(line.substr(0, eq));
        std::string value = cfgdetail::trim(line.substr(eq + 1));
        auto it = cfgdetail::schema().find(key);
        if (it == cfgdetail::schema().end()) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
        cfgdetail::validate_value(key, it->second, value, where);
        values_[key] = value;
        explicit_keys_.insert(key);
    }

    std::map<std::string, std::string> values_;
    std::set<std::string> explicit_keys_;
};

// ---------------------------------------------------------------------------
// typed views over the validated config
// ---------------------------------------------------------------------------

inline NoiseSchedule schedule_from(const RunConfig& cfg) {
    double b0 = cfg.getd("schedule.beta_start");
    double b1 = cfg.getd("schedule.beta_end");
    if (b0 > b1) throw ConfigError("schedule.beta_start must not exceed schedule.beta_end");
    auto spacing = cfg.gets("schedule.spacing") == "linear" ? BetaSpacing::Linear : BetaSpacing::ScaledLinear;
    return build_schedule(cfg.geti("schedule.t"), b0, b1, spacing);
}

inline TimestepPlan plan_from(const RunConfig& cfg) {
    auto mode = cfg.gets("plan.mode") == "leading" ? TimestepMode::Leading : TimestepMode::Trailing;
    return select_timesteps(cfg.geti("schedule.t"), cfg.geti("plan.steps"), mode);
}

inline NoiseSpec noise_from(const RunConfig& cfg) {
    NoiseSpec spec;
    const std::string& kind = cfg.gets("noise.kind");
    spec.kind = kind == "gaussian" ? NoiseKind::Gaussian
                                   : (kind == "pyramid" ? NoiseKind::Pyramid : NoiseKind::Zeros);
    spec.pyramid_levels = cfg.geti("noise.levels");
    spec.pyramid_decay = cfg.getd("noise.decay");
    spec.seed = cfg.getu("noise.seed");
    return spec;
}

inline LossKind loss_from(const RunConfig& cfg) {
    const std::string& loss = cfg.gets("train.loss");
    if (loss == "v_matching") return LossKind::VMatching;
    if (loss == "affine_depth") return LossKind::AffineInvariantDepth;
    return LossKind::AngularNormals;
}

// Task losses imply their target field; v-matching trains on train.target.
inline TargetKind target_from(const RunConfig& cfg) {
    return target_of(loss_from(cfg),
                     cfg.gets("train.target") == "normals" ? TargetKind::Normals : TargetKind::Depth);
}

inline DenoiserDims dims_from(const RunConfig& cfg, TargetKind target) {
    DenoiserDims d;
    d.h = cfg.geti("data.h");
    d.w = cfg.geti("data.w");
    d.channels = target == TargetKind::Normals ? 3 : 1;
    d.width = cfg.geti("model.width");
    d.embed_dim = cfg.geti("model.embed_dim");
    return d;
}

inline TrainConfig train_from(const RunConfig& cfg) {
    TrainConfig t;
    t.iterations = cfg.geti("train.iterations");
    t.batch_size = cfg.geti("train.batch_size");
    t.learning_rate = cfg.getd("train.learning_rate");
    t.warmup_steps = cfg.geti("train.warmup");
    t.lr_decay = cfg.getd("train.lr_decay");
    t.weight_decay = cfg.getd("train.weight_decay");
    t.noise = noise_from(cfg);
    t.loss = loss_from(cfg);
    t.policy = t.loss == LossKind::VMatching ? TimestepPolicy::UniformRandom : TimestepPolicy::FixedT;
    t.seed = cfg.getu("train.seed");
    return t;
}

}  // namespace gdk
