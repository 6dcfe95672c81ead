#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "gdk/config.hpp"

using namespace gdk;
namespace fs = std::filesystem;

namespace {

fs::path write_cfg(const char* tag, const std::string& text) {
    fs::path p = fs::temp_directory_path() / (std::string("gdk_cfg_") + tag + "_" + std::to_string(::getpid()) + ".cfg");
    std::ofstream out(p, std::ios::trunc);
    out << text;
    return p;
}

}  // namespace

TEST_SUITE_BEGIN("config");

TEST_CASE("defaults are valid and typed getters work") {
    auto cfg = RunConfig::defaults();
    CHECK(cfg.geti("schedule.t") == 1000);
    CHECK(cfg.getd("schedule.beta_start") == doctest::Approx(0.00085));
    CHECK(cfg.gets("plan.mode") == "trailing");
    CHECK(cfg.getu("data.seed") == 42);
    CHECK(!cfg.was_set("schedule.t"));
    auto sched = schedule_from(cfg);
    CHECK(sched.T == 1000);
    auto plan = plan_from(cfg);
    CHECK(plan.steps == std::vector<int>{1000});
}

TEST_CASE("file parsing with comments, blanks, and overrides") {
    auto p = write_cfg("ok", "# comment\n\nschedule.t = 500\nplan.steps=5   # trailing note\n");
    auto cfg = RunConfig::defaults();
    cfg.load_file(p);
    CHECK(cfg.geti("schedule.t") == 500);
    CHECK(cfg.geti("plan.steps") == 5);
    CHECK(cfg.was_set("schedule.t"));
    cfg.apply_override("plan.steps=10", 1);
    CHECK(cfg.geti("plan.steps") == 10);
    fs::remove(p);
}

TEST_CASE("unknown keys are rejected with file and line") {
    auto p = write_cfg("unknown", "schedule.t = 100\nnot.a.key = 3\n");
    auto cfg = RunConfig::defaults();
    CHECK_THROWS_WITH_AS(cfg.load_file(p), doctest::Contains(":2: unknown key 'not.a.key'"), ConfigError);
    fs::remove(p);
}

TEST_CASE("schema violations carry the key name and line number") {
    SUBCASE("range") {
        auto p = write_cfg("range", "\nschedule.beta_end = 1.5\n");
        auto cfg = RunConfig::defaults();
        CHECK_THROWS_WITH_AS(cfg.load_file(p), doctest::Contains(":2:"), ConfigError);
        fs::remove(p);
    }
    SUBCASE("enum") {
        auto cfg = RunConfig::defaults();
        CHECK_THROWS_WITH_AS(cfg.apply_override("plan.mode=sideways", 3),
                             doctest::Contains("override #3"), ConfigError);
    }
    SUBCASE("type") {
        auto cfg = RunConfig::defaults();
        CHECK_THROWS_AS(cfg.apply_override("train.iterations=abc", 1), ConfigError);
        CHECK_THROWS_AS(cfg.apply_override("train.iterations=2.5", 1), ConfigError);
        CHECK_THROWS_AS(cfg.apply_override("model.embed_dim=15", 1), ConfigError);
        CHECK_THROWS_AS(cfg.apply_override("no-equals-sign", 1), ConfigError);
    }
}

TEST_CASE("canonical text and hash are stable and order-insensitive") {
    auto cfg1 = RunConfig::defaults();
    cfg1.apply_override("schedule.t=100", 1);
    cfg1.apply_override("plan.steps=2", 2);
    auto cfg2 = RunConfig::defaults();
    cfg2.apply_override("plan.steps=2", 1);
    cfg2.apply_override("schedule.t=100", 2);
    CHECK(cfg1.canonical_text() == cfg2.canonical_text());
    CHECK(cfg1.config_hash() == cfg2.config_hash());
    auto cfg3 = RunConfig::defaults();
    CHECK(cfg3.config_hash() != cfg1.config_hash());
}

TEST_CASE("typed views build consistent domain objects") {
    auto cfg = RunConfig::defaults();
    cfg.apply_override("train.loss=angular_normals", 1);
    CHECK(loss_from(cfg) == LossKind::AngularNormals);
    CHECK(target_from(cfg) == TargetKind::Normals);
    auto dims = dims_from(cfg, target_from(cfg));
    CHECK(dims.channels == 3);
    auto tc = train_from(cfg);
    CHECK(tc.policy == TimestepPolicy::FixedT);
    CHECK_NOTHROW(validate_train_config(tc));

    cfg.apply_override("train.loss=v_matching", 2);
    auto tc2 = train_from(cfg);
    CHECK(tc2.policy == TimestepPolicy::UniformRandom);
    CHECK(target_from(cfg) == TargetKind::Depth);
}

TEST_CASE("beta bounds are cross-validated") {
    auto cfg = RunConfig::defaults();
    cfg.apply_override("schedule.beta_start=0.5", 1);
    cfg.apply_override("schedule.beta_end=0.1", 2);
    CHECK_THROWS_AS(schedule_from(cfg), ConfigError);
}

TEST_SUITE_END();
