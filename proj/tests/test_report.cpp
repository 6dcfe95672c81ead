#include "doctest.h"

#include "gdk/experiment.hpp"
#include "gdk/metrics_report.hpp"
#include "gdk/rng.hpp"

using namespace gdk;

TEST_SUITE_BEGIN("report");

namespace {

MetricsReport sample_report() {
    MetricsReport r;
    r.absrel = 0.0625;
    r.delta1 = 93.75;
    r.mean_angular_deg = 4.5;
    r.pct_below_11_25 = 87.5;
    r.n_valid_pixels = 252;
    r.alignment = {1.25, -0.5};
    return r;
}

}  // namespace

TEST_CASE("metrics JSON uses the pinned snake_case keys") {
    auto j = sample_report().to_json();
    const char* keys[] = {"absrel", "delta1", "mean_angular_deg", "pct_below_11_25",
                          "n_valid_pixels", "scale", "shift"};
    size_t i = 0;
    for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        REQUIRE(i < 7);
        CHECK(it.key() == keys[i]);
    }
    CHECK(i == 7);

    // golden serialization
    CHECK(j.dump() ==
          R"({"absrel":0.0625,"delta1":93.75,"mean_angular_deg":4.5,"pct_below_11_25":87.5,"n_valid_pixels":252,"scale":1.25,"shift":-0.5})");

    auto back = MetricsReport::from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.absrel == 0.0625);
    CHECK(back.alignment.scale == 1.25);
}

TEST_CASE("metrics CSV golden row") {
    CHECK(MetricsReport::csv_header() ==
          "absrel,delta1,mean_angular_deg,pct_below_11_25,n_valid_pixels,scale,shift");
    CHECK(sample_report().csv_row() == "0.0625,93.75,4.5,87.5,252,1.25,-0.5");
}

TEST_CASE("sweep CSV header is pinned") {
    CHECK(sweep_csv_header() == "mode,steps,ensemble,absrel,delta1");
    SweepRow row{"trailing", 4, 5, 0.125, 87.5};
    CHECK(sweep_csv_row(row) == "trailing,4,5,0.125,87.5");
}

TEST_CASE("per-sample evaluation matches the direct metric calls") {
    Rng rng(99);
    DepthMap gt(8, 8);
    for (auto& v : gt.values) v = 2.0 + std::abs(rng.normal());
    DepthMap pred = gt;
    for (auto& v : pred.values) v = 0.5 * v + 1.0;

    auto rep = evaluate_depth_sample(pred, gt);
    CHECK(rep.absrel == doctest::Approx(metric_absrel(pred, gt)).epsilon(1e-14));
    CHECK(rep.delta1 == doctest::Approx(metric_delta1(pred, gt)).epsilon(1e-14));
    CHECK(rep.n_valid_pixels == 64);
    CHECK(rep.absrel == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));  // affine of gt
}

TEST_CASE("aggregation averages metrics and sums pixel counts") {
    MetricsReport a = sample_report();
    MetricsReport b = sample_report();
    b.absrel = 0.1875;
    b.n_valid_pixels = 100;
    auto agg = aggregate_reports({a, b});
    CHECK(agg.absrel == doctest::Approx(0.125));
    CHECK(agg.n_valid_pixels == 352);
    CHECK_THROWS_AS(aggregate_reports({}), std::invalid_argument);
}

TEST_CASE("normals evaluation round-trips through the report") {
    SceneConfig sc;
    sc.speckle_fraction = 0.0;
    auto g = gen_scene(5, 16, 16, sc);
    auto rep = evaluate_normals_sample(g.normals_gt, g.normals_gt);
    CHECK(rep.mean_angular_deg == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    CHECK(rep.pct_below_11_25 == doctest::Approx(100.0));
    CHECK(rep.n_valid_pixels == 256);
}

TEST_SUITE_END();
