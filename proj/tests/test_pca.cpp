#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "fieldcomp/errors.hpp"
#include "fieldcomp/geometry.hpp"
#include "fieldcomp/metrics.hpp"
#include "fieldcomp/pca.hpp"
#include "fieldcomp/rng.hpp"
#include "fieldcomp/simulator.hpp"

using namespace fieldcomp;

namespace {

std::vector<CompensationRun> default_family_runs(std::uint64_t base_seed, int n_runs,
                                                 int points_per_beam) {
    ScenarioConfig cfg;
    ScanTemplate tpl = make_scan_template(cfg, derive_seed(base_seed, seed_tag::scan_template), 16);
    std::vector<CompensationRun> runs;
    for (int i = 0; i < n_runs; ++i) {
        TrapScenario sc = sample_scenario(
            cfg, derive_seed(derive_seed(base_seed, seed_tag::train_scenario), i));
        runs.push_back(generate_compensation_run(
            sc, points_per_beam, derive_seed(derive_seed(base_seed, seed_tag::train_run), i),
            &tpl, "run-" + std::to_string(i)));
    }
    return runs;
}

}  // namespace

TEST_CASE("fit_pca on perfectly collinear 2-d data") {
    PcaModel m = fit_pca({{1, 1}, {-1, -1}, {2, 2}, {-2, -2}});
    double s = 1.0 / std::sqrt(2.0);
    REQUIRE(m.components[0][0] == Catch::Approx(s).margin(1e-12));
    REQUIRE(m.components[0][1] == Catch::Approx(s).margin(1e-12));
    REQUIRE(m.explained_ratio[0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(m.explained_ratio[1] == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(m.mean[0] == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("fit_pca hand-computed 2x2 covariance example") {
    PcaModel m = fit_pca({{2, 0}, {-2, 0}, {0, 1}, {0, -1}});
    REQUIRE(m.components[0][0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(m.components[0][1] == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(m.components[1][0] == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(m.components[1][1] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(m.explained_variance[0] == Catch::Approx(8.0 / 3.0).margin(1e-12));
    REQUIRE(m.explained_variance[1] == Catch::Approx(2.0 / 3.0).margin(1e-12));
    REQUIRE(m.explained_ratio[0] == Catch::Approx(0.8).margin(1e-12));
    REQUIRE(m.explained_ratio[1] == Catch::Approx(0.2).margin(1e-12));
}

TEST_CASE("fit_pca input validation") {
    REQUIRE_THROWS_AS(fit_pca({{1.0, 2.0}}), TooFewSamples);
    REQUIRE_THROWS_AS(fit_pca({}), TooFewSamples);
    REQUIRE_THROWS_AS(fit_pca({{1.0, 2.0}, {1.0}}), DimensionMismatch);
    double nan = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(fit_pca({{1.0, 2.0}, {nan, 0.0}}), NonFiniteData);
}

TEST_CASE("fit_pca full-basis reconstruction is lossless") {
    Rng rng(61);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 20; ++i) {
        std::vector<double> row(5);
        for (double& v : row) v = rng.uniform(-10.0, 10.0);
        data.push_back(row);
    }
    PcaModel m = fit_pca(data);
    for (const auto& x : data) {
        std::vector<double> rec = m.mean;
        for (std::size_t j = 0; j < m.components.size(); ++j) {
            double coef = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k)
                coef += (x[k] - m.mean[k]) * m.components[j][k];
            for (std::size_t k = 0; k < x.size(); ++k) rec[k] += coef * m.components[j][k];
        }
        for (std::size_t k = 0; k < x.size(); ++k) REQUIRE(std::abs(rec[k] - x[k]) < 1e-8);
    }

    // Components pairwise orthonormal; ratios sum to one; variances sorted.
    for (std::size_t i = 0; i < m.components.size(); ++i)
        for (std::size_t j = 0; j < m.components.size(); ++j) {
            double g = 0.0;
            for (std::size_t k = 0; k < 5; ++k) g += m.components[i][k] * m.components[j][k];
            REQUIRE(std::abs(g - (i == j ? 1.0 : 0.0)) < 1e-10);
        }
    double ratio_sum = 0.0;
    for (double r : m.explained_ratio) ratio_sum += r;
    REQUIRE(ratio_sum == Catch::Approx(1.0).margin(1e-10));
    for (std::size_t i = 0; i + 1 < m.explained_variance.size(); ++i)
        REQUIRE(m.explained_variance[i] >= m.explained_variance[i + 1]);
}

TEST_CASE("fit_pca explained_variance matches the rotated covariance diagonal") {
    Rng rng(62);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 30; ++i) {
        double a = rng.gauss() * 5.0, b = rng.gauss();
        data.push_back({a + b, a - b, 0.3 * a});
    }
    PcaModel m = fit_pca(data);

    // Compute the sample covariance independently.
    std::array<double, 3> mean{};
    for (const auto& x : data)
        for (int k = 0; k < 3; ++k) mean[k] += x[k];
    for (double& v : mean) v /= static_cast<double>(data.size());
    std::array<std::array<double, 3>, 3> cov{};
    for (const auto& x : data)
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cov[r][c] += (x[r] - mean[r]) * (x[c] - mean[c]);
    for (auto& row : cov)
        for (double& v : row) v /= static_cast<double>(data.size() - 1);

    for (std::size_t j = 0; j < 3; ++j) {
        double quad = 0.0;  // c_j^T Cov c_j
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) quad += m.components[j][r] * cov[r][c] * m.components[j][c];
        REQUIRE(std::abs(quad - m.explained_variance[j]) < 1e-10);
    }
}

TEST_CASE("fit_pca is permutation-invariant and rotation-equivariant") {
    Rng rng(63);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 25; ++i) {
        double a = rng.gauss() * 4.0, b = rng.gauss() * 2.0, c = rng.gauss();
        data.push_back({a, b, c});
    }
    PcaModel ref = fit_pca(data);

    std::vector<std::vector<double>> reversed(data.rbegin(), data.rend());
    PcaModel perm = fit_pca(reversed);
    for (int j = 0; j < 3; ++j) {
        REQUIRE(std::abs(perm.explained_variance[j] - ref.explained_variance[j]) < 1e-9);
        for (int k = 0; k < 3; ++k)
            REQUIRE(std::abs(perm.components[j][k] - ref.components[j][k]) < 1e-9);
    }

    // Rotate the data by a fixed orthogonal matrix.
    double ang = 0.7;
    Mat3 R{{{{std::cos(ang), -std::sin(ang), 0}, {std::sin(ang), std::cos(ang), 0}, {0, 0, 1}}}};
    std::vector<std::vector<double>> rotated;
    for (const auto& x : data) {
        Vec3 v = R * Vec3{x[0], x[1], x[2]};
        rotated.push_back({v.x, v.y, v.z});
    }
    PcaModel rot = fit_pca(rotated);
    for (int j = 0; j < 3; ++j) {
        REQUIRE(std::abs(rot.explained_variance[j] - ref.explained_variance[j]) < 1e-9);
        // Components match up to the canonical sign after rotation.
        Vec3 expected = R * Vec3{ref.components[j][0], ref.components[j][1], ref.components[j][2]};
        Vec3 got{rot.components[j][0], rot.components[j][1], rot.components[j][2]};
        REQUIRE(std::abs(std::abs(dot(expected, got)) - 1.0) < 1e-9);
    }
}

TEST_CASE("fit_offset_model on a noiseless one-parameter family") {
    // Scenarios differ only by the stray field along the first axis, so the
    // per-run offset vectors live on a line: one principal direction.
    ScenarioConfig cfg;
    cfg.noise_sigma = 0.0;
    std::vector<CompensationRun> runs;
    for (int j = 0; j < 5; ++j) {
        ScenarioConfig shifted = cfg;
        shifted.mean = Vec3{-300.0 + 150.0 * j, 40.0, -25.0};
        shifted.spread = 0.0;
        TrapScenario sc = sample_scenario(shifted, 900 + static_cast<std::uint64_t>(j));
        runs.push_back(generate_compensation_run(sc, 4, 950 + static_cast<std::uint64_t>(j)));
    }
    OffsetPcaModel model = fit_offset_model(runs, 1);
    REQUIRE(model.offset_pca.explained_ratio[0] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(model.n_components_retained == 1);
    REQUIRE(model.run_ids.size() == 5);
}

TEST_CASE("fit_offset_model on seven noisy runs reports a dominant component") {
    // Seven runs is a small sample, so individual families scatter widely;
    // the dominant-share claim is about the typical family, hence a median.
    std::vector<double> ratios;
    for (std::uint64_t base = 7001; base <= 7009; ++base) {
        std::vector<CompensationRun> runs = default_family_runs(base, 7, 7);
        OffsetPcaModel model = fit_offset_model(runs, 1);
        ratios.push_back(model.offset_pca.explained_ratio[0]);
        for (int b = 0; b < 3; ++b) REQUIRE(std::abs(norm(model.normals[b]) - 1.0) < 1e-12);
    }
    std::sort(ratios.begin(), ratios.end());
    double median = ratios[ratios.size() / 2];
    REQUIRE(median > 0.75);
    REQUIRE(median < 0.97);
}

TEST_CASE("fit_offset_model input validation") {
    std::vector<CompensationRun> one = default_family_runs(7002, 1, 5);
    REQUIRE_THROWS_AS(fit_offset_model(one, 1), InsufficientRuns);

    std::vector<CompensationRun> runs = default_family_runs(7003, 3, 5);
    REQUIRE_THROWS_AS(fit_offset_model(runs, 0), InvalidConfig);
    REQUIRE_THROWS_AS(fit_offset_model(runs, 4), InvalidConfig);

    // A run with fewer than three points per beam cannot contribute planes.
    std::vector<CompensationRun> thin = default_family_runs(7004, 2, 3);
    thin[0].points.erase(thin[0].points.begin());
    REQUIRE_THROWS_AS(fit_offset_model(thin, 1), FewerThanThreePoints);
}

TEST_CASE("predict_pca with offsets at the training mean hits the mean-plane intersection") {
    OffsetPcaModel model;
    model.normals = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
    model.offset_pca.mean = {12.0, -7.0, 3.0};
    model.offset_pca.components = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    model.offset_pca.explained_variance = {1.0, 0.0, 0.0};
    model.offset_pca.explained_ratio = {1.0, 0.0, 0.0};
    model.n_components_retained = 1;

    // Points whose offsets equal the stored means exactly.
    std::vector<PlanePoint> points{{1, Vec3{12.0, 99.0, -4.0}},
                                   {2, Vec3{55.0, -7.0, 0.0}},
                                   {3, Vec3{-8.0, 13.0, 3.0}}};
    Vec3 v = predict_pca(model, points);
    REQUIRE(norm(v - Vec3{12.0, -7.0, 3.0}) < 1e-9);
}

TEST_CASE("predict_pca with all components equals the direct intersection") {
    std::vector<CompensationRun> runs = default_family_runs(7005, 7, 7);
    OffsetPcaModel full = fit_offset_model(runs, 3);

    Rng rng(64);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<PlanePoint> points{{1, rng.uniform3(-500.0, 500.0)},
                                       {2, rng.uniform3(-500.0, 500.0)},
                                       {3, rng.uniform3(-500.0, 500.0)}};
        Vec3 via_model = predict_pca(full, points);
        Plane p1 = make_plane(full.normals[0], points[0].point);
        Plane p2 = make_plane(full.normals[1], points[1].point);
        Plane p3 = make_plane(full.normals[2], points[2].point);
        Vec3 direct = intersect_planes(p1, p2, p3);
        REQUIRE(norm(via_model - direct) < 1e-9);
    }
}

TEST_CASE("predict_pca with one component ignores orthogonal offset shifts") {
    std::vector<CompensationRun> runs = default_family_runs(7006, 7, 7);
    OffsetPcaModel model = fit_offset_model(runs, 1);
    const auto& c1 = model.offset_pca.components[0];

    Rng rng(65);
    std::vector<PlanePoint> points{{1, rng.uniform3(-300.0, 300.0)},
                                   {2, rng.uniform3(-300.0, 300.0)},
                                   {3, rng.uniform3(-300.0, 300.0)}};
    Vec3 base = predict_pca(model, points);

    // Shift the measured offsets by a vector orthogonal to component 1:
    // moving each point along its own normal changes offset i by w[i].
    Vec3 w{c1[1], -c1[0], 0.0};  // w . c1 = 0
    REQUIRE(std::abs(w.x * c1[0] + w.y * c1[1] + w.z * c1[2]) < 1e-12);
    std::vector<PlanePoint> shifted = points;
    for (int b = 0; b < 3; ++b) shifted[b].point += w[b] * model.normals[b];

    Vec3 moved = predict_pca(model, shifted);
    REQUIRE(norm(moved - base) < 1e-9);
}

TEST_CASE("predict_pca validates its input points") {
    std::vector<CompensationRun> runs = default_family_runs(7007, 3, 5);
    OffsetPcaModel model = fit_offset_model(runs, 1);

    std::vector<PlanePoint> missing{{1, Vec3{}}, {2, Vec3{}}};
    REQUIRE_THROWS_AS(predict_pca(model, missing), MissingBeam);

    std::vector<PlanePoint> duplicate{{1, Vec3{}}, {1, Vec3{}}, {2, Vec3{}}};
    REQUIRE_THROWS_AS(predict_pca(model, duplicate), DuplicateBeam);
}

TEST_CASE("pca predictor beats the minimal plane model on fresh scenarios") {
    // Paired Monte Carlo: same family, same evaluation scenario, same trial
    // count; the learned one-point-per-beam model should be no worse than
    // fitting fresh minimal planes from 3 points per beam.
    ScenarioConfig cfg;
    std::uint64_t base_seed = 7008;
    ScanTemplate tpl = make_scan_template(cfg, derive_seed(base_seed, seed_tag::scan_template), 16);
    std::vector<CompensationRun> runs = default_family_runs(base_seed, 7, 7);
    OffsetPcaModel model = fit_offset_model(runs, 1);

    TrapScenario eval =
        sample_scenario(cfg, derive_seed(base_seed, seed_tag::eval_scenario));
    Predictor pca_pred = make_pca_predictor(model, tpl);
    Predictor planes_pred = make_planes_predictor(tpl, 3);

    SigmaEstimate s_pca = estimate_sigma(pca_pred, eval, 400, 1);
    SigmaEstimate s_planes = estimate_sigma(planes_pred, eval, 400, 1);
    REQUIRE(s_pca.sigma <= s_planes.sigma);
}
