#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fieldcomp/ann.hpp"
#include "fieldcomp/errors.hpp"
#include "fieldcomp/geometry.hpp"
#include "fieldcomp/pca.hpp"
#include "fieldcomp/rng.hpp"
#include "fieldcomp/simulator.hpp"
#include "fieldcomp/vec3.hpp"

namespace fieldcomp {

// Accuracy estimate of a predictor against one noise manifestation: sigma is
// the RMS Euclidean deviation of the predictions from their own mean (a
// spread measure), and containment_68 separately checks how often the truth
// lies within sigma.
struct SigmaEstimate {
    double sigma = 0.0;
    int n_trials = 0;
    Vec3 mean_prediction{};
    double containment_68 = 0.0;
};

// One benchmarked (method, budget) combination.
struct ScalingPoint {
    std::string method;
    std::uint64_t n_measurements = 0;  // fresh measurements per prediction (audited)
    std::uint64_t amortized_training_measurements = 0;  // historical points behind the model
    double sigma = 0.0;
    double containment_68 = 0.0;
    int n_trials = 0;
    std::uint64_t seed = 0;
};

// An abstract prediction procedure plus its declared measurement cost. The
// callable must add every simulator measurement it consumes to the audit
// counter; estimate_sigma enforces tally == n_measurements on every trial.
struct Predictor {
    std::string name;
    std::uint64_t n_measurements = 0;
    std::uint64_t amortized_training_measurements = 0;
    std::function<Vec3(const TrapScenario&, std::uint64_t seed, std::uint64_t& audit)> predict;
};

// Exhaustive hypercubic baseline: evaluates the summed three-beam signal on
// an n^3 grid inside the bounds and returns the argmin node. `phase` shifts
// the whole grid (each component must lie in [-step/2, step/2] to stay in
// bounds); a seed-derived random phase makes the estimator unbiased with
// respect to grid placement, while phase zero keeps the grid centered for
// exact-hit tests. Consumes 3 n^3 signal measurements.
inline Vec3 grid_search(const TrapScenario& sc, int n_per_axis, std::uint64_t seed,
                        Vec3 phase = {}, std::uint64_t* audit = nullptr) {
    if (n_per_axis < 2) throw InvalidConfig("grid_search needs n_per_axis >= 2");
    const double step = 2.0 * sc.bounds_half / static_cast<double>(n_per_axis);
    if (norm_inf(phase) > 0.5 * step + 1e-12)
        throw InvalidConfig("grid phase exceeds half a grid step");
    const double base = -sc.bounds_half + 0.5 * step;

    std::uint64_t node_stream = derive_seed(seed, seed_tag::grid_node);
    Vec3 best{};
    double best_cost = 0.0;
    bool first = true;
    std::uint64_t flat = 0;
    for (int ix = 0; ix < n_per_axis; ++ix) {
        for (int iy = 0; iy < n_per_axis; ++iy) {
            for (int iz = 0; iz < n_per_axis; ++iz, ++flat) {
                Vec3 v{base + ix * step + phase.x, base + iy * step + phase.y,
                       base + iz * step + phase.z};
                double cost = 0.0;
                for (int b = 0; b < 3; ++b) {
                    cost += correlation_signal(sc, b + 1, v, derive_seed(node_stream, 3 * flat + b));
                    if (audit) ++*audit;
                }
                if (first || cost < best_cost) {
                    first = false;
                    best_cost = cost;
                    best = v;
                }
            }
        }
    }
    return best;
}

// Repeats the predictor against the fixed scenario with per-trial seeds
// base_seed + j. Any trial error propagates; a tally that disagrees with the
// declared cost aborts the estimate.
inline SigmaEstimate estimate_sigma(const Predictor& predictor, const TrapScenario& scenario,
                                    int n_trials, std::uint64_t base_seed) {
    if (n_trials < 2) throw InvalidConfig("estimate_sigma needs n_trials >= 2");
    if (!predictor.predict) throw InvalidConfig("predictor has no callable");

    std::vector<Vec3> predictions;
    predictions.reserve(static_cast<std::size_t>(n_trials));
    for (int j = 0; j < n_trials; ++j) {
        std::uint64_t audit = 0;
        Vec3 x = predictor.predict(scenario, base_seed + static_cast<std::uint64_t>(j), audit);
        if (audit != predictor.n_measurements)
            throw AuditMismatch(predictor.name + " consumed " + std::to_string(audit) +
                                " measurements but declared " +
                                std::to_string(predictor.n_measurements));
        predictions.push_back(x);
    }

    Vec3 mean{};
    for (Vec3 x : predictions) mean += x;
    mean = mean / static_cast<double>(n_trials);

    double acc = 0.0;
    for (Vec3 x : predictions) {
        Vec3 d = x - mean;
        acc += dot(d, d);
    }
    SigmaEstimate est;
    est.sigma = std::sqrt(acc / static_cast<double>(n_trials));
    est.n_trials = n_trials;
    est.mean_prediction = mean;

    int inside = 0;
    for (Vec3 x : predictions)
        if (norm(x - scenario.truth) <= est.sigma) ++inside;
    est.containment_68 = static_cast<double>(inside) / static_cast<double>(n_trials);
    return est;
}

// Each predictor's sigma is the repeatability of that method's own
// procedure against one noise manifestation. The exploratory plane scan
// redraws its scan lines on every repetition (a lab re-mapping the planes
// sets its lines up afresh each time), so its sigma includes scan-placement
// variation. The reduced methods are standardized probes: every repetition
// re-measures the same template lines, so their sigma isolates measurement
// noise — which is the whole point of a fixed cheap probe.

// Fresh plane-model predictor: points_per_beam fresh points per beam, three
// plane fits, one intersection. Costs 3 * points_per_beam.
inline Predictor make_planes_predictor(int points_per_beam) {
    if (points_per_beam < 3)
        throw InvalidConfig("plane fitting needs at least 3 points per beam");
    Predictor p;
    p.name = "planes";
    p.n_measurements = 3 * static_cast<std::uint64_t>(points_per_beam);
    p.predict = [points_per_beam](const TrapScenario& sc, std::uint64_t seed,
                                  std::uint64_t& audit) {
        CompensationRun probe = generate_compensation_run(sc, points_per_beam, seed);
        audit += probe.points.size();
        std::array<std::vector<Vec3>, 3> by_beam;
        for (const PlanePoint& pt : probe.points)
            by_beam[static_cast<std::size_t>(pt.beam_id - 1)].push_back(pt.point);
        std::array<Plane, 3> fitted;
        for (int b = 0; b < 3; ++b)
            fitted[static_cast<std::size_t>(b)] = fit_plane(by_beam[static_cast<std::size_t>(b)]);
        return intersect_planes(fitted[0], fitted[1], fitted[2]);
    };
    return p;
}

// Reduced-measurement predictor: one template point per beam denoised by the
// offset model. Costs exactly 3 (one per beam).
inline Predictor make_pca_predictor(const OffsetPcaModel& model, const ScanTemplate& tpl,
                                    std::uint64_t training_measurements = 0) {
    for (const auto& beam_origins : tpl.origins)
        if (beam_origins.empty()) throw InvalidConfig("scan template has no origins");
    Predictor p;
    p.name = "pca";
    p.n_measurements = 3;
    p.amortized_training_measurements = training_measurements;
    p.predict = [model, tpl](const TrapScenario& sc, std::uint64_t seed, std::uint64_t& audit) {
        std::vector<PlanePoint> pts;
        pts.reserve(3);
        for (int b = 0; b < 3; ++b) {
            ScanLine line{tpl.origins[b][0], sc.beams[b]};
            pts.push_back(
                measure_plane_point(sc, b + 1, line, detail::measurement_seed(seed, b, 0)));
            ++audit;
        }
        return predict_pca(model, pts);
    };
    return p;
}

// Nine-input network predictor: one template point per beam. Costs 3.
inline Predictor make_ann9_predictor(const MlpNetwork& net, const ScanTemplate& tpl,
                                     std::uint64_t training_measurements = 0) {
    if (net.encoding != kNinePointEncoding)
        throw EncodingMismatch("ann9 predictor needs a nine_point network");
    for (const auto& beam_origins : tpl.origins)
        if (beam_origins.empty()) throw InvalidConfig("scan template has no origins");
    Predictor p;
    p.name = "ann9";
    p.n_measurements = 3;
    p.amortized_training_measurements = training_measurements;
    p.predict = [net, tpl](const TrapScenario& sc, std::uint64_t seed, std::uint64_t& audit) {
        std::vector<PlanePoint> pts;
        pts.reserve(3);
        for (int b = 0; b < 3; ++b) {
            ScanLine line{tpl.origins[b][0], sc.beams[b]};
            pts.push_back(
                measure_plane_point(sc, b + 1, line, detail::measurement_seed(seed, b, 0)));
            ++audit;
        }
        return predict_ann(net, pts);
    };
    return p;
}

// Four-input network predictor: a single point on one beam. The probed beam
// rotates with the trial seed so the estimate covers all three; the audited
// cost is exactly 1.
inline Predictor make_ann4_predictor(const MlpNetwork& net, const ScanTemplate& tpl,
                                     std::uint64_t training_measurements = 0) {
    if (net.encoding != kFourPointEncoding)
        throw EncodingMismatch("ann4 predictor needs a four_point network");
    for (const auto& beam_origins : tpl.origins)
        if (beam_origins.empty()) throw InvalidConfig("scan template has no origins");
    Predictor p;
    p.name = "ann4";
    p.n_measurements = 1;
    p.amortized_training_measurements = training_measurements;
    p.predict = [net, tpl](const TrapScenario& sc, std::uint64_t seed, std::uint64_t& audit) {
        int b = static_cast<int>(seed % 3);
        ScanLine line{tpl.origins[b][0], sc.beams[b]};
        PlanePoint pt =
            measure_plane_point(sc, b + 1, line, detail::measurement_seed(seed, b, 0));
        ++audit;
        return predict_ann(net, {pt});
    };
    return p;
}

// Grid-search predictor with a seed-derived random phase (unbiased w.r.t.
// grid placement). Costs 3 n^3.
inline Predictor make_grid_predictor(int n_per_axis) {
    if (n_per_axis < 2) throw InvalidConfig("grid predictor needs n_per_axis >= 2");
    Predictor p;
    p.name = "grid";
    std::uint64_t n = static_cast<std::uint64_t>(n_per_axis);
    p.n_measurements = 3 * n * n * n;
    p.predict = [n_per_axis](const TrapScenario& sc, std::uint64_t seed, std::uint64_t& audit) {
        double step = 2.0 * sc.bounds_half / static_cast<double>(n_per_axis);
        Rng phase_rng(derive_seed(seed, seed_tag::grid_phase));
        Vec3 phase = phase_rng.uniform3(-0.5 * step, 0.5 * step);
        return grid_search(sc, n_per_axis, seed, phase, &audit);
    };
    return p;
}

// One (method, budget) request inside a benchmark schedule.
struct MethodSpec {
    std::string method;      // grid | planes | pca | ann9 | ann4
    int points_per_beam = 8;  // planes only
    int n_per_axis = 3;       // grid only
};

// Everything run_scaling_benchmark needs: the scenario family, the method
// schedule, the training-run protocol and the network hyperparameters.
struct BenchmarkConfig {
    ScenarioConfig scenario;
    std::vector<MethodSpec> methods;
    int n_trials = 500;
    std::vector<int> run_schedule{7, 7, 7, 7, 6, 6, 6};  // points per beam, per training run
    int pca_components = 1;
    Hyperparams ann;
    int ann9_epochs = 25;
    int ann4_epochs = 120;
};

// All one-point-per-beam combinations within each run, encoded as 9-vectors
// labelled with the run's true compensation point.
inline TrainingSet build_nine_point_training(const std::vector<CompensationRun>& runs) {
    TrainingSet ts;
    ts.encoding = kNinePointEncoding;
    for (const CompensationRun& run : runs) {
        std::array<std::vector<Vec3>, 3> by_beam;
        for (const PlanePoint& p : run.points) {
            validate_beam_id(p.beam_id);
            by_beam[p.beam_id - 1].push_back(p.point);
        }
        for (Vec3 p1 : by_beam[0]) {
            for (Vec3 p2 : by_beam[1]) {
                for (Vec3 p3 : by_beam[2]) {
                    ts.examples.push_back(
                        {{p1.x, p1.y, p1.z, p2.x, p2.y, p2.z, p3.x, p3.y, p3.z}, run.truth});
                }
            }
        }
    }
    return ts;
}

// Every measured point becomes one 4-input example.
inline TrainingSet build_four_point_training(const std::vector<CompensationRun>& runs) {
    TrainingSet ts;
    ts.encoding = kFourPointEncoding;
    for (const CompensationRun& run : runs) {
        for (const PlanePoint& p : run.points)
            ts.examples.push_back({encode_four(p), run.truth});
    }
    return ts;
}

namespace detail {

struct BenchmarkFamily {
    std::vector<CompensationRun> runs;  // the historical training runs
    TrapScenario eval_scenario;         // fresh manifestation all methods predict against
    ScanTemplate tpl;                   // the standard scan protocol every trial re-runs
    std::uint64_t total_run_points = 0;
};

inline BenchmarkFamily build_benchmark_family(const BenchmarkConfig& cfg,
                                              std::uint64_t base_seed) {
    if (cfg.run_schedule.empty()) throw ConfigError("benchmark run_schedule is empty");
    for (int ppb : cfg.run_schedule)
        if (ppb < 3) throw ConfigError("benchmark runs need at least 3 points per beam");

    BenchmarkFamily fam;
    std::uint64_t scenario_stream = derive_seed(base_seed, seed_tag::train_scenario);
    std::uint64_t run_stream = derive_seed(base_seed, seed_tag::train_run);
    for (std::size_t i = 0; i < cfg.run_schedule.size(); ++i) {
        TrapScenario sc = sample_scenario(cfg.scenario, derive_seed(scenario_stream, i));
        CompensationRun run =
            generate_compensation_run(sc, cfg.run_schedule[i], derive_seed(run_stream, i),
                                      nullptr, "run-" + std::to_string(i));
        fam.total_run_points += run.points.size();
        fam.runs.push_back(std::move(run));
    }

    fam.eval_scenario = sample_scenario(cfg.scenario, derive_seed(base_seed, seed_tag::eval_scenario));
    fam.tpl = make_scan_template(cfg.scenario, derive_seed(base_seed, seed_tag::scan_template));
    return fam;
}

}  // namespace detail

// Runs the full method-by-budget comparison for one scenario family seeded
// by base_seed: generates the historical runs (each scanned along its own
// fresh lines), trains the learned predictors (the networks hold out one
// run, chosen by base_seed % runs), and estimates every method's sigma
// against the same fresh noise manifestation — plane scans redrawn per
// trial, reduced-method probes re-measured on the family's template lines.
inline std::vector<ScalingPoint> run_scaling_benchmark(const BenchmarkConfig& cfg,
                                                       std::uint64_t base_seed) {
    if (cfg.methods.empty()) throw ConfigError("benchmark method schedule is empty");
    if (cfg.n_trials < 2) throw ConfigError("benchmark needs n_trials >= 2");
    for (const MethodSpec& m : cfg.methods) {
        if (m.method != "grid" && m.method != "planes" && m.method != "pca" &&
            m.method != "ann9" && m.method != "ann4")
            throw ConfigError("unknown method '" + m.method + "' in benchmark schedule");
    }

    detail::BenchmarkFamily fam = detail::build_benchmark_family(cfg, base_seed);

    bool needs_pca = false, needs_ann9 = false, needs_ann4 = false;
    for (const MethodSpec& m : cfg.methods) {
        needs_pca |= m.method == "pca";
        needs_ann9 |= m.method == "ann9";
        needs_ann4 |= m.method == "ann4";
    }

    OffsetPcaModel pca_model;
    if (needs_pca) pca_model = fit_offset_model(fam.runs, cfg.pca_components);

    // Networks train on all runs but one; the held-out index rotates with
    // the family seed so no single run is privileged across seeds.
    std::vector<CompensationRun> held_in;
    std::uint64_t held_in_points = 0;
    if (needs_ann9 || needs_ann4) {
        std::size_t fold = static_cast<std::size_t>(base_seed % fam.runs.size());
        for (std::size_t i = 0; i < fam.runs.size(); ++i)
            if (i != fold) held_in.push_back(fam.runs[i]);
        for (const CompensationRun& run : held_in) held_in_points += run.points.size();
    }

    MlpNetwork ann9_net, ann4_net;
    if (needs_ann9) {
        Hyperparams hyper = cfg.ann;
        hyper.epochs = cfg.ann9_epochs;
        ann9_net = train(build_nine_point_training(held_in), hyper,
                         derive_seed(base_seed, seed_tag::ann9_init))
                       .net;
    }
    if (needs_ann4) {
        Hyperparams hyper = cfg.ann;
        hyper.epochs = cfg.ann4_epochs;
        ann4_net = train(build_four_point_training(held_in), hyper,
                         derive_seed(base_seed, seed_tag::ann4_init))
                       .net;
    }

    std::vector<ScalingPoint> points;
    std::uint64_t trial_stream = derive_seed(base_seed, seed_tag::method_trials);
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const MethodSpec& m = cfg.methods[mi];
        Predictor pred;
        if (m.method == "grid") {
            pred = make_grid_predictor(m.n_per_axis);
        } else if (m.method == "planes") {
            pred = make_planes_predictor(m.points_per_beam);
        } else if (m.method == "pca") {
            pred = make_pca_predictor(pca_model, fam.tpl, fam.total_run_points);
        } else if (m.method == "ann9") {
            pred = make_ann9_predictor(ann9_net, fam.tpl, held_in_points);
        } else {
            pred = make_ann4_predictor(ann4_net, fam.tpl, held_in_points);
        }

        SigmaEstimate est =
            estimate_sigma(pred, fam.eval_scenario, cfg.n_trials, derive_seed(trial_stream, mi));

        ScalingPoint sp;
        sp.method = m.method;
        sp.n_measurements = pred.n_measurements;
        sp.amortized_training_measurements = pred.amortized_training_measurements;
        sp.sigma = est.sigma;
        sp.containment_68 = est.containment_68;
        sp.n_trials = est.n_trials;
        sp.seed = base_seed;
        points.push_back(std::move(sp));
    }
    return points;
}

}  // namespace fieldcomp
