#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fieldcomp/errors.hpp"
#include "fieldcomp/geometry.hpp"
#include "fieldcomp/rng.hpp"
#include "fieldcomp/vec3.hpp"

namespace fieldcomp {

// Describes the distribution a synthetic scenario is drawn from. The
// defaults reproduce the library's reference calibration: measurement noise
// 54 field units, run-to-run compensation spread ~600 field units with 89%
// of the disturbance variance on the first axis, and a moderately
// non-orthogonal control-to-field coupling.
struct ScenarioConfig {
    // "fixed" uses `beams` as given; "perturbed" adds a Gaussian tilt of
    // size beam_perturbation to each beam per scenario.
    std::string beam_mode = "fixed";
    std::array<Vec3, 3> beams{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
    double beam_perturbation = 0.05;

    // "fixed" uses `coupling` as given; "random" jitters each entry
    // uniformly by +/- coupling_jitter per scenario.
    std::string coupling_mode = "fixed";
    Mat3 coupling{{{{1.0, 0.35, 0.35}, {0.05, 1.0, 0.08}, {0.05, 0.08, 1.0}}}};
    double coupling_jitter = 0.05;

    // Disturbance distribution. `mean` is the family's mean compensation
    // point (control space); the stray-field fluctuation around it is an
    // anisotropic Gaussian with total std `spread` of which `dominance`
    // of the variance lies on the first field axis (the rest split evenly).
    Vec3 mean{};
    double dominance = 0.89;
    double spread = 600.0;

    double noise_sigma = 54.0;

    // Search region: the cube [-bounds_half, bounds_half]^3 in control
    // space. Scan-line origins are drawn from the centered sub-box scaled
    // by scan_fraction.
    double bounds_half = 2000.0;
    double scan_fraction = 0.5;
};

// One concrete synthetic system: a fixed disturbance ("noise manifestation")
// plus the geometry needed to simulate measurements against it.
struct TrapScenario {
    std::array<Vec3, 3> beams;
    Mat3 coupling;
    Mat3 coupling_inv;
    Vec3 stray_field;
    double noise_sigma = 0.0;
    double bounds_half = 0.0;
    double scan_fraction = 0.5;

    Vec3 truth{};                  // the true compensation point, -M^{-1} E
    std::array<Plane, 3> planes{};  // true minimal-signal plane per beam
};

struct ScanLine {
    Vec3 origin;
    Vec3 direction;
};

// Fixed set of scan-line origins shared across runs and trials of one
// scenario family; origins[b] holds the candidate origins for beam b+1.
struct ScanTemplate {
    std::array<std::vector<Vec3>, 3> origins;
};

struct RunSummary {
    double noise_sigma = 0.0;
    double bounds_half = 0.0;
};

// One noise manifestation's labelled dataset.
struct CompensationRun {
    std::string run_id;
    RunSummary scenario_summary;
    std::vector<PlanePoint> points;
    Vec3 truth;
};

// Margin keeping sampled compensation points strictly inside the bounds so
// grid search and scan lines can bracket them.
inline constexpr double kTruthMargin = 0.95;

inline void validate_scenario_config(const ScenarioConfig& cfg) {
    if (cfg.beam_mode != "fixed" && cfg.beam_mode != "perturbed")
        throw InvalidConfig("beam_mode must be 'fixed' or 'perturbed', got '" + cfg.beam_mode +
                            "'");
    if (cfg.coupling_mode != "fixed" && cfg.coupling_mode != "random")
        throw InvalidConfig("coupling_mode must be 'fixed' or 'random', got '" +
                            cfg.coupling_mode + "'");
    for (Vec3 b : cfg.beams) {
        if (!is_finite(b) || norm(b) < 1e-12) throw InvalidConfig("beam direction is degenerate");
    }
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (std::abs(dot(unit(cfg.beams[i]), unit(cfg.beams[j]))) >= 0.999)
                throw InvalidConfig("beams " + std::to_string(i + 1) + " and " +
                                    std::to_string(j + 1) + " are collinear");
    if (std::abs(det(cfg.coupling)) <= 1e-6)
        throw InvalidConfig("coupling matrix is not invertible");
    if (!(cfg.beam_perturbation >= 0)) throw InvalidConfig("beam_perturbation must be >= 0");
    if (!(cfg.coupling_jitter >= 0)) throw InvalidConfig("coupling_jitter must be >= 0");
    if (!(cfg.dominance >= 0.0 && cfg.dominance <= 1.0))
        throw InvalidConfig("dominance must lie in [0, 1]");
    if (!(cfg.spread >= 0)) throw InvalidConfig("spread must be >= 0");
    if (!(cfg.noise_sigma >= 0)) throw InvalidConfig("noise_sigma must be >= 0");
    if (!(cfg.bounds_half > 0)) throw InvalidConfig("bounds_half must be > 0");
    if (!(cfg.scan_fraction > 0 && cfg.scan_fraction <= 1))
        throw InvalidConfig("scan_fraction must lie in (0, 1]");
    if (!is_finite(cfg.mean) || norm_inf(cfg.mean) > kTruthMargin * cfg.bounds_half)
        throw InvalidConfig("mean compensation point must lie within 95% of the bounds");
}

// Draws one scenario from the family described by the config. Deterministic
// function of (config, seed). Draw order is fixed: beams, coupling, stray
// field.
inline TrapScenario sample_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
    validate_scenario_config(cfg);
    Rng rng(seed);

    TrapScenario sc;
    for (int i = 0; i < 3; ++i) {
        Vec3 b = unit(cfg.beams[i]);
        if (cfg.beam_mode == "perturbed") b = unit(b + cfg.beam_perturbation * rng.gauss3());
        sc.beams[i] = b;
    }
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (std::abs(dot(sc.beams[i], sc.beams[j])) >= 0.999)
                throw InvalidConfig("perturbed beams became collinear");

    sc.coupling = cfg.coupling;
    if (cfg.coupling_mode == "random") {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                sc.coupling(r, c) += rng.uniform(-cfg.coupling_jitter, cfg.coupling_jitter);
    }
    if (std::abs(det(sc.coupling)) <= 1e-6)
        throw InvalidConfig("sampled coupling matrix is not invertible");
    sc.coupling_inv = inverse(sc.coupling);

    // Anisotropic stray-field fluctuation: dominance of the variance on the
    // first field axis, remainder split evenly. The compensation point is
    // truth = mean - M^{-1} dE; resample until it lies inside the margin.
    Vec3 sig{std::sqrt(cfg.dominance) * cfg.spread,
             std::sqrt((1.0 - cfg.dominance) / 2.0) * cfg.spread,
             std::sqrt((1.0 - cfg.dominance) / 2.0) * cfg.spread};
    Vec3 truth;
    bool accepted = false;
    for (int attempt = 0; attempt < 100000; ++attempt) {
        Vec3 g = rng.gauss3();
        Vec3 de{g.x * sig.x, g.y * sig.y, g.z * sig.z};
        truth = cfg.mean - sc.coupling_inv * de;
        if (norm_inf(truth) <= kTruthMargin * cfg.bounds_half) {
            accepted = true;
            break;
        }
    }
    if (!accepted)
        throw InvalidConfig("stray-field distribution produces no compensation point in bounds");

    sc.truth = truth;
    sc.stray_field = -(sc.coupling * truth);
    sc.noise_sigma = cfg.noise_sigma;
    sc.bounds_half = cfg.bounds_half;
    sc.scan_fraction = cfg.scan_fraction;

    // Beam i's noiseless minimal-signal locus: b_i . (E + M v) = 0, a plane
    // with normal along M^T b_i passing through the compensation point.
    for (int i = 0; i < 3; ++i)
        sc.planes[i] = make_plane(sc.coupling.transpose() * sc.beams[i], sc.truth);
    return sc;
}

// Simulated correlation-signal reading for one beam at one control setting:
// |b_i . (E + M v)| plus Gaussian noise. The per-beam noise std is
// noise_sigma / sqrt(3) so the summed three-beam statistic used by grid
// search carries exactly noise_sigma.
inline double correlation_signal(const TrapScenario& sc, int beam_id, Vec3 control,
                                 std::uint64_t seed) {
    validate_beam_id(beam_id);
    if (norm_inf(control) > sc.bounds_half)
        throw OutOfBounds("control setting outside the sampled hypercube");
    double base = std::abs(dot(sc.beams[beam_id - 1], sc.stray_field + sc.coupling * control));
    double eta = Rng(seed).gauss() * sc.noise_sigma / std::sqrt(3.0);
    return base + eta;
}

// Locates the minimal-signal point along a scan line for one beam. The
// located point is displaced along the line by Gaussian noise with std
// noise_sigma / |n . d|, so its orthogonal distance to the true plane has
// std exactly noise_sigma.
inline PlanePoint measure_plane_point(const TrapScenario& sc, int beam_id, const ScanLine& line,
                                      std::uint64_t seed) {
    validate_beam_id(beam_id);
    const Plane& plane = sc.planes[beam_id - 1];
    Vec3 dir = unit(line.direction);
    double n_dot_d = dot(plane.normal, dir);
    if (std::abs(n_dot_d) <= 1e-6)
        throw LineParallelToPlane("scan line is parallel to beam " + std::to_string(beam_id) +
                                  "'s minimal-signal plane");
    double t = (plane.offset - dot(plane.normal, line.origin)) / n_dot_d;
    t += Rng(seed).gauss() * sc.noise_sigma / std::abs(n_dot_d);
    return {beam_id, line.origin + t * dir};
}

// Draws the reusable scan-line origins for one scenario family: per beam,
// `per_beam` points uniform in the centered sub-box given by scan_fraction.
inline ScanTemplate make_scan_template(const ScenarioConfig& cfg, std::uint64_t seed,
                                       int per_beam = 16) {
    validate_scenario_config(cfg);
    if (per_beam < 1) throw InvalidConfig("scan template needs at least one origin per beam");
    double half = cfg.scan_fraction * cfg.bounds_half;
    Rng rng(seed);
    ScanTemplate tpl;
    for (auto& beam_origins : tpl.origins) {
        beam_origins.reserve(per_beam);
        for (int j = 0; j < per_beam; ++j) beam_origins.push_back(rng.uniform3(-half, half));
    }
    return tpl;
}

namespace detail {

inline std::uint64_t measurement_seed(std::uint64_t run_seed, int beam_index, int point_index) {
    std::uint64_t stream = derive_seed(run_seed, seed_tag::measurement);
    return derive_seed(stream, (static_cast<std::uint64_t>(beam_index) << 32) |
                                   static_cast<std::uint64_t>(point_index));
}

}  // namespace detail

// Produces one labelled compensation run: points_per_beam located points per
// beam along scan lines in the beam's nominal direction, plus the true
// compensation point. When a template is supplied its first points_per_beam
// origins per beam are used (shared-geometry protocol); otherwise origins
// are drawn from the run seed.
inline CompensationRun generate_compensation_run(const TrapScenario& sc, int points_per_beam,
                                                 std::uint64_t seed,
                                                 const ScanTemplate* tpl = nullptr,
                                                 std::string run_id = "") {
    if (points_per_beam < 1) throw InvalidConfig("points_per_beam must be >= 1");
    if (tpl) {
        for (const auto& beam_origins : tpl->origins)
            if (beam_origins.size() < static_cast<std::size_t>(points_per_beam))
                throw InvalidConfig("scan template has fewer origins than points_per_beam");
    }

    CompensationRun run;
    run.run_id = run_id.empty() ? "run-" + std::to_string(seed) : std::move(run_id);
    run.scenario_summary = {sc.noise_sigma, sc.bounds_half};
    run.truth = sc.truth;
    run.points.reserve(3 * static_cast<std::size_t>(points_per_beam));

    Rng origin_rng(derive_seed(seed, seed_tag::scan_template));
    double half = sc.scan_fraction * sc.bounds_half;
    for (int b = 0; b < 3; ++b) {
        for (int j = 0; j < points_per_beam; ++j) {
            Vec3 origin = tpl ? tpl->origins[b][j] : origin_rng.uniform3(-half, half);
            ScanLine line{origin, sc.beams[b]};
            run.points.push_back(
                measure_plane_point(sc, b + 1, line, detail::measurement_seed(seed, b, j)));
        }
    }
    return run;
}

}  // namespace fieldcomp
