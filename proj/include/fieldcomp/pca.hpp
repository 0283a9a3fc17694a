#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fieldcomp/errors.hpp"
#include "fieldcomp/geometry.hpp"
#include "fieldcomp/linalg.hpp"
#include "fieldcomp/simulator.hpp"
#include "fieldcomp/vec3.hpp"

namespace fieldcomp {

// Principal components of a dataset: orthonormal directions sorted by
// explained variance (descending), with canonical component signs.
struct PcaModel {
    std::vector<double> mean;                    // length d
    std::vector<std::vector<double>> components;  // components[k]: length d, unit
    std::vector<double> explained_variance;      // non-increasing, >= 0
    std::vector<double> explained_ratio;         // sums to 1
};

// Learned reduced-measurement predictor: per-beam plane normals frozen from
// historical runs plus the principal components of the runs' plane-offset
// 3-vectors.
struct OffsetPcaModel {
    std::array<Vec3, 3> normals;  // unit, canonical orientation
    PcaModel offset_pca;          // over offset vectors (d_1, d_2, d_3)
    int n_components_retained = 1;
    std::vector<std::string> run_ids;  // training provenance
};

// PCA via the sample covariance (divisor n-1) and the cyclic Jacobi
// eigensolver. Components are sign-canonicalized so the decomposition is
// unique. For zero-variance data the ratio convention is (1, 0, ...) so the
// sum-to-one invariant holds degenerately.
inline PcaModel fit_pca(const std::vector<std::vector<double>>& data) {
    const std::size_t n = data.size();
    if (n < 2)
        throw TooFewSamples("fit_pca needs at least 2 samples, got " + std::to_string(n));
    const std::size_t d = data[0].size();
    if (d < 1) throw TooFewSamples("fit_pca needs at least 1 dimension");
    for (const auto& row : data) {
        if (row.size() != d) throw DimensionMismatch("fit_pca rows have inconsistent lengths");
        for (double v : row)
            if (!std::isfinite(v)) throw NonFiniteData("fit_pca received a non-finite value");
    }

    PcaModel model;
    model.mean.assign(d, 0.0);
    for (const auto& row : data)
        for (std::size_t j = 0; j < d; ++j) model.mean[j] += row[j];
    for (double& m : model.mean) m /= static_cast<double>(n);

    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& row : data) {
        for (std::size_t i = 0; i < d; ++i) {
            double ci = row[i] - model.mean[i];
            for (std::size_t j = 0; j < d; ++j) cov[i][j] += ci * (row[j] - model.mean[j]);
        }
    }
    for (auto& r : cov)
        for (double& v : r) v /= static_cast<double>(n - 1);

    EigenDecomposition eig = jacobi_eigen(cov);
    model.components.reserve(d);
    model.explained_variance.reserve(d);
    double total = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<double> comp = eig.vectors[k];
        canonicalize_sign(comp);
        model.components.push_back(std::move(comp));
        double lambda = std::max(eig.values[k], 0.0);  // clamp eigensolver roundoff
        model.explained_variance.push_back(lambda);
        total += lambda;
    }
    model.explained_ratio.assign(d, 0.0);
    if (total > 0.0) {
        for (std::size_t k = 0; k < d; ++k)
            model.explained_ratio[k] = model.explained_variance[k] / total;
    } else {
        model.explained_ratio[0] = 1.0;
    }
    return model;
}

namespace detail {

// Groups a run's points by beam id (index 0..2), preserving order.
inline std::array<std::vector<Vec3>, 3> points_by_beam(const CompensationRun& run) {
    std::array<std::vector<Vec3>, 3> grouped;
    for (const PlanePoint& p : run.points) {
        validate_beam_id(p.beam_id);
        grouped[p.beam_id - 1].push_back(p.point);
    }
    return grouped;
}

}  // namespace detail

// Learns the reduced-measurement model from historical runs: per beam, one
// plane per run is fitted and the canonical normals are averaged and
// renormalized into a frozen normal; per run, the offset 3-vector under the
// frozen normals is computed; PCA over those offset vectors captures how the
// disturbance moves the planes together.
inline OffsetPcaModel fit_offset_model(const std::vector<CompensationRun>& runs,
                                       int n_components = 1) {
    if (runs.size() < 2)
        throw InsufficientRuns("fit_offset_model needs at least 2 runs, got " +
                               std::to_string(runs.size()));
    if (n_components < 1 || n_components > 3)
        throw InvalidConfig("n_components must be 1, 2 or 3");

    const std::size_t n_runs = runs.size();
    std::vector<std::array<std::vector<Vec3>, 3>> grouped;
    grouped.reserve(n_runs);
    for (const CompensationRun& run : runs) grouped.push_back(detail::points_by_beam(run));

    OffsetPcaModel model;
    for (int b = 0; b < 3; ++b) {
        Vec3 sum{};
        for (std::size_t r = 0; r < n_runs; ++r) {
            Plane plane = fit_plane(grouped[r][b]);  // throws FewerThanThreePoints if sparse
            sum += plane.normal;
        }
        if (norm(sum) < 1e-9)
            throw DegenerateGeometry("per-run normals for beam " + std::to_string(b + 1) +
                                     " cancel out");
        model.normals[b] = canonicalize_sign(unit(sum));
    }

    std::vector<std::vector<double>> offsets(n_runs, std::vector<double>(3, 0.0));
    for (std::size_t r = 0; r < n_runs; ++r) {
        for (int b = 0; b < 3; ++b) {
            double acc = 0.0;
            for (Vec3 p : grouped[r][b]) acc += dot(model.normals[b], p);
            offsets[r][b] = acc / static_cast<double>(grouped[r][b].size());
        }
    }

    model.offset_pca = fit_pca(offsets);
    model.n_components_retained = n_components;
    for (const CompensationRun& run : runs) model.run_ids.push_back(run.run_id);

    // The frozen normals must admit a stable intersection or the model is
    // useless for prediction; fail at fit time, not at first use.
    Mat3 nmat;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) nmat(r, c) = model.normals[r][c];
    if (!(cond_frobenius(nmat) < 1e8))
        throw NearParallelPlanes("learned plane normals are near-parallel");
    return model;
}

// Predicts the compensation point from one measured point per beam: project
// the measured offset vector onto the retained principal components
// (denoising it toward the disturbance subspace), then intersect the
// reconstructed planes.
inline Vec3 predict_pca(const OffsetPcaModel& model, const std::vector<PlanePoint>& points) {
    std::array<const PlanePoint*, 3> by_beam{};
    for (const PlanePoint& p : points) {
        validate_beam_id(p.beam_id);
        if (by_beam[p.beam_id - 1])
            throw DuplicateBeam("more than one point for beam " + std::to_string(p.beam_id));
        by_beam[p.beam_id - 1] = &p;
    }
    for (int b = 0; b < 3; ++b)
        if (!by_beam[b]) throw MissingBeam("no point for beam " + std::to_string(b + 1));

    std::array<double, 3> measured{};
    for (int b = 0; b < 3; ++b) measured[b] = dot(model.normals[b], by_beam[b]->point);

    const PcaModel& pca = model.offset_pca;
    std::array<double, 3> centered{};
    for (int b = 0; b < 3; ++b) centered[b] = measured[b] - pca.mean[b];

    std::array<double, 3> denoised{};
    for (int b = 0; b < 3; ++b) denoised[b] = pca.mean[b];
    for (int k = 0; k < model.n_components_retained; ++k) {
        const std::vector<double>& comp = pca.components[k];
        double coeff = 0.0;
        for (int b = 0; b < 3; ++b) coeff += centered[b] * comp[b];
        for (int b = 0; b < 3; ++b) denoised[b] += coeff * comp[b];
    }

    Plane p1{model.normals[0], denoised[0]};
    Plane p2{model.normals[1], denoised[1]};
    Plane p3{model.normals[2], denoised[2]};
    return intersect_planes(p1, p2, p3);
}

}  // namespace fieldcomp
