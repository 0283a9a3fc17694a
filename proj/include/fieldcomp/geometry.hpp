#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fieldcomp/errors.hpp"
#include "fieldcomp/linalg.hpp"
#include "fieldcomp/vec3.hpp"

namespace fieldcomp {

// A plane {v : normal . v = offset} in Hesse normal form. The normal has
// unit length and canonical orientation (first non-negligible component
// positive), which makes plane equality well defined.
struct Plane {
    Vec3 normal;
    double offset = 0.0;
};

// A measured minimal-signal point, tagged with the beam it belongs to.
struct PlanePoint {
    int beam_id = 0;  // in {1, 2, 3}
    Vec3 point;
};

inline void validate_beam_id(int beam_id) {
    if (beam_id < 1 || beam_id > 3)
        throw InvalidBeam("beam_id must be 1, 2 or 3; got " + std::to_string(beam_id));
}

// Builds a plane from a (not necessarily unit or canonical) normal and a
// point on the plane.
inline Plane make_plane(Vec3 normal, Vec3 point_on_plane) {
    Vec3 n = canonicalize_sign(unit(normal));
    return {n, dot(n, point_on_plane)};
}

// Signed orthogonal distance from the point to the plane.
inline double plane_residual(const Plane& plane, Vec3 point) {
    return dot(plane.normal, point) - plane.offset;
}

// Total-least-squares plane through a point cloud: the plane minimizing the
// sum of squared orthogonal distances. The normal is the eigenvector of the
// smallest eigenvalue of the centered scatter matrix.
//
// The points are pre-sorted lexicographically so the accumulation order --
// and therefore every output bit -- is independent of input permutation.
inline Plane fit_plane(std::vector<Vec3> points) {
    if (points.size() < 3)
        throw FewerThanThreePoints("fit_plane needs at least 3 points, got " +
                                   std::to_string(points.size()));
    for (Vec3 p : points)
        if (!is_finite(p)) throw NonFiniteData("fit_plane received a non-finite point");

    std::sort(points.begin(), points.end(), [](Vec3 a, Vec3 b) {
        if (a.x != b.x) return a.x < b.x;
        if (a.y != b.y) return a.y < b.y;
        return a.z < b.z;
    });

    const double n = static_cast<double>(points.size());
    Vec3 centroid{};
    for (Vec3 p : points) centroid += p;
    centroid = centroid / n;

    std::vector<std::vector<double>> scatter(3, std::vector<double>(3, 0.0));
    for (Vec3 p : points) {
        Vec3 q = p - centroid;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) scatter[r][c] += q[r] * q[c];
    }

    EigenDecomposition eig = jacobi_eigen(scatter);
    // values are descending: values[0] >= values[1] >= values[2].
    double largest = std::max(eig.values[0], 0.0);
    // Collinear or coincident points leave two near-zero scatter directions,
    // so the minimizing plane is not unique.
    if (eig.values[1] <= 1e-12 * largest)
        throw DegenerateGeometry("points are collinear or coincident");

    std::vector<double> nv = eig.vectors[2];
    canonicalize_sign(nv);
    Vec3 normal{nv[0], nv[1], nv[2]};
    normal = unit(normal);
    return {normal, dot(normal, centroid)};
}

// Intersection of three planes: the unique solution of normal_i . v =
// offset_i. Refuses ill-conditioned systems instead of returning wild
// points.
inline Vec3 intersect_planes(const Plane& p1, const Plane& p2, const Plane& p3,
                             double cond_threshold = 1e8) {
    Mat3 n;
    const Plane* planes[3] = {&p1, &p2, &p3};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) n(r, c) = planes[r]->normal[c];
    Vec3 d{p1.offset, p2.offset, p3.offset};

    double cond = cond_frobenius(n);
    if (!(cond < cond_threshold))
        throw NearParallelPlanes("plane normal matrix condition number " + std::to_string(cond) +
                                 " exceeds threshold");

    Vec3 v = solve3(n, d);
    Vec3 r = d - n * v;
    if (norm(r) >= 1e-9)
        throw NearParallelPlanes("intersection residual " + std::to_string(norm(r)) +
                                 " too large");
    return v;
}

}  // namespace fieldcomp
