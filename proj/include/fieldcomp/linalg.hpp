#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "fieldcomp/errors.hpp"
#include "fieldcomp/vec3.hpp"

namespace fieldcomp {

// Eigen-decomposition of a small dense symmetric matrix.
struct EigenDecomposition {
    std::vector<double> values;                // sorted descending
    std::vector<std::vector<double>> vectors;  // vectors[k] belongs to values[k]; unit length
};

namespace detail {

inline double off_diagonal_norm(const std::vector<std::vector<double>>& a) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j)
            if (i != j) s += a[i][j] * a[i][j];
    return std::sqrt(s);
}

inline double frobenius(const std::vector<std::vector<double>>& a) {
    double s = 0;
    for (const auto& row : a)
        for (double v : row) s += v * v;
    return std::sqrt(s);
}

}  // namespace detail

// Cyclic Jacobi rotations on a symmetric matrix, iterated until the
// off-diagonal norm drops below tol * max(1, ||A||_F). The relative floor
// keeps the absolute 1e-12 target meaningful for matrices of any scale
// (double precision cannot reach absolute 1e-12 when entries are ~1e5).
inline EigenDecomposition jacobi_eigen(std::vector<std::vector<double>> a, double tol = 1e-12) {
    const std::size_t d = a.size();
    if (d == 0) throw ShapeMismatch("jacobi_eigen needs a non-empty matrix");
    for (const auto& row : a)
        if (row.size() != d) throw ShapeMismatch("jacobi_eigen needs a square matrix");
    const double sym_tol = 1e-12 * std::max(1.0, detail::frobenius(a));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            if (std::abs(a[i][j] - a[j][i]) > sym_tol)
                throw ShapeMismatch("jacobi_eigen needs a symmetric matrix");
    std::vector<std::vector<double>> v(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) v[i][i] = 1.0;

    const double threshold = tol * std::max(1.0, detail::frobenius(a));
    if (d > 1) {
        constexpr int max_sweeps = 100;
        int sweep = 0;
        while (detail::off_diagonal_norm(a) >= threshold) {
            if (++sweep > max_sweeps)
                throw NumericalError("jacobi_eigen failed to converge");
            for (std::size_t p = 0; p + 1 < d; ++p) {
                for (std::size_t q = p + 1; q < d; ++q) {
                    double apq = a[p][q];
                    if (apq == 0.0) continue;
                    double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                    double t = (theta >= 0 ? 1.0 : -1.0) /
                               (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    double c = 1.0 / std::sqrt(t * t + 1.0);
                    double s = t * c;
                    // Rotate rows/columns p and q of A.
                    for (std::size_t k = 0; k < d; ++k) {
                        double akp = a[k][p], akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for (std::size_t k = 0; k < d; ++k) {
                        double apk = a[p][k], aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    // Accumulate the rotation into the eigenvector basis.
                    for (std::size_t k = 0; k < d; ++k) {
                        double vkp = v[k][p], vkq = v[k][q];
                        v[k][p] = c * vkp - s * vkq;
                        v[k][q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a[i][i] > a[j][j]; });

    EigenDecomposition out;
    out.values.reserve(d);
    out.vectors.reserve(d);
    for (std::size_t k : order) {
        out.values.push_back(a[k][k]);
        std::vector<double> col(d);
        for (std::size_t i = 0; i < d; ++i) col[i] = v[i][k];
        out.vectors.push_back(std::move(col));
    }
    return out;
}

// Flips the vector so its first component larger than 1e-9 in magnitude is
// positive; resolves the +/- ambiguity of eigenvectors and plane normals.
// The threshold ignores roundoff-level entries so noise cannot flip signs.
inline void canonicalize_sign(std::vector<double>& v) {
    for (double c : v) {
        if (std::abs(c) > 1e-9) {
            if (c < 0)
                for (double& e : v) e = -e;
            return;
        }
    }
}

inline Vec3 canonicalize_sign(Vec3 v) {
    for (int i = 0; i < 3; ++i) {
        if (std::abs(v[i]) > 1e-9) return v[i] < 0 ? -v : v;
    }
    return v;
}

namespace detail {

// Gaussian elimination with partial pivoting for a 3x3 system.
inline Vec3 gauss_solve3(Mat3 a, Vec3 b) {
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (std::abs(a(pivot, col)) < 1e-300)
            throw NumericalError("singular system in gauss_solve3");
        if (pivot != col) {
            std::swap(a.m[pivot], a.m[col]);
            std::swap(b[pivot], b[col]);
        }
        for (int r = col + 1; r < 3; ++r) {
            double f = a(r, col) / a(col, col);
            for (int c = col; c < 3; ++c) a(r, c) -= f * a(col, c);
            b[r] -= f * b[col];
        }
    }
    Vec3 x;
    for (int r = 2; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < 3; ++c) s -= a(r, c) * x[c];
        x[r] = s / a(r, r);
    }
    return x;
}

}  // namespace detail

// Solves A x = b by partial-pivoted elimination plus one step of iterative
// refinement (enough to push residuals to roundoff for well-conditioned A).
inline Vec3 solve3(const Mat3& a, Vec3 b) {
    Vec3 x = detail::gauss_solve3(a, b);
    Vec3 r = b - a * x;
    Vec3 dx = detail::gauss_solve3(a, r);
    return x + dx;
}

// Frobenius condition number estimate; +inf for (near-)singular input.
inline double cond_frobenius(const Mat3& a) {
    double d = std::abs(det(a));
    if (d < 1e-300) return std::numeric_limits<double>::infinity();
    return frobenius_norm(a) * frobenius_norm(inverse(a));
}

}  // namespace fieldcomp
