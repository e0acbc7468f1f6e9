#pragma once

#include "nucert/linalg.hpp"

#include <optional>

namespace nucert {

/// Frame (U, V, r, sigma) of a base point; the subdifferential of the
/// nuclear norm at the base point is U * {blkdiag(I_r, R) : ||R||_op <= 1} * V^T.
struct SubdiffFrame {
    Matrix U;       // n x n
    Matrix V;       // p x p
    Vector sigma;   // length p
    Index rank = 0;

    static SubdiffFrame from(const Matrix& X, const SvdOptions& opts = {});

    Index n() const { return U.rows(); }
    Index p() const { return V.rows(); }
    Matrix base_point() const;
    double nuclear() const { return sigma.sum(); }
};

/// Stiefel factor with X * U^T positive semidefinite, built from the polar
/// decomposition of the zero-padded square matrix. Requires n >= p.
Matrix polarize(const Matrix& X);

/// Nearest matrix with orthonormal columns (same computation as polarize).
Matrix stiefel_project(const Matrix& A);

/// True iff X * U^T is symmetric within tol and has min eigenvalue >= -tol.
/// Throws if U is not Stiefel.
bool is_polarizer(const Matrix& X, const Matrix& U, double tol);

struct SubgradVerdict {
    bool member = false;
    bool ri_member = false;
};

/// Membership of Y in the subdifferential at the frame's base point, and in
/// its relative interior (block test in the frame coordinates).
SubgradVerdict subgrad_check(const SubdiffFrame& frame, const Matrix& X,
                             const Matrix& Y, double tol);

/// Orthonormal basis {u_i v_j^T : i > r, j > r} of the parallel subspace of
/// the subdifferential; size (n - r) * (p - r).
std::vector<Matrix> parallel_basis(const SubdiffFrame& frame);

/// True iff the nuclear norm is constant on the segment [X1, X2]. Decided
/// by norm equality at the endpoints and the midpoint; convexity forces
/// constancy in between.
bool is_flat_segment(const Matrix& X1, const Matrix& X2, double tol);

/// A single Stiefel U polarizing both inputs, when the pair (normalized to
/// unit nuclear norm) spans a flat segment; nothing otherwise.
std::optional<Matrix> common_polarizer(const Matrix& X1, const Matrix& X2, double tol);

} // namespace nucert
