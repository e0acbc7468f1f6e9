#pragma once

#include "nucert/matrix.hpp"

namespace nucert {

/// Column pair ordering of the Jacobi sweeps. Forward is the default;
/// Backward exists so callers can verify that frame-dependent results
/// (e.g. subdifferential membership with repeated singular values) do
/// not depend on the sweep order.
enum class SweepOrder { Forward, Backward };

struct SvdOptions {
    double rank_tol = 1e-9;           // relative to sigma_1
    SweepOrder sweep = SweepOrder::Forward;
};

/// Full factorization X = U * diag(sigma) * V^T for tall X (n >= p):
/// U is n-by-n orthogonal, sigma has length p (nonincreasing, >= 0),
/// V is p-by-p orthogonal. rank counts sigma[i] > rank_tol * sigma[0].
struct SvdFactors {
    Matrix U;
    Vector sigma;
    Matrix V;
    Index rank = 0;
    double rank_tol = 1e-9;

    Matrix reconstruct() const {
        const Index n = U.rows(), p = V.rows();
        Matrix S = Matrix::Zero(n, p);
        for (Index i = 0; i < p; ++i) S(i, i) = sigma[i];
        return U * S * V.transpose();
    }
};

/// One-sided Jacobi SVD with a fixed cyclic sweep order. Deterministic for
/// a fixed input and sweep order; signs normalized so each left singular
/// vector has a nonnegative first nonzero component.
/// Requires n >= p; callers transpose wide inputs first.
SvdFactors svd(const Matrix& X, const SvdOptions& opts = {});

struct Norms {
    double nuclear = 0;
    double spectral = 0;   // operator norm
    double frobenius = 0;
};

/// All three norms in one pass; accepts any shape.
Norms norms(const Matrix& X);

/// <sigma(X), sigma(Y)> - <X, Y>. Nonnegative up to roundoff; zero exactly
/// when X and Y admit a simultaneous singular value decomposition.
double von_neumann_gap(const Matrix& X, const Matrix& Y);

/// Smallest eigenvalue of (S + S^T)/2. S must be square and symmetric up
/// to 1e-8 * (1 + ||S||).
double min_eig_sym(const Matrix& S);

/// [X 0] in R^{n x n} for tall X; preserves the nuclear norm.
Matrix pad_square(const Matrix& X);

/// Largest singular value (any shape).
double op_norm(const Matrix& X);

/// Sum of singular values (any shape).
double nuclear_norm(const Matrix& X);

/// Internal: smallest eigenvalue of the symmetrized matrix, no symmetry
/// precondition (used where the defect is part of the quantity under test).
double min_eig_symmetrized(const Matrix& S);

} // namespace nucert
