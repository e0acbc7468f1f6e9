#pragma once

#include "nucert/operators.hpp"

#include <cstdint>
#include <optional>

namespace nucert {

struct SolverConfig {
    int max_iter = 5000;
    double tol_primal = 1e-8;
    double tol_dual = 1e-8;
    double penalty = 1.0;       // auto-scaled by the feasible-point norm
    std::uint64_t seed = 0;
    std::optional<Matrix> start;
    SvdOptions svd_opts{};
};

struct SolveReport {
    Matrix X;
    double nuclear_norm = 0;
    double primal_residual = 0;
    int iterations = 0;
    bool converged = false;
    double objective = 0;       // regularized mode
};

/// Singular value soft-thresholding: the minimizer of
/// tau * ||Z||_* + 0.5 * ||Z - X||^2. Accepts any shape.
Matrix prox_nuclear(const Matrix& X, double tau);

/// min ||X||_* s.t. A(X) = b via splitting between the exact affine
/// projection (pseudo-inverse of the matricization) and the nuclear prox.
SolveReport solve_affine(const LinearOperatorSpec& op, const Vector& b,
                         const SolverConfig& cfg = {});

/// min 0.5 * ||A(X) - b||^2 + lambda * ||X||_* by an accelerated proximal
/// gradient method with backtracking.
SolveReport solve_regularized(const LinearOperatorSpec& op, const Vector& b,
                              double lambda, const SolverConfig& cfg = {});

/// Distance from 0 to the sum of the nuclear-norm subdifferential at X and
/// rge A*: the optimality residual of X for the affine problem with
/// b = A(X). Zero (within 1e-8) certifies optimality.
double dual_certificate_residual(const LinearOperatorSpec& op, const Matrix& X,
                                 const SvdOptions& opts = {});

/// True iff A(.) and the nuclear norm agree pairwise across claimed
/// solutions of one regularized instance.
bool transfer_invariants(const std::vector<Matrix>& solutions,
                         const LinearOperatorSpec& op, double tol);

} // namespace nucert
