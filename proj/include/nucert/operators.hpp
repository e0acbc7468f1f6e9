#pragma once

#include "nucert/linalg.hpp"
#include "nucert/matrix.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace nucert {

enum class OpKind { Dense, EntryMask, LeftMul, Counterexample, Stacked };

/// Linear map from n-by-p matrix space to R^m with explicit forward and
/// adjoint action. The codomain is always flattened to a vector; the
/// counterexample kind packs its two 2x2 blocks row-major, first block
/// then second.
struct LinearOperatorSpec {
    OpKind kind = OpKind::Dense;
    Index n = 0, p = 0, m = 0;

    Matrix dense;                                        // Dense: m x (n*p)
    std::vector<std::pair<Index, Index>> mask;           // EntryMask, 0-based
    Matrix left;                                         // LeftMul: q x n
    std::vector<LinearOperatorSpec> parts;               // Stacked

    static LinearOperatorSpec dense_op(Matrix payload, Index n, Index p);
    static LinearOperatorSpec entry_mask(std::vector<std::pair<Index, Index>> indices,
                                         Index n, Index p);
    static LinearOperatorSpec left_mul(Matrix A, Index p);
    static LinearOperatorSpec counterexample();
    static LinearOperatorSpec stacked(std::vector<LinearOperatorSpec> parts);
};

struct ProblemInstance {
    LinearOperatorSpec op;
    Vector b;
    std::optional<double> lambda;
};

Vector apply(const LinearOperatorSpec& op, const Matrix& X);
Matrix adjoint(const LinearOperatorSpec& op, const Vector& y);

/// m x (n*p) matrix of the operator in the row-major vec convention.
Matrix matricize(const LinearOperatorSpec& op);

/// Orthonormal basis of ker A as matrices; dimension n*p - rank(A).
std::vector<Matrix> kernel_basis(const LinearOperatorSpec& op);

/// Orthonormal basis of rge A* = (ker A)^perp as matrices.
std::vector<Matrix> range_adjoint_basis(const LinearOperatorSpec& op);

/// Operator on R^{n x n} acting as the original on the first p columns.
/// Solving the padded problem and truncating reproduces the original
/// solution. Requires n >= p.
LinearOperatorSpec lift_padded(const LinearOperatorSpec& op);

/// Lift of a whole instance; pads b where the lifted codomain grows
/// (left_mul and stacked parts thereof).
ProblemInstance lift_padded(const ProblemInstance& inst);

} // namespace nucert
