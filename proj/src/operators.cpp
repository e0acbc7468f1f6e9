#include "nucert/operators.hpp"

#include <string>

namespace nucert {

namespace {

const Matrix& counterexample_B() {
    static const Matrix B = (Matrix(2, 2) << 1, 1, 0, 0).finished();
    return B;
}

void check_shape(const LinearOperatorSpec& op, const Matrix& X) {
    if (X.rows() != op.n || X.cols() != op.p)
        throw std::invalid_argument("apply: matrix shape mismatch");
}

} // namespace

LinearOperatorSpec LinearOperatorSpec::dense_op(Matrix payload, Index n, Index p) {
    if (payload.cols() != n * p)
        throw std::invalid_argument("dense operator: payload must have n*p columns");
    if (payload.rows() < 1)
        throw std::invalid_argument("dense operator: m >= 1 required");
    LinearOperatorSpec op;
    op.kind = OpKind::Dense;
    op.n = n;
    op.p = p;
    op.m = payload.rows();
    op.dense = std::move(payload);
    return op;
}

LinearOperatorSpec LinearOperatorSpec::entry_mask(std::vector<std::pair<Index, Index>> indices,
                                                  Index n, Index p) {
    if (indices.empty())
        throw std::invalid_argument("entry_mask: m >= 1 required");
    for (size_t a = 0; a < indices.size(); ++a) {
        const auto [i, j] = indices[a];
        if (i < 0 || i >= n || j < 0 || j >= p)
            throw std::invalid_argument("entry_mask: index out of range");
        for (size_t b = a + 1; b < indices.size(); ++b)
            if (indices[b] == indices[a])
                throw std::invalid_argument("entry_mask: duplicate index");
    }
    LinearOperatorSpec op;
    op.kind = OpKind::EntryMask;
    op.n = n;
    op.p = p;
    op.m = static_cast<Index>(indices.size());
    op.mask = std::move(indices);
    return op;
}

LinearOperatorSpec LinearOperatorSpec::left_mul(Matrix A, Index p) {
    if (A.rows() < 1 || p < 1)
        throw std::invalid_argument("left_mul: empty operator");
    LinearOperatorSpec op;
    op.kind = OpKind::LeftMul;
    op.n = A.cols();
    op.p = p;
    op.m = A.rows() * p;
    op.left = std::move(A);
    return op;
}

LinearOperatorSpec LinearOperatorSpec::counterexample() {
    LinearOperatorSpec op;
    op.kind = OpKind::Counterexample;
    op.n = 2;
    op.p = 2;
    op.m = 8;
    return op;
}

LinearOperatorSpec LinearOperatorSpec::stacked(std::vector<LinearOperatorSpec> parts) {
    if (parts.empty())
        throw std::invalid_argument("stacked: needs at least one part");
    LinearOperatorSpec op;
    op.kind = OpKind::Stacked;
    op.n = parts.front().n;
    op.p = parts.front().p;
    op.m = 0;
    for (const auto& part : parts) {
        if (part.n != op.n || part.p != op.p)
            throw std::invalid_argument("stacked: parts must share the domain shape");
        op.m += part.m;
    }
    op.parts = std::move(parts);
    return op;
}

Vector apply(const LinearOperatorSpec& op, const Matrix& X) {
    check_shape(op, X);
    require_finite(X, "apply");
    switch (op.kind) {
    case OpKind::Dense:
        return op.dense * vec_rm(X);
    case OpKind::EntryMask: {
        Vector y(op.m);
        for (Index k = 0; k < op.m; ++k) {
            const auto [i, j] = op.mask[static_cast<size_t>(k)];
            y[k] = X(i, j);
        }
        return y;
    }
    case OpKind::LeftMul:
        return vec_rm(op.left * X);
    case OpKind::Counterexample: {
        Vector y(8);
        y.head(4) = vec_rm(counterexample_B() * X);
        y.tail(4) = vec_rm(skew_part(X));
        return y;
    }
    case OpKind::Stacked: {
        Vector y(op.m);
        Index off = 0;
        for (const auto& part : op.parts) {
            y.segment(off, part.m) = apply(part, X);
            off += part.m;
        }
        return y;
    }
    }
    throw std::logic_error("apply: unknown kind");
}

Matrix adjoint(const LinearOperatorSpec& op, const Vector& y) {
    if (y.size() != op.m)
        throw std::invalid_argument("adjoint: vector length mismatch");
    require_finite(y, "adjoint");
    switch (op.kind) {
    case OpKind::Dense:
        return unvec_rm(op.dense.transpose() * y, op.n, op.p);
    case OpKind::EntryMask: {
        Matrix X = Matrix::Zero(op.n, op.p);
        for (Index k = 0; k < op.m; ++k) {
            const auto [i, j] = op.mask[static_cast<size_t>(k)];
            X(i, j) = y[k];
        }
        return X;
    }
    case OpKind::LeftMul:
        return op.left.transpose() * unvec_rm(y, op.left.rows(), op.p);
    case OpKind::Counterexample: {
        const Matrix Y = unvec_rm(y.head(4), 2, 2);
        const Matrix Z = unvec_rm(y.tail(4), 2, 2);
        return counterexample_B().transpose() * Y + skew_part(Z);
    }
    case OpKind::Stacked: {
        Matrix X = Matrix::Zero(op.n, op.p);
        Index off = 0;
        for (const auto& part : op.parts) {
            X += adjoint(part, y.segment(off, part.m));
            off += part.m;
        }
        return X;
    }
    }
    throw std::logic_error("adjoint: unknown kind");
}

Matrix matricize(const LinearOperatorSpec& op) {
    if (op.kind == OpKind::Dense) return op.dense;
    Matrix M(op.m, op.n * op.p);
    Matrix E = Matrix::Zero(op.n, op.p);
    for (Index i = 0; i < op.n; ++i)
        for (Index j = 0; j < op.p; ++j) {
            E(i, j) = 1.0;
            M.col(i * op.p + j) = apply(op, E);
            E(i, j) = 0.0;
        }
    return M;
}

namespace {

// Kernel and adjoint-range bases from one factorization of the
// matricization, cutoff 1e-10 * sigma_max.
struct OperatorBases {
    std::vector<Matrix> kernel;
    std::vector<Matrix> range_adjoint;
};

OperatorBases compute_bases(const LinearOperatorSpec& op) {
    const Matrix M = matricize(op);
    const Index np = op.n * op.p;
    SvdOptions opts;
    opts.rank_tol = 1e-10;

    // Columns of the domain-side orthogonal factor: first r span rge A*,
    // the rest span ker A.
    Matrix domain_frame;
    Index rank;
    if (M.rows() >= np) {
        SvdFactors f = svd(M, opts);
        domain_frame = f.V;
        rank = f.rank;
    } else {
        SvdFactors f = svd(M.transpose(), opts);
        domain_frame = f.U;
        rank = f.rank;
    }

    OperatorBases out;
    for (Index k = 0; k < rank; ++k)
        out.range_adjoint.push_back(unvec_rm(domain_frame.col(k), op.n, op.p));
    for (Index k = rank; k < np; ++k)
        out.kernel.push_back(unvec_rm(domain_frame.col(k), op.n, op.p));
    return out;
}

} // namespace

std::vector<Matrix> kernel_basis(const LinearOperatorSpec& op) {
    return compute_bases(op).kernel;
}

std::vector<Matrix> range_adjoint_basis(const LinearOperatorSpec& op) {
    return compute_bases(op).range_adjoint;
}

LinearOperatorSpec lift_padded(const LinearOperatorSpec& op) {
    if (op.n < op.p) throw std::invalid_argument("lift_padded: requires n >= p");
    if (op.n == op.p) return op;
    const Index n = op.n, p = op.p;
    switch (op.kind) {
    case OpKind::Dense: {
        Matrix payload = Matrix::Zero(op.m, n * n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p; ++j)
                payload.col(i * n + j) = op.dense.col(i * p + j);
        return LinearOperatorSpec::dense_op(std::move(payload), n, n);
    }
    case OpKind::EntryMask:
        return LinearOperatorSpec::entry_mask(op.mask, n, n);
    case OpKind::LeftMul:
        return LinearOperatorSpec::left_mul(op.left, n);
    case OpKind::Counterexample:
        return op; // already square
    case OpKind::Stacked: {
        std::vector<LinearOperatorSpec> lifted;
        lifted.reserve(op.parts.size());
        for (const auto& part : op.parts) lifted.push_back(lift_padded(part));
        return LinearOperatorSpec::stacked(std::move(lifted));
    }
    }
    throw std::logic_error("lift_padded: unknown kind");
}

namespace {

Vector lift_rhs(const LinearOperatorSpec& op, const Vector& b) {
    if (op.n == op.p) return b;
    switch (op.kind) {
    case OpKind::Dense:
    case OpKind::EntryMask:
    case OpKind::Counterexample:
        return b;
    case OpKind::LeftMul: {
        const Index q = op.left.rows();
        const Matrix B = unvec_rm(b, q, op.p);
        Matrix padded = Matrix::Zero(q, op.n);
        padded.leftCols(op.p) = B;
        return vec_rm(padded);
    }
    case OpKind::Stacked: {
        std::vector<Vector> segs;
        Index off = 0, total = 0;
        for (const auto& part : op.parts) {
            segs.push_back(lift_rhs(part, b.segment(off, part.m)));
            total += segs.back().size();
            off += part.m;
        }
        Vector out(total);
        Index o = 0;
        for (const auto& s : segs) {
            out.segment(o, s.size()) = s;
            o += s.size();
        }
        return out;
    }
    }
    throw std::logic_error("lift_rhs: unknown kind");
}

} // namespace

ProblemInstance lift_padded(const ProblemInstance& inst) {
    ProblemInstance out;
    out.op = lift_padded(inst.op);
    out.b = lift_rhs(inst.op, inst.b);
    out.lambda = inst.lambda;
    if (out.b.size() != out.op.m)
        throw std::logic_error("lift_padded: rhs/codomain mismatch");
    return out;
}

} // namespace nucert
