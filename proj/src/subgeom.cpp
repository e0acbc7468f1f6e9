#include "nucert/subgeom.hpp"

namespace nucert {

SubdiffFrame SubdiffFrame::from(const Matrix& X, const SvdOptions& opts) {
    SvdFactors f = svd(X, opts);
    SubdiffFrame frame;
    frame.U = std::move(f.U);
    frame.V = std::move(f.V);
    frame.sigma = std::move(f.sigma);
    frame.rank = f.rank;
    return frame;
}

Matrix SubdiffFrame::base_point() const {
    Matrix S = Matrix::Zero(n(), p());
    for (Index i = 0; i < p(); ++i) S(i, i) = sigma[i];
    return U * S * V.transpose();
}

Matrix polarize(const Matrix& X) {
    if (X.rows() < X.cols())
        throw std::invalid_argument("polarize: requires n >= p");
    const SvdFactors f = svd(X);
    return f.U.leftCols(X.cols()) * f.V.transpose();
}

Matrix stiefel_project(const Matrix& A) { return polarize(A); }

bool is_polarizer(const Matrix& X, const Matrix& U, double tol) {
    if (X.rows() != U.rows() || X.cols() != U.cols())
        throw std::invalid_argument("is_polarizer: shape mismatch");
    const Matrix gram_defect = U.transpose() * U - Matrix::Identity(U.cols(), U.cols());
    if (gram_defect.norm() > 1e-9 * std::max<double>(1, U.cols()))
        throw std::invalid_argument("is_polarizer: U is not Stiefel");
    const Matrix P = X * U.transpose();
    if ((P - P.transpose()).norm() > tol) return false;
    return min_eig_symmetrized(P) >= -tol;
}

SubgradVerdict subgrad_check(const SubdiffFrame& frame, const Matrix& X,
                             const Matrix& Y, double tol) {
    if (X.rows() != frame.n() || X.cols() != frame.p() ||
        Y.rows() != frame.n() || Y.cols() != frame.p())
        throw std::invalid_argument("subgrad_check: shape mismatch");

    SubgradVerdict v;
    const double nuc = frame.sigma.sum();
    v.member = inner(X, Y) >= nuc - tol && op_norm(Y) <= 1.0 + tol;
    if (!v.member) return v;

    const Index n = frame.n(), p = frame.p(), r = frame.rank;
    const Matrix G = frame.U.transpose() * Y * frame.V;
    bool ri = true;
    if (r > 0) {
        const Matrix top = G.topLeftCorner(r, r) - Matrix::Identity(r, r);
        if (top.cwiseAbs().maxCoeff() > tol) ri = false;
        if (p > r && G.topRightCorner(r, p - r).cwiseAbs().maxCoeff() > tol) ri = false;
        if (n > r && G.bottomLeftCorner(n - r, r).cwiseAbs().maxCoeff() > tol) ri = false;
    }
    if (ri && p > r) {
        const Matrix R = G.bottomRightCorner(n - r, p - r);
        if (op_norm(R) > 1.0 - tol) ri = false;
    }
    v.ri_member = ri;
    return v;
}

std::vector<Matrix> parallel_basis(const SubdiffFrame& frame) {
    std::vector<Matrix> basis;
    const Index n = frame.n(), p = frame.p(), r = frame.rank;
    basis.reserve(static_cast<size_t>((n - r) * (p - r)));
    for (Index i = r; i < n; ++i)
        for (Index j = r; j < p; ++j)
            basis.push_back(frame.U.col(i) * frame.V.col(j).transpose());
    return basis;
}

bool is_flat_segment(const Matrix& X1, const Matrix& X2, double tol) {
    if (X1.rows() != X2.rows() || X1.cols() != X2.cols())
        throw std::invalid_argument("is_flat_segment: shape mismatch");
    const double n1 = nuclear_norm(X1);
    const double n2 = nuclear_norm(X2);
    if (std::abs(n1 - n2) > tol) return false;
    const double mid = nuclear_norm(0.5 * (X1 + X2));
    return mid >= n1 - tol;
}

std::optional<Matrix> common_polarizer(const Matrix& X1, const Matrix& X2, double tol) {
    if (X1.rows() != X2.rows() || X1.cols() != X2.cols())
        throw std::invalid_argument("common_polarizer: shape mismatch");
    if (X1.rows() < X1.cols())
        throw std::invalid_argument("common_polarizer: requires n >= p");

    const double n1 = nuclear_norm(X1);
    const double n2 = nuclear_norm(X2);
    const double zero_tol = 1e-14 * (1.0 + X1.norm() + X2.norm());
    if (n1 <= zero_tol) return polarize(X2);
    if (n2 <= zero_tol) return polarize(X1);

    // Polarization is invariant under positive scaling, so decide on the
    // unit-nuclear-norm pair.
    const Matrix N1 = X1 / n1;
    const Matrix N2 = X2 / n2;
    if (!is_flat_segment(N1, N2, tol)) return std::nullopt;

    const Matrix U = polarize(0.5 * (N1 + N2));
    if (!is_polarizer(X1, U, tol) || !is_polarizer(X2, U, tol)) return std::nullopt;
    return U;
}

} // namespace nucert
