#include "nucert/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace nucert {

namespace {

// Givens rotation that orthogonalizes columns i and j of B (and rotates V
// alongside). Classic one-sided Jacobi update.
inline bool rotate_pair(Matrix& B, Matrix& V, Index i, Index j, double conv_tol) {
    const double a = B.col(i).squaredNorm();
    const double b = B.col(j).squaredNorm();
    const double c = B.col(i).dot(B.col(j));
    const double scale = std::sqrt(a * b);
    if (scale == 0.0 || std::abs(c) <= conv_tol * scale) return false;

    const double zeta = (b - a) / (2.0 * c);
    const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
    const double cs = 1.0 / std::sqrt(1.0 + t * t);
    const double sn = cs * t;

    const Vector bi = B.col(i), bj = B.col(j);
    B.col(i) = cs * bi - sn * bj;
    B.col(j) = sn * bi + cs * bj;
    const Vector vi = V.col(i), vj = V.col(j);
    V.col(i) = cs * vi - sn * vj;
    V.col(j) = sn * vi + cs * vj;
    return true;
}

inline void flip_sign_first_nonzero(Matrix& U, Matrix* V, Index col, Index vcol) {
    const Index n = U.rows();
    for (Index k = 0; k < n; ++k) {
        const double x = U(k, col);
        if (std::abs(x) > 1e-12) {
            if (x < 0) {
                U.col(col) = -U.col(col);
                if (V) V->col(vcol) = -V->col(vcol);
            }
            return;
        }
    }
}

} // namespace

SvdFactors svd(const Matrix& X, const SvdOptions& opts) {
    require_finite(X, "svd");
    const Index n = X.rows(), p = X.cols();
    if (n < 1 || p < 1) throw std::invalid_argument("svd: empty matrix");
    if (n < p) throw std::invalid_argument("svd: requires n >= p (transpose first)");

    Matrix B = X;
    Matrix V = Matrix::Identity(p, p);

    constexpr double conv_tol = 1e-15;
    constexpr int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        if (opts.sweep == SweepOrder::Forward) {
            for (Index i = 0; i + 1 < p; ++i)
                for (Index j = i + 1; j < p; ++j)
                    rotated |= rotate_pair(B, V, i, j, conv_tol);
        } else {
            for (Index i = p - 1; i >= 1; --i)
                for (Index j = i - 1; j >= 0; --j)
                    rotated |= rotate_pair(B, V, i, j, conv_tol);
        }
        if (!rotated) break;
    }

    Vector sig(p);
    for (Index i = 0; i < p; ++i) sig[i] = B.col(i).norm();

    // Stable sort by descending singular value.
    std::vector<Index> order(static_cast<size_t>(p));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return sig[a] > sig[b]; });

    SvdFactors f;
    f.rank_tol = opts.rank_tol;
    f.sigma.resize(p);
    f.V.resize(p, p);
    Matrix Bs(n, p);
    for (Index k = 0; k < p; ++k) {
        f.sigma[k] = sig[order[static_cast<size_t>(k)]];
        f.V.col(k) = V.col(order[static_cast<size_t>(k)]);
        Bs.col(k) = B.col(order[static_cast<size_t>(k)]);
    }

    const double smax = f.sigma.size() ? f.sigma[0] : 0.0;
    f.rank = 0;
    for (Index i = 0; i < p; ++i)
        if (f.sigma[i] > opts.rank_tol * smax && f.sigma[i] > 0.0) ++f.rank;
    if (smax == 0.0) f.rank = 0;

    // Left vectors: normalized columns where sigma is meaningfully nonzero,
    // deterministic orthonormal completion elsewhere.
    const double tiny = std::max(smax * 1e-14, 1e-300);
    Index k_good = 0;
    while (k_good < p && f.sigma[k_good] > tiny) ++k_good;

    f.U = Matrix::Zero(n, n);
    for (Index i = 0; i < k_good; ++i) f.U.col(i) = Bs.col(i) / f.sigma[i];

    if (k_good < n) {
        if (k_good == 0) {
            f.U = Matrix::Identity(n, n);
        } else {
            Eigen::HouseholderQR<Matrix> qr(f.U.leftCols(k_good));
            Matrix Q = qr.householderQ();
            f.U.rightCols(n - k_good) = Q.rightCols(n - k_good);
        }
    }

    for (Index i = 0; i < n; ++i)
        flip_sign_first_nonzero(f.U, i < p ? &f.V : nullptr, i, i);

    return f;
}

Norms norms(const Matrix& X) {
    require_finite(X, "norms");
    const Matrix T = X.rows() >= X.cols() ? X : Matrix(X.transpose());
    SvdFactors f = svd(T);
    Norms out;
    out.nuclear = f.sigma.sum();
    out.spectral = f.sigma.size() ? f.sigma[0] : 0.0;
    out.frobenius = X.norm();
    return out;
}

double op_norm(const Matrix& X) {
    const Matrix T = X.rows() >= X.cols() ? X : Matrix(X.transpose());
    if (T.cols() == 0) return 0.0;
    return svd(T).sigma[0];
}

double nuclear_norm(const Matrix& X) {
    const Matrix T = X.rows() >= X.cols() ? X : Matrix(X.transpose());
    if (T.cols() == 0) return 0.0;
    return svd(T).sigma.sum();
}

double von_neumann_gap(const Matrix& X, const Matrix& Y) {
    if (X.rows() != Y.rows() || X.cols() != Y.cols())
        throw std::invalid_argument("von_neumann_gap: shape mismatch");
    require_finite(X, "von_neumann_gap");
    require_finite(Y, "von_neumann_gap");
    const bool wide = X.rows() < X.cols();
    const Matrix Xt = wide ? Matrix(X.transpose()) : X;
    const Matrix Yt = wide ? Matrix(Y.transpose()) : Y;
    const Vector sx = svd(Xt).sigma;
    const Vector sy = svd(Yt).sigma;
    return sx.dot(sy) - inner(X, Y);
}

double min_eig_symmetrized(const Matrix& S) {
    if (S.rows() != S.cols())
        throw std::invalid_argument("min_eig_sym: non-square input");
    if (S.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym_part(S), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double min_eig_sym(const Matrix& S) {
    if (S.rows() != S.cols())
        throw std::invalid_argument("min_eig_sym: non-square input");
    require_finite(S, "min_eig_sym");
    const double defect = (S - S.transpose()).norm();
    if (defect > 1e-8 * (1.0 + S.norm()))
        throw std::invalid_argument("min_eig_sym: input not symmetric");
    return min_eig_symmetrized(S);
}

Matrix pad_square(const Matrix& X) {
    const Index n = X.rows(), p = X.cols();
    if (n < p) throw std::invalid_argument("pad_square: requires n >= p");
    Matrix P = Matrix::Zero(n, n);
    P.leftCols(p) = X;
    return P;
}

} // namespace nucert
