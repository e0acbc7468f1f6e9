#include "nucert/solver.hpp"

#include "nucert/rng.hpp"
#include "nucert/subgeom.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>

namespace nucert {

namespace {

// Pseudo-inverse application of the matricized operator, precomputed once
// per solve so affine projections are exact.
struct AffineProjector {
    Matrix pinv;     // (n*p) x m
    Index n, p;

    AffineProjector(const LinearOperatorSpec& op, double cutoff = 1e-12)
        : n(op.n), p(op.p) {
        const Matrix A = matricize(op);
        const bool tall = A.rows() >= A.cols();
        const SvdFactors f = svd(tall ? A : Matrix(A.transpose()),
                                 SvdOptions{cutoff, SweepOrder::Forward});
        // pinv(A) = V * diag(1/sigma) * U^T restricted to the numerical rank.
        const Index r = f.rank;
        Matrix inv = Matrix::Zero(A.cols(), A.rows());
        for (Index k = 0; k < r; ++k) {
            const Vector u = tall ? f.U.col(k) : f.V.col(k);
            const Vector v = tall ? f.V.col(k) : f.U.col(k);
            inv += (v / f.sigma[k]) * u.transpose();
        }
        pinv = std::move(inv);
    }

    Matrix project(const LinearOperatorSpec& op, const Matrix& Y, const Vector& b) const {
        const Vector residual = apply(op, Y) - b;
        return Y - unvec_rm(pinv * residual, n, p);
    }
};

Matrix initial_point(const LinearOperatorSpec& op, const SolverConfig& cfg) {
    if (cfg.start) {
        if (cfg.start->rows() != op.n || cfg.start->cols() != op.p)
            throw std::invalid_argument("solver: start shape mismatch");
        return *cfg.start;
    }
    if (cfg.seed == 0) return Matrix::Zero(op.n, op.p);
    Rng rng(cfg.seed);
    return rng.gaussian_matrix(op.n, op.p);
}

} // namespace

Matrix prox_nuclear(const Matrix& X, double tau) {
    if (tau < 0) throw std::invalid_argument("prox_nuclear: tau must be nonnegative");
    require_finite(X, "prox_nuclear");
    if (tau == 0.0) return X;
    const bool wide = X.rows() < X.cols();
    const Matrix T = wide ? Matrix(X.transpose()) : X;
    const SvdFactors f = svd(T);
    const Index n = T.rows(), p = T.cols();
    Matrix S = Matrix::Zero(n, p);
    for (Index i = 0; i < p; ++i) S(i, i) = std::max(f.sigma[i] - tau, 0.0);
    const Matrix P = f.U * S * f.V.transpose();
    return wide ? Matrix(P.transpose()) : P;
}

SolveReport solve_affine(const LinearOperatorSpec& op, const Vector& b,
                         const SolverConfig& cfg) {
    if (b.size() != op.m) throw std::invalid_argument("solve_affine: b length mismatch");
    require_finite(b, "solve_affine");

    const AffineProjector proj(op);
    const Matrix Z_feas = proj.project(op, Matrix::Zero(op.n, op.p), b);
    const double scale = std::max(1.0, Z_feas.norm());
    const double tau = cfg.penalty * std::max(1e-6, 0.25 * Z_feas.norm());

    Matrix Z = proj.project(op, initial_point(op, cfg), b);
    Matrix W = Matrix::Zero(op.n, op.p);

    SolveReport rep;
    Matrix X = Z;
    int it = 0;
    for (; it < cfg.max_iter; ++it) {
        X = prox_nuclear(Z - W, tau);
        const Matrix Z_next = proj.project(op, X + W, b);
        const double dual_gap = (Z_next - Z).norm();
        W += X - Z_next;
        Z = Z_next;
        const double split_gap = (X - Z).norm();
        if (split_gap <= cfg.tol_primal * scale && dual_gap <= cfg.tol_primal * scale) {
            ++it;
            rep.converged = true;
            break;
        }
    }

    rep.X = Z;  // affine-feasible iterate
    rep.iterations = it;
    rep.nuclear_norm = nuclear_norm(rep.X);
    rep.primal_residual = (apply(op, rep.X) - b).norm();
    rep.objective = rep.nuclear_norm;
    // an inconsistent constraint leaves a residual the projection cannot
    // remove; that is non-convergence, not a solution
    if (rep.primal_residual > cfg.tol_primal * (1.0 + b.norm())) rep.converged = false;
    return rep;
}

SolveReport solve_regularized(const LinearOperatorSpec& op, const Vector& b,
                              double lambda, const SolverConfig& cfg) {
    if (!(lambda > 0)) throw std::invalid_argument("solve_regularized: lambda must be positive");
    if (b.size() != op.m) throw std::invalid_argument("solve_regularized: b length mismatch");
    require_finite(b, "solve_regularized");

    const Matrix A = matricize(op);
    const double a_op = op_norm(A);
    double L = std::max(a_op * a_op, 1e-12);

    auto grad = [&](const Matrix& X) { return adjoint(op, apply(op, X) - b); };
    auto fval = [&](const Matrix& X) { return 0.5 * (apply(op, X) - b).squaredNorm(); };
    auto objective = [&](const Matrix& X) { return fval(X) + lambda * nuclear_norm(X); };

    Matrix X = initial_point(op, cfg);
    Matrix Y = X;
    double t = 1.0;
    double obj_prev = objective(X);

    SolveReport rep;
    int it = 0;
    for (; it < cfg.max_iter; ++it) {
        const Matrix G = grad(Y);
        Matrix X_next;
        // Backtracking on the quadratic upper model; L starts at the exact
        // Lipschitz bound so this rarely triggers.
        for (int bt = 0;; ++bt) {
            X_next = prox_nuclear(Y - G / L, lambda / L);
            const Matrix D = X_next - Y;
            if (fval(X_next) <= fval(Y) + inner(G, D) + 0.5 * L * D.squaredNorm() + 1e-15 ||
                bt >= 60)
                break;
            L *= 2.0;
        }

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        Matrix Y_next = X_next + ((t - 1.0) / t_next) * (X_next - X);

        const double obj = objective(X_next);
        if (obj > obj_prev) {  // restart momentum
            Y_next = X_next;
            t = 1.0;
        } else {
            t = t_next;
        }
        obj_prev = std::min(obj_prev, obj);

        const double fp_res = (X_next - prox_nuclear(X_next - grad(X_next) / L, lambda / L)).norm();
        X = X_next;
        Y = Y_next;
        if (fp_res <= cfg.tol_dual * (1.0 + X.norm())) {
            ++it;
            rep.converged = true;
            break;
        }
    }

    rep.X = X;
    rep.iterations = it;
    rep.nuclear_norm = nuclear_norm(X);
    rep.primal_residual = (apply(op, X) - b).norm();
    rep.objective = fval(X) + lambda * rep.nuclear_norm;
    return rep;
}

double dual_certificate_residual(const LinearOperatorSpec& op, const Matrix& X,
                                 const SvdOptions& opts) {
    if (X.rows() != op.n || X.cols() != op.p)
        throw std::invalid_argument("dual_certificate_residual: shape mismatch");

    const SubdiffFrame fr = SubdiffFrame::from(X, opts);
    const Index n = fr.n(), p = fr.p(), r = fr.rank;
    const std::vector<Matrix> kb = kernel_basis(op);
    if (kb.empty()) return 0.0;  // rge A* is everything
    const Index k = static_cast<Index>(kb.size());

    // Kernel component of a subgradient U * blkdiag(I_r, R) * V^T as an
    // affine function of R: entry j is c_j + <G22_j, R>.
    Vector c(k);
    Matrix L(k, (n - r) * (p - r));
    for (Index j = 0; j < k; ++j) {
        const Matrix G = fr.U.transpose() * kb[static_cast<size_t>(j)] * fr.V;
        c[j] = G.topLeftCorner(r, r).trace();
        if (L.cols() > 0)
            L.row(j) = vec_rm(G.bottomRightCorner(n - r, p - r)).transpose();
    }
    if (L.cols() == 0) return c.norm();

    // Minimize ||L vec(R) + c||^2 over the operator-norm ball by projected
    // gradient with singular-value clipping.
    auto clip_ball = [](const Matrix& R) {
        const bool wide = R.rows() < R.cols();
        const Matrix T = wide ? Matrix(R.transpose()) : R;
        SvdFactors f = svd(T);
        if (f.sigma.size() == 0 || f.sigma[0] <= 1.0) return R;
        Matrix S = Matrix::Zero(T.rows(), T.cols());
        for (Index i = 0; i < T.cols(); ++i) S(i, i) = std::min(f.sigma[i], 1.0);
        const Matrix P = f.U * S * f.V.transpose();
        return wide ? Matrix(P.transpose()) : P;
    };

    const double l_op = op_norm(L);
    const double step = 1.0 / std::max(2.0 * l_op * l_op, 1e-12);
    Matrix R = Matrix::Zero(n - r, p - r);
    double h = (L * vec_rm(R) + c).squaredNorm();
    for (int it = 0; it < 2000; ++it) {
        const Vector res = L * vec_rm(R) + c;
        const Matrix grad = 2.0 * unvec_rm(L.transpose() * res, n - r, p - r);
        const Matrix R_next = clip_ball(R - step * grad);
        const double h_next = (L * vec_rm(R_next) + c).squaredNorm();
        if ((R_next - R).norm() <= 1e-14 * (1.0 + R.norm())) {
            R = R_next;
            h = h_next;
            break;
        }
        R = R_next;
        h = h_next;
    }
    return std::sqrt(std::max(h, 0.0));
}

bool transfer_invariants(const std::vector<Matrix>& solutions,
                         const LinearOperatorSpec& op, double tol) {
    if (solutions.empty())
        throw std::invalid_argument("transfer_invariants: empty solution list");
    for (size_t i = 0; i < solutions.size(); ++i) {
        for (size_t j = i + 1; j < solutions.size(); ++j) {
            if ((apply(op, solutions[i]) - apply(op, solutions[j])).norm() > tol) return false;
            if (std::abs(nuclear_norm(solutions[i]) - nuclear_norm(solutions[j])) > tol)
                return false;
        }
    }
    return true;
}

} // namespace nucert
