#include "nucert/certify.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace nucert {

const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Unique: return "Unique";
    case Verdict::NotUnique: return "NotUnique";
    case Verdict::Inconclusive: return "Inconclusive";
    }
    return "?";
}

const char* to_string(DecidedBy d) {
    switch (d) {
    case DecidedBy::Assumption: return "assumption";
    case DecidedBy::SpanW: return "span_w";
    case DecidedBy::ExhaustiveSearch: return "exhaustive_search";
    case DecidedBy::Certificate: return "certificate";
    }
    return "?";
}

const char* to_string(RiStatus s) {
    switch (s) {
    case RiStatus::Holds: return "holds";
    case RiStatus::Fails: return "fails";
    case RiStatus::Boundary: return "boundary";
    }
    return "?";
}

namespace {

// Linear description of "frame-coordinate subgradient lies in rge A*":
// for each kernel basis element, c_j + <G22_j, R> must vanish.
struct KernelConstraints {
    Matrix L;   // k x (n-r)(p-r)
    Vector c;   // k
};

KernelConstraints kernel_constraints(const SubdiffFrame& fr,
                                     const std::vector<Matrix>& kb) {
    const Index n = fr.n(), p = fr.p(), r = fr.rank;
    const Index k = static_cast<Index>(kb.size());
    KernelConstraints kc;
    kc.c.resize(k);
    kc.L.resize(k, (n - r) * (p - r));
    for (Index j = 0; j < k; ++j) {
        const Matrix G = fr.U.transpose() * kb[static_cast<size_t>(j)] * fr.V;
        kc.c[j] = G.topLeftCorner(r, r).trace();
        if (kc.L.cols() > 0)
            kc.L.row(j) = vec_rm(G.bottomRightCorner(n - r, p - r)).transpose();
    }
    return kc;
}

Matrix clip_op_ball(const Matrix& R, double gamma) {
    if (R.size() == 0) return R;
    const bool wide = R.rows() < R.cols();
    const Matrix T = wide ? Matrix(R.transpose()) : R;
    SvdFactors f = svd(T);
    if (f.sigma.size() == 0 || f.sigma[0] <= gamma) return R;
    Matrix S = Matrix::Zero(T.rows(), T.cols());
    for (Index i = 0; i < T.cols(); ++i) S(i, i) = std::min(f.sigma[i], gamma);
    const Matrix P = f.U * S * f.V.transpose();
    return wide ? Matrix(P.transpose()) : P;
}

} // namespace

std::pair<bool, Index> check_parallel_span(const LinearOperatorSpec& op, const Matrix& Xbar,
                                           const SvdOptions& opts) {
    const SubdiffFrame fr = SubdiffFrame::from(Xbar, opts);
    const std::vector<Matrix> par = parallel_basis(fr);
    const std::vector<Matrix> rge = range_adjoint_basis(op);
    const Index np = op.n * op.p;
    const Index cols = static_cast<Index>(par.size() + rge.size());
    if (cols == 0) return {np == 0, 0};

    Matrix S(np, cols);
    Index k = 0;
    for (const auto& B : par) S.col(k++) = vec_rm(B);
    for (const auto& B : rge) S.col(k++) = vec_rm(B);

    const SvdFactors f = svd(S.rows() >= S.cols() ? S : Matrix(S.transpose()),
                             SvdOptions{1e-9, SweepOrder::Forward});
    return {f.rank == np, f.rank};
}

RiReport check_ri_intersection(const LinearOperatorSpec& op, const Matrix& Xbar,
                               const CertifyConfig& cfg) {
    const SubdiffFrame fr = SubdiffFrame::from(Xbar, cfg.svd_opts);
    const Index n = fr.n(), p = fr.p(), r = fr.rank;
    const std::vector<Matrix> kb = kernel_basis(op);

    RiReport rep;
    if (kb.empty()) {  // rge A* is the whole space
        rep.status = RiStatus::Holds;
        rep.gamma_star = 0.0;
        rep.affine_feasible = true;
        rep.witness_R = Matrix::Zero(n - r, p - r);
        rep.constraint_residual = 0.0;
        return rep;
    }

    const KernelConstraints kc = kernel_constraints(fr, kb);

    if (kc.L.cols() == 0) {  // full column rank base point: no free block
        const double res = kc.c.norm();
        rep.affine_feasible = res <= 1e-8 * (1.0 + kc.c.size());
        rep.witness_R = Matrix(n - r, p - r);
        rep.constraint_residual = res;
        rep.gamma_star = rep.affine_feasible ? 0.0 : std::numeric_limits<double>::infinity();
        rep.status = rep.affine_feasible ? RiStatus::Holds : RiStatus::Fails;
        return rep;
    }

    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kc.L);
    const Vector r0_vec = cod.solve(-kc.c);
    const Matrix R0 = unvec_rm(r0_vec, n - r, p - r);
    const double lin_res = (kc.L * r0_vec + kc.c).norm();
    if (lin_res > 1e-8 * (1.0 + kc.c.norm())) {
        rep.affine_feasible = false;
        rep.constraint_residual = lin_res;
        rep.gamma_star = std::numeric_limits<double>::infinity();
        rep.status = RiStatus::Fails;
        return rep;
    }
    rep.affine_feasible = true;

    const Matrix pinv_L = cod.pseudoInverse();
    auto affine_project = [&](const Matrix& Y) {
        const Vector res = kc.L * vec_rm(Y) + kc.c;
        return Matrix(Y - unvec_rm(pinv_L * res, n - r, p - r));
    };

    const double gamma_hi = op_norm(R0);
    const double ap_tol = 1e-9 * (1.0 + gamma_hi);

    Matrix witness = R0;
    auto feasible_at = [&](double gamma, Matrix* out) {
        Matrix Z = R0;
        double gap = std::numeric_limits<double>::infinity();
        for (int it = 0; it < cfg.ap_iters; ++it) {
            const Matrix Zb = clip_op_ball(Z, gamma);
            const Matrix Za = affine_project(Zb);
            const double g = (Za - Zb).norm();
            Z = Za;
            if (g <= ap_tol) {
                if (out) *out = Za;
                return true;
            }
            if (std::abs(gap - g) <= 1e-16 * (1.0 + g)) break;  // stalled
            gap = g;
        }
        return false;
    };

    double lo = 0.0, hi = gamma_hi;
    if (gamma_hi > 1e-12) {
        for (int it = 0; it < 80 && hi - lo > cfg.bisect_tol * std::max(1.0, gamma_hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            Matrix w;
            if (feasible_at(mid, &w)) {
                hi = mid;
                witness = w;
            } else {
                lo = mid;
            }
        }
    } else {
        hi = 0.0;
    }

    rep.gamma_star = hi;
    rep.witness_R = witness;
    rep.constraint_residual = (kc.L * vec_rm(witness) + kc.c).norm();
    if (hi <= 1.0 - cfg.margin) rep.status = RiStatus::Holds;
    else if (hi >= 1.0 + cfg.margin) rep.status = RiStatus::Fails;
    else rep.status = RiStatus::Boundary;
    return rep;
}

namespace {

// Tier 2: no nonzero kernel element can lie in span W(Xbar). The span's
// orthogonal complement is the skew part of the leading r x r frame block;
// injectivity of the kernel basis into those coordinates decides it.
bool span_w_excludes_kernel(const SubdiffFrame& fr, const std::vector<Matrix>& kb,
                            double tol) {
    const Index r = fr.rank;
    if (r <= 1) return false;  // span W is everything
    const Index d = static_cast<Index>(kb.size());
    if (d == 0) return false;  // nothing to exclude; handled by the search tier
    const Index q = r * (r - 1) / 2;
    if (d > q) return false;

    Matrix T(q, d);
    for (Index j = 0; j < d; ++j) {
        const Matrix A =
            (fr.U.transpose() * kb[static_cast<size_t>(j)] * fr.V).topLeftCorner(r, r);
        Index k = 0;
        for (Index a = 0; a < r; ++a)
            for (Index b = a + 1; b < r; ++b)
                T(k++, j) = (A(a, b) - A(b, a)) / std::numbers::sqrt2;
    }
    const SvdFactors f = svd(T.rows() >= T.cols() ? T : Matrix(T.transpose()));
    if (f.sigma.size() < d) return false;
    return f.sigma[d - 1] > tol;
}

// Transposed copy of a problem so wide base points can be certified: the
// operator becomes dense with permuted matricization columns.
LinearOperatorSpec transpose_operator(const LinearOperatorSpec& op) {
    const Matrix M = matricize(op);
    Matrix Mt(op.m, op.n * op.p);
    for (Index i = 0; i < op.n; ++i)
        for (Index j = 0; j < op.p; ++j)
            Mt.col(j * op.n + i) = M.col(i * op.p + j);
    return LinearOperatorSpec::dense_op(std::move(Mt), op.p, op.n);
}

} // namespace

UniquenessReport certify_uniqueness(const LinearOperatorSpec& op, const Vector& b,
                                    const Matrix& Xbar, const CertifyConfig& cfg) {
    if (Xbar.rows() != op.n || Xbar.cols() != op.p)
        throw std::invalid_argument("certify: Xbar shape mismatch");
    if (b.size() != op.m)
        throw std::invalid_argument("certify: b length mismatch");

    if (op.n < op.p) {
        UniquenessReport rep = certify_uniqueness(transpose_operator(op), b,
                                                  Xbar.transpose(), cfg);
        if (rep.second_solution) rep.second_solution = rep.second_solution->transpose();
        rep.note += rep.note.empty() ? "" : "; ";
        rep.note += "certified on the transposed instance";
        return rep;
    }

    UniquenessReport rep;
    rep.feasibility_residual = (apply(op, Xbar) - b).norm();
    if (rep.feasibility_residual > cfg.feas_tol)
        throw std::invalid_argument("certify: Xbar is not feasible within feas_tol");

    rep.optimality_residual = dual_certificate_residual(op, Xbar, cfg.svd_opts);
    const bool optimal = rep.optimality_residual <= cfg.opt_tol;

    const auto [span_ok, span_rank] = check_parallel_span(op, Xbar, cfg.svd_opts);
    rep.assumption.parallel_span = span_ok;
    rep.assumption.parallel_span_rank = span_rank;
    rep.assumption.ri = check_ri_intersection(op, Xbar, cfg);

    auto finish = [&](Verdict v, DecidedBy d) {
        rep.verdict = v;
        rep.decided_by = d;
        if (rep.verdict == Verdict::Unique && !optimal) {
            rep.verdict = Verdict::Inconclusive;
            rep.note += rep.note.empty() ? "" : "; ";
            rep.note += "optimality residual exceeds opt_tol; Unique verdict withheld";
        }
        return rep;
    };

    if (span_ok && rep.assumption.ri.status == RiStatus::Holds)
        return finish(Verdict::Unique, DecidedBy::Assumption);

    const SubdiffFrame fr = SubdiffFrame::from(Xbar, cfg.svd_opts);
    const std::vector<Matrix> kb = kernel_basis(op);
    if (span_w_excludes_kernel(fr, kb, cfg.tol))
        return finish(Verdict::Unique, DecidedBy::SpanW);

    SearchConfig search = cfg.search;
    search.svd_opts = cfg.svd_opts;
    const SearchOutcome outcome = kernel_w_search(op, Xbar, search);
    rep.search_starts = outcome.starts_used;
    rep.search_best_violation =
        std::isfinite(outcome.best_violation) ? outcome.best_violation : -1.0;

    switch (outcome.status) {
    case SearchStatus::NoneFoundExhaustive:
        return finish(Verdict::Unique, DecidedBy::ExhaustiveSearch);
    case SearchStatus::NoneFoundHeuristic:
        rep.note = "kernel search exhausted its starts without a verdict";
        return finish(Verdict::Inconclusive, DecidedBy::ExhaustiveSearch);
    case SearchStatus::FoundNonzero:
        break;
    }

    const Matrix Xhat = second_solution(Xbar, *outcome.certificate);
    const double scale = 1.0 + nuclear_norm(Xbar);
    const bool verified = (apply(op, Xhat) - b).norm() <= 1e-8 * (1.0 + b.norm()) &&
                          std::abs(nuclear_norm(Xhat) - nuclear_norm(Xbar)) <= 1e-7 * scale &&
                          (Xhat - Xbar).norm() >= 1e-6 &&
                          is_flat_segment(Xbar, Xhat, 1e-7 * scale);
    if (!verified) {
        rep.note = "search produced a candidate the verifier rejected";
        return finish(Verdict::Inconclusive, DecidedBy::Certificate);
    }
    rep.certificate = outcome.certificate;
    rep.second_solution = Xhat;
    return finish(Verdict::NotUnique, DecidedBy::Certificate);
}

} // namespace nucert
