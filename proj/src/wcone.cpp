#include "nucert/wcone.hpp"

#include "nucert/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace nucert {

namespace {

Vector padded_sigma(const SubdiffFrame& fr) {
    Vector s = Vector::Zero(fr.n());
    for (Index i = 0; i < fr.rank; ++i) s[i] = fr.sigma[i];
    return s;
}

// blkdiag(I_r, R) as an n x p matrix.
Matrix block_embed(Index n, Index p, Index r, const Matrix& R) {
    Matrix K = Matrix::Zero(n, p);
    K.topLeftCorner(r, r).setIdentity();
    if (n > r && p > r) K.bottomRightCorner(n - r, p - r) = R;
    return K;
}

// blkdiag(I_r, R R^T); the orthogonal projection that a cone element's M
// must be invariant under.
Matrix constraint_projector(Index n, Index r, const Matrix& R) {
    Matrix P = Matrix::Zero(n, n);
    P.topLeftCorner(r, r).setIdentity();
    if (n > r) P.bottomRightCorner(n - r, n - r) = R * R.transpose();
    return P;
}

// Violation coordinates of a candidate M: stacked skew entries plus trace.
Vector viol_coords(const Matrix& M) {
    const Index n = M.rows();
    Vector v(n * (n - 1) / 2 + 1);
    Index k = 0;
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) v[k++] = M(i, j) - M(j, i);
    v[k] = M.trace();
    return v;
}

// Distance-from-cone diagnostic for a symmetric traceless candidate: the
// negative spectrum of the trailing block plus the part of the off block
// not reachable from its range.
double cone_defect(const Matrix& Msym, Index r) {
    const Index n = Msym.rows();
    if (n == r) return 0.0;
    const Matrix M22 = Msym.bottomRightCorner(n - r, n - r);
    Eigen::SelfAdjointEigenSolver<Matrix> es(M22);
    double defect = 0.0;
    const double lam_max = es.eigenvalues().cwiseAbs().maxCoeff();
    for (Index i = 0; i < es.eigenvalues().size(); ++i)
        defect += std::max(0.0, -es.eigenvalues()[i]);
    if (r > 0) {
        const Matrix M12 = Msym.topRightCorner(r, n - r);
        for (Index i = 0; i < es.eigenvalues().size(); ++i)
            if (es.eigenvalues()[i] <= 1e-10 * (1.0 + lam_max))
                defect += (M12 * es.eigenvectors().col(i)).norm();
    }
    return defect;
}

struct CandidateCheck {
    bool ok = false;
    NonUniquenessCertificate cert;
    double violation = std::numeric_limits<double>::infinity();
};

// Exact membership test for the direction with frame coordinates G and a
// fixed Stiefel R. The compatible M is forced: M = G * blkdiag(I_r, R)^T.
CandidateCheck check_candidate(const SubdiffFrame& fr, const Matrix& G,
                               const Matrix& R, double tol) {
    const Index n = fr.n(), p = fr.p(), r = fr.rank;
    const Matrix K = block_embed(n, p, r, R);
    const Matrix M = G * K.transpose();
    const Matrix Ms = sym_part(M);

    CandidateCheck out;
    const double sym_defect = (M - M.transpose()).norm();
    const double tr_defect = std::abs(M.trace());
    out.violation = sym_defect + tr_defect + cone_defect(Ms, r);
    if (sym_defect > tol || tr_defect > tol) return out;

    // Snap onto the exact constraint space before certifying.
    const Matrix P = constraint_projector(n, r, R);
    Matrix Mf = P * Ms * P;
    Mf -= (Mf.trace() / static_cast<double>(p)) * P;
    const double e = eps_hat(padded_sigma(fr), Mf);
    if (e <= tol) return out;

    out.ok = true;
    out.cert = NonUniquenessCertificate{Mf, R, e};
    return out;
}

// Affine map R -> violation coordinates of M(R) = G * blkdiag(I_r, R)^T,
// as (A, c) with coords = A * vec(R) + c.
void membership_affine_map(const Matrix& G, Index n, Index p, Index r,
                           Matrix& A, Vector& c) {
    const Index nr = n - r, pr = p - r;
    c = viol_coords(G * block_embed(n, p, r, Matrix::Zero(nr, pr)).transpose());
    A.resize(c.size(), nr * pr);
    Matrix E = Matrix::Zero(nr, pr);
    for (Index i = 0; i < nr; ++i)
        for (Index j = 0; j < pr; ++j) {
            E(i, j) = 1.0;
            const Vector col =
                viol_coords(G * block_embed(n, p, r, E).transpose()) - c;
            A.col(i * pr + j) = col;
            E(i, j) = 0.0;
        }
}

Matrix refine_on_stiefel(const Matrix& A, const Vector& c, Matrix R, int iters) {
    const Index nr = R.rows(), pr = R.cols();
    auto value = [&](const Matrix& X) { return 0.5 * (A * vec_rm(X) + c).squaredNorm(); };
    double f = value(R);
    double step = 1.0;
    for (int it = 0; it < iters; ++it) {
        const Vector res = A * vec_rm(R) + c;
        const Matrix grad = unvec_rm(A.transpose() * res, nr, pr);
        const double gn = grad.norm();
        if (gn < 1e-14) break;
        bool moved = false;
        for (int bt = 0; bt < 40; ++bt) {
            const Matrix cand = stiefel_project(R - step * grad);
            const double fc = value(cand);
            if (fc < f - 1e-12 * step * gn * gn) {
                R = cand;
                f = fc;
                moved = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return R;
}

std::vector<Matrix> r_candidates(const SubdiffFrame& fr, const Matrix& G,
                                 const SearchConfig& cfg, bool& exhaustive,
                                 int& starts_used) {
    const Index n = fr.n(), p = fr.p(), r = fr.rank;
    const Index nr = n - r, pr = p - r;
    std::vector<Matrix> cands;
    if (pr == 0) {
        exhaustive = true;
        cands.emplace_back(Matrix::Zero(nr, 0));
        return cands;
    }
    if (nr == 1 && pr == 1) {
        exhaustive = true;
        cands.push_back(Matrix::Constant(1, 1, 1.0));
        cands.push_back(Matrix::Constant(1, 1, -1.0));
        return cands;
    }
    exhaustive = false;

    Matrix A;
    Vector c;
    membership_affine_map(G, n, p, r, A, c);

    // Unconstrained least-squares minimizer of the violation, projected to
    // the manifold, plus the canonical frames, plus seeded random starts.
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
    const Vector r_ls = cod.solve(-c);
    std::vector<Matrix> starts;
    starts.push_back(stiefel_project(unvec_rm(r_ls, nr, pr)));
    Matrix canonical = Matrix::Zero(nr, pr);
    canonical.topLeftCorner(pr, pr).setIdentity();
    starts.push_back(canonical);
    starts.push_back(-canonical);
    Rng rng(cfg.seed + 0x9e3779b97f4a7c15ull);
    for (int s = 0; s < cfg.starts; ++s) starts.push_back(rng.stiefel(nr, pr));

    for (const auto& s : starts) {
        ++starts_used;
        cands.push_back(refine_on_stiefel(A, c, s, cfg.refine_iters));
    }
    return cands;
}

} // namespace

double eps_hat(const Vector& sigma, const Matrix& M) {
    if (M.rows() != M.cols())
        throw std::invalid_argument("eps_hat: M must be square");
    require_finite(M, "eps_hat");
    const Index n = M.rows();
    if (sigma.size() > n)
        throw std::invalid_argument("eps_hat: sigma longer than M");
    const double m_norm = M.norm();
    if ((M - M.transpose()).norm() > 1e-8 * (1.0 + m_norm))
        throw std::invalid_argument("eps_hat: M not symmetric");
    const Matrix Ms = sym_part(M);

    Vector s = Vector::Zero(n);
    s.head(sigma.size()) = sigma;
    const double s_max = n > 0 ? s.maxCoeff() : 0.0;

    auto feasible = [&](double eps) {
        Matrix A = eps * Ms;
        A.diagonal() += s;
        const double slack = 1e-13 * (1.0 + s_max + eps * m_norm);
        return min_eig_symmetrized(A) >= -slack;
    };

    if (feasible(kEpsHatCap)) return kEpsHatCap;
    double lo = 0.0, hi = kEpsHatCap;
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(mid)) lo = mid;
        else hi = mid;
    }
    return lo;
}

std::optional<NonUniquenessCertificate> w_membership(const WConeFrame& wf, const Matrix& D,
                                                     double tol, const SearchConfig& cfg) {
    const SubdiffFrame& fr = wf.frame;
    if (D.rows() != fr.n() || D.cols() != fr.p())
        throw std::invalid_argument("w_membership: shape mismatch");
    if (D.norm() <= 1e-14)
        throw std::invalid_argument("w_membership: zero direction");

    const Matrix G = fr.U.transpose() * D * fr.V;
    bool exhaustive = false;
    int starts_used = 0;
    for (const Matrix& R : r_candidates(fr, G, cfg, exhaustive, starts_used)) {
        const CandidateCheck check = check_candidate(fr, G, R, tol);
        if (check.ok) return check.cert;
    }
    return std::nullopt;
}

double span_w_residual(const WConeFrame& wf, const Matrix& D) {
    if (D.rows() != wf.n() || D.cols() != wf.p())
        throw std::invalid_argument("span_w_residual: shape mismatch");
    const Index r = wf.frame.rank;
    if (r <= 1) return 0.0;
    const Matrix A = (wf.frame.U.transpose() * D * wf.frame.V).topLeftCorner(r, r);
    return skew_part(A).norm();
}

namespace {

// Columns: violation coordinates of Ghat[i] * blkdiag(I_r, R)^T.
Matrix phi_matrix(const std::vector<Matrix>& Ghat, Index n, Index p, Index r,
                  const Matrix& R) {
    const Matrix Kt = block_embed(n, p, r, R).transpose();
    Matrix Phi(n * (n - 1) / 2 + 1, static_cast<Index>(Ghat.size()));
    for (size_t i = 0; i < Ghat.size(); ++i)
        Phi.col(static_cast<Index>(i)) = viol_coords(Ghat[i] * Kt);
    return Phi;
}

struct NullSpace {
    Matrix basis;       // d x nu
    double sigma_min = std::numeric_limits<double>::infinity();
};

NullSpace null_space(const Matrix& Phi, double tol) {
    Eigen::JacobiSVD<Matrix> svd_phi(Phi, Eigen::ComputeFullV);
    const Vector sv = svd_phi.singularValues();
    const Index d = Phi.cols();
    const Index rank_bound = std::min<Index>(sv.size(), d);
    NullSpace out;
    Index nu = d;
    for (Index i = 0; i < rank_bound; ++i)
        if (sv[i] > tol) --nu;
    out.sigma_min = rank_bound > 0 ? sv[rank_bound - 1] : 0.0;
    if (d > sv.size()) out.sigma_min = 0.0;
    out.basis = svd_phi.matrixV().rightCols(nu);
    return out;
}

// Maximizes the smallest eigenvalue of the trailing block of M(beta) over
// the unit sphere of null-space coefficients; concave in beta, so a
// supergradient ascent with a few starts is reliable.
std::vector<Vector> cone_seek(const std::vector<Matrix>& Ghat, Index n, Index p, Index r,
                              const Matrix& R, const Matrix& N, std::uint64_t seed) {
    const Index nu = N.cols();
    std::vector<Vector> out;
    if (nu == 0) return out;
    if (nu == 1) {
        out.push_back(N.col(0));
        out.push_back(-N.col(0));
        return out;
    }

    const Matrix Kt = block_embed(n, p, r, R).transpose();
    auto m22_of = [&](const Vector& beta) {
        Matrix M = Matrix::Zero(n, n);
        const Vector alpha = N * beta;
        for (size_t i = 0; i < Ghat.size(); ++i) M += alpha[static_cast<Index>(i)] * (Ghat[i] * Kt);
        return Matrix(sym_part(M).bottomRightCorner(n - r, n - r));
    };

    std::vector<Vector> starts;
    for (Index i = 0; i < nu; ++i) {
        Vector e = Vector::Zero(nu);
        e[i] = 1.0;
        starts.push_back(e);
        starts.push_back(-e);
    }
    Rng rng(seed + 0xda3e39cb94b95bdbull);
    for (int s = 0; s < 4; ++s) {
        Vector g = rng.gaussian_vector(nu);
        if (g.norm() > 0) starts.push_back(g.normalized());
    }

    for (Vector beta : starts) {
        double step = 0.5;
        double best = min_eig_symmetrized(m22_of(beta));
        for (int it = 0; it < 120; ++it) {
            const Matrix M22 = m22_of(beta);
            Eigen::SelfAdjointEigenSolver<Matrix> es(M22);
            const Vector q = es.eigenvectors().col(0);
            Vector grad(nu);
            for (Index k = 0; k < nu; ++k) {
                Vector e = Vector::Zero(nu);
                e[k] = 1.0;
                grad[k] = q.dot(m22_of(e) * q);
            }
            if (grad.norm() < 1e-14) break;
            Vector cand = beta + step * grad;
            const double cn = cand.norm();
            if (cn < 1e-14) break;
            cand /= cn;
            const double val = min_eig_symmetrized(m22_of(cand));
            if (val > best + 1e-15) {
                beta = cand;
                best = val;
                step *= 1.3;
            } else {
                step *= 0.5;
                if (step < 1e-12) break;
            }
        }
        out.push_back(beta);
    }
    return out;
}

SearchOutcome none_found(bool exhaustive, int starts, double best_violation) {
    SearchOutcome o;
    o.status = exhaustive ? SearchStatus::NoneFoundExhaustive : SearchStatus::NoneFoundHeuristic;
    o.starts_used = starts;
    o.best_violation = best_violation;
    return o;
}

SearchOutcome found(NonUniquenessCertificate cert, Matrix direction, double residual, int starts) {
    SearchOutcome o;
    o.status = SearchStatus::FoundNonzero;
    o.certificate = std::move(cert);
    o.kernel_direction = std::move(direction);
    o.membership_residual = residual;
    o.starts_used = starts;
    o.best_violation = residual;
    return o;
}

} // namespace

SearchOutcome kernel_w_search(const LinearOperatorSpec& op, const Matrix& Xbar,
                              const SearchConfig& cfg) {
    const SubdiffFrame fr = SubdiffFrame::from(Xbar, cfg.svd_opts);
    const WConeFrame wf{fr};
    const Index n = fr.n(), p = fr.p(), r = fr.rank;

    const std::vector<Matrix> kb = kernel_basis(op);
    const Index d = static_cast<Index>(kb.size());
    if (d == 0) return none_found(true, 0, 0.0);
    if (r == 0) return none_found(true, 0, 0.0);  // cone is {0} at a zero base point

    const bool r_exhaustive = (p - r == 0) || (n - r == 1 && p - r == 1);

    if (d == 1) {
        const Matrix& K = kb[0];
        // outside span W: provably no scalar multiple enters the cone
        if (span_w_residual(wf, K) > cfg.tol) return none_found(true, 0, 0.0);
        double best = std::numeric_limits<double>::infinity();
        int starts = 0;
        for (const double s : {1.0, -1.0}) {
            const Matrix D = s * K;
            const Matrix G = fr.U.transpose() * D * fr.V;
            bool exhaustive = false;
            for (const Matrix& R : r_candidates(fr, G, cfg, exhaustive, starts)) {
                const CandidateCheck check = check_candidate(fr, G, R, cfg.tol);
                if (check.ok) return found(check.cert, D, check.violation, starts);
                best = std::min(best, check.violation);
            }
        }
        return none_found(r_exhaustive && cfg.exhaustive_dim >= 1, starts, best);
    }

    // Kernel dimension above the exhaustive budget: heuristic joint search
    // over unit kernel coefficients and the Stiefel block.
    std::vector<Matrix> Ghat;
    Ghat.reserve(static_cast<size_t>(d));
    for (const auto& K : kb) Ghat.push_back(fr.U.transpose() * K * fr.V);

    double best = std::numeric_limits<double>::infinity();
    int starts = 0;

    // Cheap pass: each basis direction on its own.
    for (Index i = 0; i < d; ++i) {
        for (const double s : {1.0, -1.0}) {
            bool exhaustive = false;
            const Matrix G = s * Ghat[static_cast<size_t>(i)];
            for (const Matrix& R : r_candidates(fr, G, cfg, exhaustive, starts)) {
                const CandidateCheck check = check_candidate(fr, G, R, cfg.tol);
                if (check.ok) return found(check.cert, s * kb[static_cast<size_t>(i)], check.violation, starts);
                best = std::min(best, check.violation);
            }
        }
    }

    const Index nr = n - r, pr = p - r;
    std::vector<Matrix> r_pool;
    if (pr == 0) {
        r_pool.emplace_back(Matrix::Zero(nr, 0));
    } else if (nr == 1 && pr == 1) {
        r_pool.push_back(Matrix::Constant(1, 1, 1.0));
        r_pool.push_back(Matrix::Constant(1, 1, -1.0));
    } else {
        Matrix canonical = Matrix::Zero(nr, pr);
        canonical.topLeftCorner(pr, pr).setIdentity();
        r_pool.push_back(canonical);
        r_pool.push_back(-canonical);
        Rng rng(cfg.seed + 0xa0761d6478bd642full);
        for (int s = 0; s < cfg.starts; ++s) r_pool.push_back(rng.stiefel(nr, pr));
    }

    const double null_tol = std::max(1e-10, 10.0 * cfg.tol);
    for (Matrix R : r_pool) {
        ++starts;
        // Alternate: best coefficients for this R, then re-fit R for those
        // coefficients; both subproblems are linear least squares.
        Vector alpha;
        for (int round = 0; round < 25; ++round) {
            const Matrix Phi = phi_matrix(Ghat, n, p, r, R);
            Eigen::JacobiSVD<Matrix> sv(Phi, Eigen::ComputeFullV);
            alpha = sv.matrixV().col(d - 1);
            if (pr == 0 || (nr == 1 && pr == 1)) break;
            Matrix G = Matrix::Zero(n, p);
            for (Index i = 0; i < d; ++i) G += alpha[i] * Ghat[static_cast<size_t>(i)];
            Matrix A;
            Vector c;
            membership_affine_map(G, n, p, r, A, c);
            Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
            const Matrix R_next = stiefel_project(unvec_rm(cod.solve(-c), nr, pr));
            if ((R_next - R).norm() < 1e-12) {
                R = R_next;
                break;
            }
            R = R_next;
        }

        const Matrix Phi = phi_matrix(Ghat, n, p, r, R);
        const NullSpace ns = null_space(Phi, null_tol);
        best = std::min(best, ns.sigma_min);
        if (ns.basis.cols() == 0) continue;

        for (const Vector& beta : cone_seek(Ghat, n, p, r, R, ns.basis, cfg.seed)) {
            Vector a = ns.basis * beta;
            const double an = a.norm();
            if (an < 1e-14) continue;
            a /= an;
            Matrix D = Matrix::Zero(n, p);
            Matrix G = Matrix::Zero(n, p);
            for (Index i = 0; i < d; ++i) {
                D += a[i] * kb[static_cast<size_t>(i)];
                G += a[i] * Ghat[static_cast<size_t>(i)];
            }
            const CandidateCheck check = check_candidate(fr, G, R, cfg.tol);
            if (check.ok) return found(check.cert, D, check.violation, starts);
            best = std::min(best, check.violation);
        }
    }
    return none_found(false, starts, best);
}

namespace {

void validate_certificate(const SubdiffFrame& fr, const NonUniquenessCertificate& cert) {
    const Index n = fr.n(), p = fr.p(), r = fr.rank;
    if (cert.M.rows() != n || cert.M.cols() != n)
        throw std::invalid_argument("certificate: M size does not match the base point");
    if (cert.R.rows() != n - r || cert.R.cols() != p - r)
        throw std::invalid_argument("certificate: R size does not match the base rank");
    if (!(cert.eps_hat > 0.0))
        throw std::invalid_argument("certificate: eps_hat must be positive");
    const double m_scale = 1.0 + cert.M.norm();
    if ((cert.M - cert.M.transpose()).norm() > 1e-9 * m_scale)
        throw std::invalid_argument("certificate: M not symmetric");
    if (std::abs(cert.M.trace()) > 1e-9 * m_scale)
        throw std::invalid_argument("certificate: M not traceless");
    if (cert.R.cols() > 0) {
        const Matrix gram = cert.R.transpose() * cert.R -
                            Matrix::Identity(cert.R.cols(), cert.R.cols());
        if (gram.norm() > 1e-9)
            throw std::invalid_argument("certificate: R not Stiefel");
    }
    const Matrix P = constraint_projector(n, r, cert.R);
    if ((cert.M * P - cert.M).norm() > 1e-9 * m_scale)
        throw std::invalid_argument("certificate: M not supported on the R block");
    Matrix A = cert.eps_hat * sym_part(cert.M);
    A.diagonal() += padded_sigma(fr);
    const double slack = 1e-9 * (1.0 + padded_sigma(fr).maxCoeff() + cert.eps_hat * cert.M.norm());
    if (min_eig_symmetrized(A) < -slack)
        throw std::invalid_argument("certificate: diag(sigma) + eps*M is not PSD");
}

} // namespace

Matrix second_solution(const Matrix& Xbar, const NonUniquenessCertificate& cert) {
    const SubdiffFrame fr = SubdiffFrame::from(Xbar);
    validate_certificate(fr, cert);
    const Matrix K = block_embed(fr.n(), fr.p(), fr.rank, cert.R);
    const Matrix Xhat = Xbar + cert.eps_hat * fr.U * cert.M * K * fr.V.transpose();
    const double scale = 1.0 + nuclear_norm(Xbar);
    if (std::abs(nuclear_norm(Xhat) - nuclear_norm(Xbar)) > 1e-8 * scale)
        throw std::invalid_argument("certificate: does not preserve the nuclear norm");
    return Xhat;
}

NonUniquenessCertificate extract_certificate(const Matrix& Xbar, const Matrix& Xhat, double tol) {
    if (Xbar.rows() != Xhat.rows() || Xbar.cols() != Xhat.cols())
        throw std::invalid_argument("extract_certificate: shape mismatch");
    const double scale = 1.0 + Xbar.norm() + Xhat.norm();
    if ((Xhat - Xbar).norm() <= tol * scale)
        throw std::invalid_argument("extract_certificate: points coincide (no proper segment)");
    if (!is_flat_segment(Xbar, Xhat, tol))
        throw std::invalid_argument("extract_certificate: pair is not a flat segment");
    const std::optional<Matrix> U = common_polarizer(Xbar, Xhat, tol);
    if (!U)
        throw std::invalid_argument("extract_certificate: no common polarizer");

    const SubdiffFrame fr = SubdiffFrame::from(Xbar);
    const Index n = fr.n(), p = fr.p(), r = fr.rank;
    Matrix R(n - r, p - r);
    if (p - r > 0) {
        const Matrix GU = fr.U.transpose() * (*U) * fr.V;
        R = stiefel_project(GU.bottomRightCorner(n - r, p - r));
    }

    const Matrix K = block_embed(n, p, r, R);
    const Matrix M_raw = fr.U.transpose() * (Xhat - Xbar) * fr.V * K.transpose();
    const Matrix P = constraint_projector(n, r, R);
    Matrix M = P * sym_part(M_raw) * P;
    M -= (M.trace() / static_cast<double>(p)) * P;

    NonUniquenessCertificate cert;
    cert.M = std::move(M);
    cert.R = std::move(R);
    cert.eps_hat = eps_hat(padded_sigma(fr), cert.M);
    return cert;
}

} // namespace nucert
