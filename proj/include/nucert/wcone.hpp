#pragma once

#include "nucert/operators.hpp"
#include "nucert/subgeom.hpp"

#include <cstdint>
#include <limits>
#include <optional>

namespace nucert {

/// Frame of the base point for cone membership tests.
struct WConeFrame {
    SubdiffFrame frame;

    static WConeFrame from(const Matrix& X, const SvdOptions& opts = {}) {
        return WConeFrame{SubdiffFrame::from(X, opts)};
    }
    Index n() const { return frame.n(); }
    Index p() const { return frame.p(); }
};

/// Witness that a flat segment of feasible equal-norm points passes through
/// the base point: X(e) = Xbar + e * U * M * blkdiag(I_r, R) * V^T keeps the
/// nuclear norm constant for e in [0, eps_hat].
struct NonUniquenessCertificate {
    Matrix M;          // n x n symmetric, trace zero
    Matrix R;          // (n-r) x (p-r), orthonormal columns
    double eps_hat = 0;
};

/// Cap applied to the eps_hat bisection; a returned value at the cap means
/// the PSD step is unbounded.
inline constexpr double kEpsHatCap = 1e6;

/// Supremum of eps >= 0 with diag(sigma) + eps * M positive semidefinite,
/// by bisection to absolute tolerance 1e-10. sigma is padded with zeros to
/// the size of M. Positive exactly when M is a PSD matrix minus a positive
/// definite top-left r-block.
double eps_hat(const Vector& sigma, const Matrix& M);

struct SearchConfig {
    int starts = 32;
    int refine_iters = 200;
    double tol = 1e-8;
    std::uint64_t seed = 0;
    Index exhaustive_dim = 1;
    SvdOptions svd_opts{};
};

/// Decides whether a nonzero direction D lies in the flat-direction cone of
/// the frame's base point. On success returns the certificate (M, R, eps);
/// the search over R is exhaustive when the trailing block is 0-wide or
/// 1-by-1, and a seeded multistart otherwise.
std::optional<NonUniquenessCertificate> w_membership(const WConeFrame& wf, const Matrix& D,
                                                     double tol, const SearchConfig& cfg = {});

/// Frobenius norm of the component of D orthogonal to the span of the
/// flat-direction cone: the skew part of the leading r x r block in frame
/// coordinates.
double span_w_residual(const WConeFrame& wf, const Matrix& D);

enum class SearchStatus { FoundNonzero, NoneFoundExhaustive, NoneFoundHeuristic };

struct SearchOutcome {
    SearchStatus status = SearchStatus::NoneFoundHeuristic;
    std::optional<NonUniquenessCertificate> certificate;
    std::optional<Matrix> kernel_direction;   // unit Frobenius norm
    double membership_residual = 0.0;
    int starts_used = 0;
    double best_violation = std::numeric_limits<double>::infinity();
};

/// Searches ker A for a nonzero element of the flat-direction cone at Xbar.
/// FoundNonzero disproves uniqueness; NoneFoundExhaustive is claimed only
/// when the search provably covers everything (kernel dimension within
/// cfg.exhaustive_dim and enumerable R, or the kernel direction already
/// misses span W).
SearchOutcome kernel_w_search(const LinearOperatorSpec& op, const Matrix& Xbar,
                              const SearchConfig& cfg = {});

/// The endpoint of the certified flat segment through Xbar.
Matrix second_solution(const Matrix& Xbar, const NonUniquenessCertificate& cert);

/// Recovers a certificate from an explicit pair of equal-norm points on a
/// flat segment; inverse of second_solution up to scaling of eps.
NonUniquenessCertificate extract_certificate(const Matrix& Xbar, const Matrix& Xhat, double tol);

} // namespace nucert
