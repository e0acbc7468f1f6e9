#pragma once

#include "nucert/solver.hpp"
#include "nucert/wcone.hpp"

#include <string>

namespace nucert {

struct CertifyConfig {
    double feas_tol = 1e-8;
    double opt_tol = 1e-5;    // refuse a Unique verdict above this optimality residual
    double tol = 1e-8;        // membership / span tolerances
    double margin = 1e-6;     // undecidable band around gamma_star = 1
    int ap_iters = 500;       // alternating projections per bisection step
    double bisect_tol = 1e-8;
    SearchConfig search{};
    SvdOptions svd_opts{};
};

enum class RiStatus { Holds, Fails, Boundary };

/// Result of testing whether the relative interior of the subdifferential
/// meets rge A*: gamma_star is the smallest operator norm of the free block
/// over the affine slice of rge A* (infinite when the slice is empty).
struct RiReport {
    RiStatus status = RiStatus::Fails;
    double gamma_star = std::numeric_limits<double>::infinity();
    bool affine_feasible = false;
    Matrix witness_R;
    double constraint_residual = 0.0;
};

struct AssumptionReport {
    RiReport ri;
    bool parallel_span = false;
    Index parallel_span_rank = 0;
};

enum class Verdict { Unique, NotUnique, Inconclusive };
enum class DecidedBy { Assumption, SpanW, ExhaustiveSearch, Certificate };

struct UniquenessReport {
    Verdict verdict = Verdict::Inconclusive;
    DecidedBy decided_by = DecidedBy::ExhaustiveSearch;
    AssumptionReport assumption;
    std::optional<NonUniquenessCertificate> certificate;
    std::optional<Matrix> second_solution;
    double feasibility_residual = 0.0;
    double optimality_residual = 0.0;
    int search_starts = 0;
    double search_best_violation = 0.0;
    std::string note;
};

/// Whether the parallel subspace of the subdifferential at Xbar plus
/// rge A* spans the whole matrix space; also returns the achieved rank of
/// the stacked basis.
std::pair<bool, Index> check_parallel_span(const LinearOperatorSpec& op, const Matrix& Xbar,
                                           const SvdOptions& opts = {});

/// gamma_star = min ||R||_op over the affine slice of rge A*, by bisection
/// with alternating projections between the slice and the gamma-ball.
RiReport check_ri_intersection(const LinearOperatorSpec& op, const Matrix& Xbar,
                               const CertifyConfig& cfg = {});

/// Tiered uniqueness certification at a feasible point:
///   1. sufficient conditions (parallel span + relative-interior witness),
///   2. kernel vs span of the flat-direction cone (rank test),
///   3. kernel search for an explicit flat direction.
/// NotUnique verdicts carry a verified second solution.
UniquenessReport certify_uniqueness(const LinearOperatorSpec& op, const Vector& b,
                                    const Matrix& Xbar, const CertifyConfig& cfg = {});

const char* to_string(Verdict v);
const char* to_string(DecidedBy d);
const char* to_string(RiStatus s);

} // namespace nucert
