#include "nucert/certify.hpp"

#include "test_util.hpp"

using namespace nucert;
using testutil::random_low_rank;

namespace {

Matrix diag2(double a, double b) {
    Matrix X = Matrix::Zero(2, 2);
    X(0, 0) = a;
    X(1, 1) = b;
    return X;
}

LinearOperatorSpec full_mask(Index n, Index p) {
    std::vector<std::pair<Index, Index>> all;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) all.emplace_back(i, j);
    return LinearOperatorSpec::entry_mask(all, n, p);
}

LinearOperatorSpec trace_functional() {
    Matrix payload(1, 4);
    payload << 1, 0, 0, 1;
    return LinearOperatorSpec::dense_op(payload, 2, 2);
}

Vector counterexample_rhs() {
    Vector b = Vector::Zero(8);
    b[0] = 1;
    return b;
}

} // namespace

TEST_CASE("check_parallel_span: counterexample, full mask, starved operator") {
    const auto ce = LinearOperatorSpec::counterexample();
    const auto [ok_ce, rank_ce] = check_parallel_span(ce, diag2(1, 0));
    CHECK(ok_ce);
    CHECK(rank_ce == 4);

    Rng rng(139);
    const auto mask = full_mask(3, 2);
    CHECK(check_parallel_span(mask, rng.gaussian_matrix(3, 2)).first);

    // one measurement, full-rank square base point: 0 + 1 < 4
    const auto [ok_tr, rank_tr] = check_parallel_span(trace_functional(), diag2(2, 1));
    CHECK_FALSE(ok_tr);
    CHECK(rank_tr == 1);
}

TEST_CASE("check_ri_intersection: counterexample sits exactly on the boundary") {
    const auto ce = LinearOperatorSpec::counterexample();
    const RiReport rep = check_ri_intersection(ce, diag2(1, 0));
    CHECK(rep.affine_feasible);
    CHECK(rep.gamma_star == doctest::Approx(1).epsilon(1e-6));
    CHECK(rep.status != RiStatus::Holds);
    REQUIRE(rep.witness_R.size() == 1);
    CHECK(rep.witness_R(0, 0) == doctest::Approx(-1).epsilon(1e-5));
    CHECK(rep.constraint_residual <= 1e-8);
}

TEST_CASE("check_ri_intersection: full mask holds with the zero witness") {
    Rng rng(149);
    const auto mask = full_mask(3, 2);
    const Matrix Xbar = random_low_rank(rng, 3, 2, 1);
    const RiReport rep = check_ri_intersection(mask, Xbar);
    CHECK(rep.status == RiStatus::Holds);
    CHECK(rep.gamma_star <= 1e-9);
    CHECK(rep.witness_R.norm() <= 1e-9);
}

TEST_CASE("check_ri_intersection: trace functional pins gamma_star at one") {
    // The affine slice is the single point R = 1 (the identity subgradient),
    // so gamma_star = 1: the relative interior misses rge A*.
    const RiReport rep = check_ri_intersection(trace_functional(), diag2(1, 0));
    CHECK(rep.affine_feasible);
    CHECK(rep.gamma_star == doctest::Approx(1).epsilon(1e-6));
    CHECK(rep.status != RiStatus::Holds);
}

TEST_CASE("certify: counterexample is unique through the exhaustive tier") {
    const auto ce = LinearOperatorSpec::counterexample();
    const UniquenessReport rep = certify_uniqueness(ce, counterexample_rhs(), diag2(1, 0));
    CHECK(rep.verdict == Verdict::Unique);
    CHECK(rep.decided_by == DecidedBy::ExhaustiveSearch);
    CHECK(rep.assumption.parallel_span);
    CHECK(rep.assumption.ri.status != RiStatus::Holds);
    CHECK(rep.assumption.ri.gamma_star == doctest::Approx(1).epsilon(1e-6));
    CHECK(rep.optimality_residual <= 1e-8);
    CHECK(rep.feasibility_residual <= 1e-12);
}

TEST_CASE("certify: trace functional instance is not unique, with a verified witness") {
    const auto tr = trace_functional();
    const Vector b = Vector::Ones(1);
    const UniquenessReport rep = certify_uniqueness(tr, b, diag2(1, 0));
    REQUIRE(rep.verdict == Verdict::NotUnique);
    CHECK(rep.decided_by == DecidedBy::Certificate);
    REQUIRE(rep.second_solution.has_value());
    const Matrix& Xhat = *rep.second_solution;
    CHECK((apply(tr, Xhat) - b).norm() <= 1e-8);
    CHECK(nuclear_norm(Xhat) == doctest::Approx(1).epsilon(1e-7));
    CHECK((Xhat - diag2(1, 0)).norm() >= 1e-6);
    CHECK(is_flat_segment(diag2(1, 0), Xhat, 1e-7));
    REQUIRE(rep.certificate.has_value());
}

TEST_CASE("certify: full mask instances are unique by the assumption tier") {
    Rng rng(151);
    const auto mask = full_mask(3, 2);
    const Matrix data = rng.gaussian_matrix(3, 2);
    const UniquenessReport rep = certify_uniqueness(mask, apply(mask, data), data);
    CHECK(rep.verdict == Verdict::Unique);
    CHECK(rep.decided_by == DecidedBy::Assumption);
}

TEST_CASE("certify: zero base point with zero data is unique") {
    const auto ce = LinearOperatorSpec::counterexample();
    const UniquenessReport rep =
        certify_uniqueness(ce, Vector::Zero(8), Matrix::Zero(2, 2));
    CHECK(rep.verdict == Verdict::Unique);
    CHECK(rep.decided_by == DecidedBy::Assumption);
}

TEST_CASE("certify: infeasible base point is rejected") {
    const auto ce = LinearOperatorSpec::counterexample();
    CHECK_THROWS_AS(certify_uniqueness(ce, counterexample_rhs(), diag2(0, 1)),
                    std::invalid_argument);
}

TEST_CASE("certify: wide instances go through the transposed route") {
    Rng rng(157);
    const auto mask = full_mask(2, 3);  // wide domain
    const Matrix data = rng.gaussian_matrix(2, 3);
    const UniquenessReport rep = certify_uniqueness(mask, apply(mask, data), data);
    CHECK(rep.verdict == Verdict::Unique);
    CHECK(rep.note.find("transposed") != std::string::npos);
}

TEST_CASE("bridge soundness: assumption tier implies an empty kernel search") {
    Rng rng(163);
    int holds = 0, attempts = 0;
    while (holds < 30 && attempts < 400) {
        ++attempts;
        const Index n = 4, p = 3;
        const Matrix Xbar = random_low_rank(rng, n, p, 1);
        const Index m = 9 + static_cast<Index>(rng.uniform() * 3);
        const auto op = LinearOperatorSpec::dense_op(rng.gaussian_matrix(m, n * p), n, p);

        if (!check_parallel_span(op, Xbar).first) continue;
        const RiReport ri = check_ri_intersection(op, Xbar);
        if (ri.status != RiStatus::Holds) continue;
        ++holds;
        CHECK(ri.gamma_star < 1.0 - 1e-6);
        CHECK(ri.constraint_residual <= 1e-8);

        const SearchOutcome out = kernel_w_search(op, Xbar);
        CHECK(out.status != SearchStatus::FoundNonzero);
    }
    CHECK(holds == 30);
}

TEST_CASE("monotonicity: extra measurements never flip Unique to NotUnique") {
    Rng rng(167);
    int checked = 0;
    for (int trial = 0; trial < 40 && checked < 20; ++trial) {
        const Index n = 3, p = 2;
        const Matrix Xbar = random_low_rank(rng, n, p, 1);
        const Index m = 4 + static_cast<Index>(rng.uniform() * 2);
        const auto op = LinearOperatorSpec::dense_op(rng.gaussian_matrix(m, n * p), n, p);
        const Vector b = apply(op, Xbar);

        UniquenessReport rep;
        try {
            rep = certify_uniqueness(op, b, Xbar);
        } catch (const std::invalid_argument&) {
            continue;
        }
        if (rep.verdict != Verdict::Unique) continue;
        ++checked;

        const auto wider = LinearOperatorSpec::stacked(
            {op, LinearOperatorSpec::dense_op(rng.gaussian_matrix(2, n * p), n, p)});
        Vector b2(wider.m);
        b2.head(op.m) = b;
        b2.tail(2) = apply(wider.parts[1], Xbar);
        const UniquenessReport rep2 = certify_uniqueness(wider, b2, Xbar);
        CHECK(rep2.verdict != Verdict::NotUnique);
    }
    CHECK(checked == 20);
}

TEST_CASE("certify + solver: NotUnique norms agree with the solver optimum") {
    const auto tr = trace_functional();
    const Vector b = Vector::Ones(1);
    const SolveReport sol = solve_affine(tr, b);
    REQUIRE(sol.converged);

    CertifyConfig cfg;
    cfg.svd_opts.rank_tol = 1e-6;
    cfg.feas_tol = 1e-6;
    const UniquenessReport rep = certify_uniqueness(tr, b, sol.X, cfg);
    if (rep.verdict == Verdict::NotUnique) {
        REQUIRE(rep.second_solution.has_value());
        CHECK(std::abs(sol.nuclear_norm - nuclear_norm(*rep.second_solution)) <= 1e-6);
    }
}

TEST_CASE("certify: symmetric-part measurements decide through the span tier") {
    // Full-rank base point, kernel = the skew direction: tier 1 fails on the
    // span condition, but no skew direction can enter span W.
    Matrix payload(3, 4);
    payload << 1, 0, 0, 0,            // X11
               0, 0, 0, 1,            // X22
               0, 1 / std::sqrt(2.0), 1 / std::sqrt(2.0), 0;  // sym off-diagonal
    const auto op = LinearOperatorSpec::dense_op(payload, 2, 2);
    Matrix Xbar = Matrix::Zero(2, 2);
    Xbar(0, 0) = 2;
    Xbar(1, 1) = 1;
    const UniquenessReport rep = certify_uniqueness(op, apply(op, Xbar), Xbar);
    CHECK(rep.verdict == Verdict::Unique);
    CHECK(rep.decided_by == DecidedBy::SpanW);
    CHECK_FALSE(rep.assumption.parallel_span);
}
