#include "nucert/operators.hpp"

#include "nucert/solver.hpp"
#include "test_util.hpp"

using namespace nucert;

namespace {

LinearOperatorSpec random_kind(Rng& rng, int which, Index n, Index p) {
    switch (which % 4) {
    case 0: {
        const Index m = 1 + static_cast<Index>(rng.uniform() * (n * p));
        return LinearOperatorSpec::dense_op(rng.gaussian_matrix(m, n * p), n, p);
    }
    case 1: {
        std::vector<std::pair<Index, Index>> idx;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p; ++j)
                if (rng.uniform() < 0.5) idx.emplace_back(i, j);
        if (idx.empty()) idx.emplace_back(0, 0);
        return LinearOperatorSpec::entry_mask(std::move(idx), n, p);
    }
    case 2: {
        const Index q = 1 + static_cast<Index>(rng.uniform() * n);
        return LinearOperatorSpec::left_mul(rng.gaussian_matrix(q, n), p);
    }
    default:
        return LinearOperatorSpec::stacked(
            {LinearOperatorSpec::left_mul(rng.gaussian_matrix(1, n), p),
             LinearOperatorSpec::entry_mask({{0, 0}}, n, p)});
    }
}

} // namespace

TEST_CASE("counterexample operator: closed forms") {
    const auto op = LinearOperatorSpec::counterexample();
    Matrix Xbar = Matrix::Zero(2, 2);
    Xbar(0, 0) = 1;

    Vector expected(8);
    expected << 1, 0, 0, 0, 0, 0, 0, 0;
    CHECK((apply(op, Xbar) - expected).norm() <= 1e-12);

    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix Y = rng.gaussian_matrix(2, 2);
        const Matrix Z = rng.gaussian_matrix(2, 2);
        Vector y(8);
        y.head(4) = vec_rm(Y);
        y.tail(4) = vec_rm(Z);
        Matrix Bt(2, 2);
        Bt << 1, 0, 1, 0;
        const Matrix expected_adj = Bt * Y + 0.5 * (Z - Z.transpose());
        CHECK((adjoint(op, y) - expected_adj).norm() <= 1e-12);

        const Matrix X = rng.gaussian_matrix(2, 2);
        Matrix B(2, 2);
        B << 1, 1, 0, 0;
        Vector fwd(8);
        fwd.head(4) = vec_rm(B * X);
        fwd.tail(4) = vec_rm(0.5 * (X - X.transpose()));
        CHECK((apply(op, X) - fwd).norm() <= 1e-12);
    }
}

TEST_CASE("entry mask and dense forward/adjoint basics") {
    std::vector<std::pair<Index, Index>> all;
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 3; ++j) all.emplace_back(i, j);
    const auto mask = LinearOperatorSpec::entry_mask(all, 2, 3);
    Rng rng(5);
    const Matrix X = rng.gaussian_matrix(2, 3);
    CHECK((apply(mask, X) - vec_rm(X)).norm() == 0.0);

    const Matrix payload = rng.gaussian_matrix(3, 4);
    const auto dense = LinearOperatorSpec::dense_op(payload, 2, 2);
    const Matrix X2 = rng.gaussian_matrix(2, 2);
    CHECK((apply(dense, X2) - payload * vec_rm(X2)).norm() <= 1e-12);
    const Vector y = rng.gaussian_vector(3);
    CHECK((adjoint(dense, y) - unvec_rm(payload.transpose() * y, 2, 2)).norm() <= 1e-12);

    // adjoint of a selection scatters back
    const auto single = LinearOperatorSpec::entry_mask({{1, 2}}, 2, 3);
    Vector one(1);
    one << 4.0;
    Matrix scattered = adjoint(single, one);
    CHECK(scattered(1, 2) == 4.0);
    CHECK(scattered.norm() == 4.0);
}

TEST_CASE("operator constructors validate input") {
    CHECK_THROWS_AS(LinearOperatorSpec::entry_mask({{0, 0}, {0, 0}}, 2, 2),
                    std::invalid_argument);
    CHECK_THROWS_AS(LinearOperatorSpec::entry_mask({{2, 0}}, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(LinearOperatorSpec::dense_op(Matrix::Zero(2, 3), 2, 2),
                    std::invalid_argument);
    const auto op = LinearOperatorSpec::counterexample();
    CHECK_THROWS_AS(apply(op, Matrix::Zero(3, 2)), std::invalid_argument);
    CHECK_THROWS_AS(adjoint(op, Vector::Zero(7)), std::invalid_argument);
}

TEST_CASE("adjoint consistency fuzz across kinds") {
    Rng rng(7);
    int counter = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const Index p = 1 + static_cast<Index>(rng.uniform() * 3);
        const Index n = p + static_cast<Index>(rng.uniform() * 3);
        LinearOperatorSpec op = (trial % 5 == 4)
                                    ? LinearOperatorSpec::counterexample()
                                    : random_kind(rng, counter++, n, p);
        const Matrix X = rng.gaussian_matrix(op.n, op.p);
        const Vector y = rng.gaussian_vector(op.m);
        const double lhs = apply(op, X).dot(y);
        const double rhs = inner(X, adjoint(op, y));
        CHECK(std::abs(lhs - rhs) <= 1e-10 * (1 + X.norm() * y.norm()));
    }
}

TEST_CASE("kernel basis of the counterexample") {
    const auto op = LinearOperatorSpec::counterexample();
    const auto kb = kernel_basis(op);
    REQUIRE(kb.size() == 1);
    Matrix K(2, 2);
    K << 1, -1, -1, 1;
    K /= 2.0;  // unit Frobenius norm
    const double align = std::abs(inner(kb[0], K));
    CHECK(align == doctest::Approx(1).epsilon(1e-9));
    CHECK(apply(op, kb[0]).norm() <= 1e-10);

    const auto rb = range_adjoint_basis(op);
    REQUIRE(rb.size() == 3);
    for (const auto& Bm : rb) {
        // inside {[t s; t s]} + skew, which is exactly the orthogonal
        // complement of the kernel direction: a - c = b - d
        CHECK(std::abs(inner(Bm, K)) <= 1e-10);
        CHECK(std::abs(Bm(0, 0) - Bm(1, 0) - Bm(0, 1) + Bm(1, 1)) <= 1e-9);
    }
}

TEST_CASE("kernel and adjoint-range bases: trivial and fuzz cases") {
    std::vector<std::pair<Index, Index>> all;
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) all.emplace_back(i, j);
    CHECK(kernel_basis(LinearOperatorSpec::entry_mask(all, 2, 2)).empty());

    const auto single = LinearOperatorSpec::entry_mask({{0, 0}}, 2, 2);
    const auto rb = range_adjoint_basis(single);
    REQUIRE(rb.size() == 1);
    Matrix E = Matrix::Zero(2, 2);
    E(0, 0) = 1;
    CHECK(std::abs(inner(rb[0], E)) == doctest::Approx(1).epsilon(1e-12));

    Rng rng(9);
    const auto dense = LinearOperatorSpec::dense_op(rng.gaussian_matrix(3, 8), 4, 2);
    const auto kb = kernel_basis(dense);
    CHECK(kb.size() == 5);
    for (const auto& K : kb) CHECK(apply(dense, K).norm() <= 1e-10);

    // stacked kernel+range forms an orthonormal basis of the whole space
    for (int trial = 0; trial < 20; ++trial) {
        const auto op = random_kind(rng, trial, 3, 2);
        const auto kernel = kernel_basis(op);
        const auto range = range_adjoint_basis(op);
        std::vector<Matrix> all_b = kernel;
        all_b.insert(all_b.end(), range.begin(), range.end());
        REQUIRE(all_b.size() == 6);
        Matrix gram(6, 6);
        for (size_t i = 0; i < 6; ++i)
            for (size_t j = 0; j < 6; ++j) gram(i, j) = inner(all_b[i], all_b[j]);
        CHECK((gram - Matrix::Identity(6, 6)).norm() <= 1e-9);
    }
}

TEST_CASE("lift_padded: square identity and mask padding") {
    const auto ce = LinearOperatorSpec::counterexample();
    const auto lifted = lift_padded(ce);
    CHECK(lifted.kind == OpKind::Counterexample);

    const auto mask = LinearOperatorSpec::entry_mask({{0, 0}, {2, 1}}, 3, 2);
    const auto pm = lift_padded(mask);
    CHECK(pm.n == 3);
    CHECK(pm.p == 3);
    CHECK(pm.m == 2);
    Rng rng(21);
    const Matrix X = rng.gaussian_matrix(3, 3);
    const Matrix Xl = X.leftCols(2);
    CHECK((apply(pm, X) - apply(mask, Xl)).norm() <= 1e-14);

    // dense lift ignores the padded columns entirely
    const auto dense = LinearOperatorSpec::dense_op(rng.gaussian_matrix(4, 6), 3, 2);
    const auto pd = lift_padded(dense);
    CHECK((apply(pd, X) - apply(dense, Xl)).norm() <= 1e-12);
}

TEST_CASE("lift_padded: solving the padded problem reproduces the original") {
    Rng rng(33);
    Matrix A = rng.gaussian_matrix(2, 3);
    const auto op = LinearOperatorSpec::left_mul(A, 2);

    // feasible instance from a rank-one truth
    const Matrix truth = testutil::random_low_rank(rng, 3, 2, 1);
    ProblemInstance inst{op, apply(op, truth), std::nullopt};

    const ProblemInstance padded = lift_padded(inst);
    CHECK(padded.op.p == 3);
    CHECK(padded.b.size() == padded.op.m);

    SolverConfig cfg;
    cfg.max_iter = 20000;
    const SolveReport orig = solve_affine(inst.op, inst.b, cfg);
    const SolveReport lift = solve_affine(padded.op, padded.b, cfg);
    REQUIRE(orig.converged);
    REQUIRE(lift.converged);
    CHECK((lift.X.leftCols(2) - orig.X).norm() <= 1e-6);
    CHECK(lift.X.rightCols(1).norm() <= 1e-6);
}

TEST_CASE("lift_padded: stacked instances pad the left_mul segment of b") {
    Rng rng(211);
    const auto part_mask = LinearOperatorSpec::entry_mask({{0, 0}, {2, 1}}, 3, 2);
    const auto part_mul = LinearOperatorSpec::left_mul(rng.gaussian_matrix(2, 3), 2);
    const auto op = LinearOperatorSpec::stacked({part_mask, part_mul});

    const Matrix X = rng.gaussian_matrix(3, 2);
    ProblemInstance inst{op, apply(op, X), std::nullopt};
    const ProblemInstance lifted = lift_padded(inst);
    CHECK(lifted.op.p == 3);
    CHECK(lifted.op.m == 2 + 2 * 3);
    CHECK(lifted.b.size() == lifted.op.m);

    // the padded instance evaluates the padded truth consistently
    const Matrix Xpad = pad_square(X);
    CHECK((apply(lifted.op, Xpad) - lifted.b).norm() <= 1e-12);
}
