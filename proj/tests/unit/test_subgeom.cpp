#include "nucert/subgeom.hpp"

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

// Stiefel member of the subdifferential at the frame's base point.
Matrix stiefel_subgradient(Rng& rng, const SubdiffFrame& fr) {
    const Index n = fr.n(), p = fr.p(), r = fr.rank;
    Matrix K = Matrix::Zero(n, p);
    K.topLeftCorner(r, r).setIdentity();
    if (p > r) K.bottomRightCorner(n - r, p - r) = rng.stiefel(n - r, p - r);
    return fr.U * K * fr.V.transpose();
}

} // namespace

TEST_CASE("polarize: always produces a polarizer") {
    CHECK(is_polarizer(diag2(2, 3), polarize(diag2(2, 3)), 1e-10));

    Matrix rot(2, 2);
    rot << 0, -1, 1, 0;
    const Matrix U = polarize(rot);
    CHECK(is_polarizer(rot, U, 1e-10));
    CHECK((rot * U.transpose() - Matrix::Identity(2, 2)).norm() <= 1e-10);

    const Matrix Z = Matrix::Zero(3, 2);
    CHECK(is_polarizer(Z, polarize(Z), 1e-12));

    Rng rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const Index p = 1 + static_cast<Index>(rng.uniform() * 4);
        const Index n = p + static_cast<Index>(rng.uniform() * 3);
        Matrix X = rng.gaussian_matrix(n, p);
        if (trial % 4 == 0) X = random_low_rank(rng, n, p, std::max<Index>(1, p - 1));
        CHECK(is_polarizer(X, polarize(X), 1e-8));
    }
    CHECK_THROWS_AS(polarize(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("is_polarizer: examples and Stiefel validation") {
    CHECK(is_polarizer(diag2(1, 0), Matrix::Identity(2, 2), 1e-12));
    Matrix swap(2, 2);
    swap << 0, 1, 1, 0;
    CHECK_FALSE(is_polarizer(diag2(1, 0), swap, 1e-12));
    CHECK(is_polarizer(diag2(1, 0), diag2(1, -1), 1e-12));
    CHECK_THROWS_AS(is_polarizer(diag2(1, 0), diag2(1, 2), 1e-12), std::invalid_argument);
}

TEST_CASE("subgrad_check: the beta interval at diag(1,0)") {
    const Matrix Xbar = diag2(1, 0);
    const SubdiffFrame fr = SubdiffFrame::from(Xbar);
    CHECK(fr.rank == 1);

    for (const double beta : {-1.0, -0.4, 0.0, 0.7, 1.0}) {
        const auto v = subgrad_check(fr, Xbar, diag2(1, beta), 1e-10);
        CHECK(v.member);
        CHECK(v.ri_member == (std::abs(beta) < 1.0 - 1e-10));
    }
    CHECK_FALSE(subgrad_check(fr, Xbar, diag2(1, 2), 1e-10).member);
    CHECK_FALSE(subgrad_check(fr, Xbar, diag2(0.5, 0), 1e-10).member);

    Rng rng(43);
    const Matrix X1 = random_low_rank(rng, 3, 2, 1);
    const SubdiffFrame f1 = SubdiffFrame::from(X1);
    CHECK(subgrad_check(f1, X1, X1 / X1.norm(), 1e-8).member);
}

TEST_CASE("parallel_basis: sizes and spans") {
    const auto b1 = parallel_basis(SubdiffFrame::from(diag2(1, 0)));
    REQUIRE(b1.size() == 1);
    Matrix e22 = Matrix::Zero(2, 2);
    e22(1, 1) = 1;
    CHECK(std::abs(inner(b1[0], e22)) == doctest::Approx(1).epsilon(1e-10));

    CHECK(parallel_basis(SubdiffFrame::from(diag2(2, 1))).empty());

    const auto b0 = parallel_basis(SubdiffFrame::from(Matrix::Zero(2, 2)));
    CHECK(b0.size() == 4);
    Matrix gram(4, 4);
    for (size_t i = 0; i < 4; ++i)
        for (size_t j = 0; j < 4; ++j) gram(i, j) = inner(b0[i], b0[j]);
    CHECK((gram - Matrix::Identity(4, 4)).norm() <= 1e-12);
}

TEST_CASE("is_flat_segment: examples") {
    CHECK(is_flat_segment(diag2(1, 0), diag2(0, 1), 1e-10));
    CHECK_FALSE(is_flat_segment(diag2(1, 0), -diag2(1, 0), 1e-10));
    Rng rng(47);
    const Matrix X = rng.gaussian_matrix(3, 3);
    CHECK(is_flat_segment(X, X, 1e-12));
}

TEST_CASE("common_polarizer: examples") {
    const auto U = common_polarizer(diag2(1, 0), diag2(0, 1), 1e-8);
    REQUIRE(U.has_value());
    CHECK(is_polarizer(diag2(1, 0), *U, 1e-8));
    CHECK(is_polarizer(diag2(0, 1), *U, 1e-8));

    Rng rng(53);
    const Matrix X = rng.gaussian_matrix(4, 2);
    const auto U2 = common_polarizer(X, 2 * X, 1e-8);
    REQUIRE(U2.has_value());
    CHECK(is_polarizer(X, *U2, 1e-8));

    CHECK_FALSE(common_polarizer(diag2(1, 0), -diag2(1, 0), 1e-8).has_value());

    const auto U3 = common_polarizer(Matrix::Zero(2, 2), diag2(3, 1), 1e-8);
    REQUIRE(U3.has_value());
    CHECK(is_polarizer(diag2(3, 1), *U3, 1e-8));
}

TEST_CASE("polarizer equivalence: membership, inner product, PSD product") {
    Rng rng(59);
    for (int trial = 0; trial < 200; ++trial) {
        const Index p = 1 + static_cast<Index>(rng.uniform() * 4);
        const Index n = p + static_cast<Index>(rng.uniform() * 3);
        const Index r = 1 + static_cast<Index>(rng.uniform() * p);
        const Matrix X = random_low_rank(rng, n, p, std::min(r, p));
        const SubdiffFrame fr = SubdiffFrame::from(X);

        const bool want_member = trial % 2 == 0;
        const Matrix U = want_member ? stiefel_subgradient(rng, fr) : rng.stiefel(n, p);

        const bool members = subgrad_check(fr, X, U, 1e-8).member;
        const bool pairing = std::abs(inner(U, X) - fr.nuclear()) <= 1e-8 * (1 + fr.nuclear());
        const bool polar = is_polarizer(X, U, 1e-8);
        CHECK(members == pairing);
        CHECK(pairing == polar);
        if (want_member) CHECK(members);
    }
}

TEST_CASE("flats: constructed pairs are flat, perturbed pairs are not") {
    Rng rng(61);
    int flat_ok = 0, perturbed_ok = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Index p = 2 + static_cast<Index>(rng.uniform() * 3);
        const Index n = p + static_cast<Index>(rng.uniform() * 2);
        const Matrix U = rng.orthogonal(n);
        const Matrix V = rng.orthogonal(p);
        Vector s(p), t(p);
        for (Index i = 0; i < p; ++i) {
            s[i] = rng.uniform();
            t[i] = rng.uniform();
        }
        t *= s.sum() / t.sum();  // equal nuclear norms
        Matrix S = Matrix::Zero(n, p), T = Matrix::Zero(n, p);
        S.topRows(p) = Matrix(s.asDiagonal());
        T.topRows(p) = Matrix(t.asDiagonal());
        const Matrix X1 = U * S * V.transpose();
        const Matrix X2 = U * T * V.transpose();

        if (is_flat_segment(X1, X2, 1e-8) && common_polarizer(X1, X2, 1e-8)) ++flat_ok;

        const Matrix X2p = X2 + 0.1 * rng.gaussian_matrix(n, p);
        if (!is_flat_segment(X1, X2p, 1e-8)) ++perturbed_ok;
    }
    CHECK(flat_ok == 100);
    CHECK(perturbed_ok == 100);
}

TEST_CASE("subgrad verdicts do not depend on the sweep order") {
    Rng rng(67);
    for (int trial = 0; trial < 50; ++trial) {
        // repeated singular values make the frame ambiguous
        const Index n = 4, p = 3;
        const Matrix U = rng.orthogonal(n);
        const Matrix V = rng.orthogonal(p);
        Matrix S = Matrix::Zero(n, p);
        S(0, 0) = 2.0;
        S(1, 1) = 1.0;
        S(2, 2) = 1.0;
        const Matrix X = U * S * V.transpose();

        const SubdiffFrame fwd = SubdiffFrame::from(X, {1e-9, SweepOrder::Forward});
        const SubdiffFrame bwd = SubdiffFrame::from(X, {1e-9, SweepOrder::Backward});
        CHECK(fwd.rank == bwd.rank);

        const Matrix cand = trial % 2 == 0 ? stiefel_subgradient(rng, fwd)
                                           : rng.stiefel(n, p);
        const auto a = subgrad_check(fwd, X, cand, 1e-8);
        const auto b = subgrad_check(bwd, X, cand, 1e-8);
        CHECK(a.member == b.member);
        CHECK(a.ri_member == b.ri_member);
    }
}
