#pragma once

#include "nucert/matrix.hpp"

#include <Eigen/QR>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace nucert {

/// Seeded sampler for matrices used by the search heuristics and the
/// property harness. mt19937_64 plus hand-rolled Box-Muller, so streams
/// are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    Vector gaussian_vector(Index m) {
        Vector v(m);
        for (Index i = 0; i < m; ++i) v[i] = gaussian();
        return v;
    }

    Matrix gaussian_matrix(Index n, Index p) {
        Matrix X(n, p);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p; ++j) X(i, j) = gaussian();
        return X;
    }

    /// Haar-ish orthogonal matrix: QR of a Gaussian with sign-fixed R diagonal.
    Matrix orthogonal(Index n) {
        const Matrix G = gaussian_matrix(n, n);
        Eigen::HouseholderQR<Matrix> qr(G);
        Matrix Q = qr.householderQ();
        const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
        for (Index i = 0; i < n; ++i)
            if (R(i, i) < 0) Q.col(i) = -Q.col(i);
        return Q;
    }

    Matrix stiefel(Index n, Index p) { return orthogonal(n).leftCols(p); }

    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

} // namespace nucert
