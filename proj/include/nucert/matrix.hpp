#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace nucert {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool is_finite(const Matrix& X) { return X.allFinite(); }

inline void require_finite(const Matrix& X, const char* what) {
    if (!X.allFinite())
        throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

inline void require_finite(const Vector& v, const char* what) {
    if (!v.allFinite())
        throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

/// Row-major flattening; the vectorization convention used by every
/// matricized operator and by the JSON "data" field.
inline Vector vec_rm(const Matrix& X) {
    Vector v(X.size());
    for (Index i = 0; i < X.rows(); ++i)
        for (Index j = 0; j < X.cols(); ++j) v[i * X.cols() + j] = X(i, j);
    return v;
}

inline Matrix unvec_rm(const Vector& v, Index rows, Index cols) {
    if (v.size() != rows * cols)
        throw std::invalid_argument("unvec_rm: size mismatch");
    Matrix X(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) X(i, j) = v[i * cols + j];
    return X;
}

inline Matrix sym_part(const Matrix& S) { return 0.5 * (S + S.transpose()); }
inline Matrix skew_part(const Matrix& S) { return 0.5 * (S - S.transpose()); }

inline double inner(const Matrix& X, const Matrix& Y) {
    return (X.array() * Y.array()).sum();
}

} // namespace nucert
