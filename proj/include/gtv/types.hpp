#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace gtv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;
using Index = Eigen::Index;

// Thrown on shape/precondition violations of public operations.
struct invalid_input : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Thrown when a numerical routine cannot produce a result (SVD failure,
// indefinite covariance, separable logistic data).
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw invalid_input(msg);
}

inline void require_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite()) throw invalid_input(what + " contains non-finite entries");
}

inline void require_square(const Matrix& m, const std::string& what) {
    if (m.rows() != m.cols())
        throw invalid_input(what + " must be square, got " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()));
}

inline double max_asymmetry(const Matrix& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

// Smallest eigenvalue of a symmetric matrix (dense solver).
inline double min_eigenvalue(const Matrix& sym) {
    if (sym.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw numerical_error("symmetric eigensolver failed");
    return es.eigenvalues()(0);
}

inline double max_eigenvalue(const Matrix& sym) {
    if (sym.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw numerical_error("symmetric eigensolver failed");
    return es.eigenvalues()(sym.rows() - 1);
}

inline double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

}  // namespace detail
}  // namespace gtv
