#pragma once

// Shared numeric types, error classes and Kronecker helpers.

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qbnet {

using Real = double;
using Complex = std::complex<double>;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

using Index = Eigen::Index;

/// Invalid argument: dimension mismatch, bad configuration value.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A mathematical precondition of the model does not hold
/// (ill-posed interconnection, irregular pencil, repeated eigenvalues...).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what, double value = 0.0)
        : std::domain_error(what), value_(value) {}
    /// Diagnostic quantity attached to the failure (rcond, gap, ...).
    double value() const noexcept { return value_; }

private:
    double value_;
};

/// A numerical procedure failed (singular solve, Newton divergence, ...).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what, double value = 0.0)
        : std::runtime_error(what), value_(value) {}
    double value() const noexcept { return value_; }

private:
    double value_;
};

/// Raised when a resolvent is requested at (or numerically on) a
/// generalized eigenvalue of the pencil.
class SpectralCollision : public NumericError {
public:
    SpectralCollision(const std::string& what, Complex where, double min_sv)
        : NumericError(what, min_sv), where_(where) {}
    Complex where() const noexcept { return where_; }

private:
    Complex where_;
};

// Kronecker index convention: (x (x) y)[j * dim(y) + k] = x_j * y_k.

template <typename DerivedA, typename DerivedB>
auto kron(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
{
    using Scalar = typename Eigen::ScalarBinaryOpTraits<typename DerivedA::Scalar,
                                                        typename DerivedB::Scalar>::ReturnType;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows() * b.rows(),
                                                              a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

template <typename DerivedA, typename DerivedB>
auto kron_vec(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
{
    using Scalar = typename Eigen::ScalarBinaryOpTraits<typename DerivedA::Scalar,
                                                        typename DerivedB::Scalar>::ReturnType;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(a.size() * b.size());
    for (Index i = 0; i < a.size(); ++i)
        out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

/// Reciprocal 2-norm condition number (sigma_min / sigma_max); 0 for empty input is
/// reported as 1.
template <typename Derived>
double rcond(const Eigen::MatrixBase<Derived>& m)
{
    if (m.size() == 0) return 1.0;
    Eigen::JacobiSVD<Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>> svd(
        m.eval());
    const auto& s = svd.singularValues();
    if (s(0) == 0.0) return 0.0;
    return s(s.size() - 1) / s(0);
}

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw ParameterError(msg);
}

} // namespace qbnet
