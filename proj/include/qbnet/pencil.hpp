#pragma once

// Analysis of the matrix pencil s E - A: regularity, impulse-freeness,
// finite generalized eigenvalues, partial-fraction residues and resolvents.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qbnet/core.hpp"

namespace qbnet {

struct PencilSpectrum {
    /// Finite generalized eigenvalues, sorted by (real, imag).
    std::vector<Complex> eigenvalues;
    /// Rank-one residues P_i of (sE - A)^{-1} = sum_i P_i / (s - lambda_i) + feedthrough.
    std::vector<CMatrix> residues;
    std::vector<CVector> right_vectors;
    std::vector<CVector> left_vectors;
    /// Constant (polynomial) part of the resolvent; zero when E is invertible.
    CMatrix feedthrough;
    Index rank_E = 0;
};

namespace detail {

inline double row_norm_product(const Matrix& m)
{
    double p = 1.0;
    for (Index i = 0; i < m.rows(); ++i) p *= m.row(i).norm();
    return p;
}

/// Rows of [E A] scaled to unit norm; zero rows are left alone.
inline void equilibrate_rows(Matrix& E, Matrix& A)
{
    for (Index i = 0; i < E.rows(); ++i) {
        const double n = std::sqrt(E.row(i).squaredNorm() + A.row(i).squaredNorm());
        if (n > 0.0) {
            E.row(i) /= n;
            A.row(i) /= n;
        }
    }
}

inline void check_square_pair(const Matrix& E, const Matrix& A, const char* who)
{
    if (E.rows() != E.cols() || A.rows() != A.cols() || E.rows() != A.rows())
        throw ParameterError(std::string(who) + ": E and A must be square with equal size");
}

inline Index numeric_rank(const Matrix& m, double rel_tol = 1e-10)
{
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    if (s(0) == 0.0) return 0;
    Index r = 0;
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > rel_tol * s(0)) ++r;
    return r;
}

/// Scale for the spectral radius of the finite part of the pencil.
inline double pencil_radius(const Matrix& E, const Matrix& A)
{
    Eigen::JacobiSVD<Matrix> svd(E);
    const auto& s = svd.singularValues();
    double smin = 0.0;
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > 1e-10 * s(0)) smin = s(i);
    if (smin == 0.0) return 1.0;
    Eigen::JacobiSVD<Matrix> sa(A);
    const double anorm = sa.singularValues().size() ? sa.singularValues()(0) : 0.0;
    return 1.0 + anorm / smin;
}

} // namespace detail

/// det(sE - A) not identically zero, decided from m_x + 1 sampled determinants.
inline bool is_regular(const Matrix& E, const Matrix& A, double tol = 1e-10)
{
    detail::check_square_pair(E, A, "is_regular");
    const Index n = E.rows();
    if (n == 0) return true;
    Matrix Es = E, As = A;
    detail::equilibrate_rows(Es, As);
    const double rho = detail::pencil_radius(Es, As);
    std::mt19937_64 rng(0x5eed'1234ULL);
    std::uniform_real_distribution<double> dist(-2.0 * rho, 2.0 * rho);
    for (Index k = 0; k <= n; ++k) {
        const double s = dist(rng);
        const Matrix M = s * Es - As;
        const double scale = detail::row_norm_product(M);
        if (scale == 0.0) continue;
        if (std::abs(M.partialPivLu().determinant()) > tol * scale) return true;
    }
    return false;
}

/// Degree of det(sE - A), from Chebyshev interpolation at m_x + 1 points.
inline Index determinant_degree(const Matrix& E, const Matrix& A, double tol = 1e-9)
{
    const Index n = E.rows();
    if (n == 0) return 0;
    Matrix Es = E, As = A;
    detail::equilibrate_rows(Es, As);
    const double rho = detail::pencil_radius(Es, As);
    const Index m = n + 1;
    std::vector<double> values(static_cast<std::size_t>(m));
    for (Index k = 0; k < m; ++k) {
        const double t = std::cos(std::numbers::pi * (2.0 * k + 1.0) / (2.0 * m));
        values[static_cast<std::size_t>(k)] = (rho * t * Es - As).partialPivLu().determinant();
    }
    // Chebyshev coefficients of the interpolant (exact for degree <= n).
    std::vector<double> coef(static_cast<std::size_t>(m), 0.0);
    double cmax = 0.0;
    for (Index j = 0; j < m; ++j) {
        double c = 0.0;
        for (Index k = 0; k < m; ++k)
            c += values[static_cast<std::size_t>(k)] *
                 std::cos(std::numbers::pi * j * (2.0 * k + 1.0) / (2.0 * m));
        c *= (j == 0 ? 1.0 : 2.0) / static_cast<double>(m);
        coef[static_cast<std::size_t>(j)] = c;
        cmax = std::max(cmax, std::abs(c));
    }
    if (cmax == 0.0) return 0;
    for (Index j = m - 1; j > 0; --j)
        if (std::abs(coef[static_cast<std::size_t>(j)]) > tol * cmax) return j;
    return 0;
}

/// deg det(sE - A) == rank E.
inline bool is_impulse_free(const Matrix& E, const Matrix& A)
{
    detail::check_square_pair(E, A, "is_impulse_free");
    if (!is_regular(E, A)) throw DomainError("is_impulse_free: pencil is not regular");
    return determinant_degree(E, A) == detail::numeric_rank(E);
}

/// Solve (sE - A) X = rhs. Throws SpectralCollision when s is (numerically)
/// a generalized eigenvalue.
template <typename Rhs>
CMatrix resolvent_apply(const Matrix& E, const Matrix& A, Complex s, const Rhs& rhs,
                        double gap = 1e-10)
{
    detail::check_square_pair(E, A, "resolvent");
    const CMatrix M = s * E.cast<Complex>() - A.cast<Complex>();
    if (M.rows() == 0) return CMatrix(0, rhs.cols());
    auto collide = [&](bool force) {
        Eigen::JacobiSVD<CMatrix> svd(M);
        const auto& sv = svd.singularValues();
        const double smin = sv(sv.size() - 1);
        if (force || sv(0) == 0.0 || smin <= gap * sv(0)) {
            std::ostringstream os;
            os << "resolvent: s = " << s << " lies on the spectrum of the pencil (sigma_min = "
               << smin << ")";
            throw SpectralCollision(os.str(), s, smin);
        }
    };
    Eigen::PartialPivLU<CMatrix> lu(M);
    // the rcond estimate can miss an exactly zero pivot
    const auto piv = lu.matrixLU().diagonal().cwiseAbs();
    if (!(lu.rcond() > 1e-11) || !(piv.minCoeff() > 0.0)) collide(false);
    CMatrix x = lu.solve(rhs);
    if (!x.allFinite()) collide(true);
    return x;
}

inline CMatrix resolvent(const Matrix& E, const Matrix& A, Complex s)
{
    return resolvent_apply(E, A, s, CMatrix::Identity(E.rows(), E.rows()));
}

/// Finite generalized eigenvalues of (E, A): A v = lambda E v.
inline PencilSpectrum generalized_eigs(const Matrix& E, const Matrix& A,
                                       double infinite_cutoff = 1e10)
{
    detail::check_square_pair(E, A, "generalized_eigs");
    PencilSpectrum out;
    out.rank_E = detail::numeric_rank(E);
    const Index n = E.rows();
    if (n == 0) return out;

    Matrix Es = E, As = A;
    detail::equilibrate_rows(Es, As);
    Eigen::GeneralizedEigenSolver<Matrix> ges;
    ges.compute(As, Es, false);
    if (ges.info() != Eigen::Success) {
        throw NumericError("generalized_eigs: QZ iteration did not converge for a " +
                           std::to_string(n) + "x" + std::to_string(n) + " pencil");
    }
    const auto alphas = ges.alphas();
    const auto betas = ges.betas();
    const double scale = std::max(1.0, As.norm());
    for (Index i = 0; i < n; ++i) {
        const double b = betas(i);
        if (std::abs(b) <= std::abs(alphas(i)) / infinite_cutoff || std::abs(b) < 1e-14 * scale)
            continue;
        const Complex lam = alphas(i) / b;
        if (std::abs(lam) >= infinite_cutoff) continue;
        out.eigenvalues.push_back(lam);
    }
    std::sort(out.eigenvalues.begin(), out.eigenvalues.end(), [](Complex a, Complex b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });

    const double anorm = A.norm(), enorm = E.norm();
    for (const Complex lam : out.eigenvalues) {
        const CMatrix M = lam * E.cast<Complex>() - A.cast<Complex>();
        Eigen::JacobiSVD<CMatrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const CVector v = svd.matrixV().col(n - 1);
        const CVector y = svd.matrixU().col(n - 1);
        const double res = (M * v).norm();
        if (res > 1e-8 * (anorm + std::abs(lam) * enorm)) {
            std::ostringstream os;
            os << "generalized_eigs: eigenvector residual " << res << " too large at lambda = "
               << lam;
            throw NumericError(os.str(), res);
        }
        out.right_vectors.push_back(v);
        out.left_vectors.push_back(y);
    }
    return out;
}

/// Residues of the resolvent for a regular, impulse-free pencil with simple
/// finite eigenvalues. The returned feedthrough is the constant part.
inline PencilSpectrum residues(const Matrix& E, const Matrix& A, PencilSpectrum spectrum)
{
    detail::check_square_pair(E, A, "residues");
    const Index n = E.rows();
    const auto& lam = spectrum.eigenvalues;
    for (std::size_t i = 0; i < lam.size(); ++i)
        for (std::size_t j = i + 1; j < lam.size(); ++j) {
            const double gap = std::abs(lam[i] - lam[j]);
            if (gap < 1e-8 * std::max(1.0, std::max(std::abs(lam[i]), std::abs(lam[j])))) {
                std::ostringstream os;
                os << "residues: repeated generalized eigenvalue " << lam[i]
                   << " (simple finite eigenvalues are required)";
                throw DomainError(os.str(), gap);
            }
        }
    if (spectrum.right_vectors.size() != lam.size()) spectrum = generalized_eigs(E, A);

    const CMatrix Ec = E.cast<Complex>();
    spectrum.residues.clear();
    for (std::size_t i = 0; i < lam.size(); ++i) {
        const CVector& x = spectrum.right_vectors[i];
        const CVector& y = spectrum.left_vectors[i];
        const Complex d = y.adjoint() * Ec * x;
        if (std::abs(d) < 1e-12 * x.norm() * y.norm() * std::max(1.0, E.norm()))
            throw DomainError("residues: left/right eigenvectors are E-orthogonal; the pencil is "
                              "not impulse-free or the eigenvalue is defective",
                              std::abs(d));
        spectrum.residues.push_back(x * y.adjoint() / d);
    }

    auto partial = [&](Complex s) {
        CMatrix sum = CMatrix::Zero(n, n);
        for (std::size_t i = 0; i < lam.size(); ++i) sum += spectrum.residues[i] / (s - lam[i]);
        return sum;
    };
    double radius = 1.0;
    for (const Complex l : lam) radius = std::max(radius, std::abs(l));
    const Complex s0(0.37 * radius + 0.5, 1.13 * radius + 0.5);
    spectrum.feedthrough = resolvent(E, A, s0) - partial(s0);

    std::mt19937_64 rng(0x7e5'1d0eULL);
    std::uniform_real_distribution<double> d(-2.0 * radius, 2.0 * radius);
    for (int k = 0; k < 10; ++k) {
        const Complex s(d(rng), d(rng));
        const CMatrix R = resolvent(E, A, s);
        const double err = (R - partial(s) - spectrum.feedthrough).norm();
        if (err > 1e-8 * std::max(1.0, R.norm())) {
            std::ostringstream os;
            os << "residues: resolvent reconstruction error " << err << " at s = " << s;
            throw NumericError(os.str(), err);
        }
    }
    return spectrum;
}

} // namespace qbnet
