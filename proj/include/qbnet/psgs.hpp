#pragma once

// Probing-signal generators: autonomous LTI systems xi' = Xi xi, u = Pi xi.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qbnet/core.hpp"
#include "qbnet/pencil.hpp"

namespace qbnet {

struct PSGS {
    Matrix Xi;
    Matrix Pi;
    Vector xi0;

    Index mxi() const { return Xi.rows(); }
    Index mu() const { return Pi.rows(); }

    void validate() const
    {
        require(Xi.rows() == Xi.cols(), "PSGS: Xi must be square");
        require(Pi.cols() == Xi.rows(), "PSGS: Pi must have as many columns as Xi");
        require(xi0.size() == Xi.rows(), "PSGS: xi0 length must match Xi");
    }
};

/// Single-channel multisine sum_j a_j sin(w_j t + phi_j).
/// Each w > 0 contributes a 2x2 rotation block, w == 0 a 1x1 zero block.
inline PSGS multisine(const std::vector<double>& freqs, const std::vector<double>& amplitudes,
                      const std::vector<double>& phases = {})
{
    require(freqs.size() == amplitudes.size(), "multisine: one amplitude per frequency");
    require(phases.empty() || phases.size() == freqs.size(), "multisine: one phase per frequency");
    Index n = 0;
    for (std::size_t j = 0; j < freqs.size(); ++j) {
        const double w = freqs[j];
        require(std::isfinite(w) && w >= 0.0, "multisine: frequencies must be finite and >= 0");
        for (std::size_t k = 0; k < j; ++k)
            if (freqs[k] == w)
                throw ParameterError("multisine: duplicate frequency " + std::to_string(w));
        n += w == 0.0 ? 1 : 2;
    }
    PSGS g;
    g.Xi = Matrix::Zero(n, n);
    g.Pi = Matrix::Zero(n == 0 ? 0 : 1, n);
    g.xi0 = Vector::Zero(n);
    Index o = 0;
    for (std::size_t j = 0; j < freqs.size(); ++j) {
        const double w = freqs[j], a = amplitudes[j];
        const double phi = phases.empty() ? 0.0 : phases[j];
        if (w == 0.0) {
            g.Pi(0, o) = a * std::sin(phi);
            g.xi0(o) = 1.0;
            o += 1;
            continue;
        }
        // xi = (cos + sin, cos - sin), so Pi xi = a sin(w t + phi)
        g.Xi(o, o + 1) = w;
        g.Xi(o + 1, o) = -w;
        g.xi0(o) = 1.0;
        g.xi0(o + 1) = 1.0;
        g.Pi(0, o) = 0.5 * a * (std::sin(phi) + std::cos(phi));
        g.Pi(0, o + 1) = 0.5 * a * (std::sin(phi) - std::cos(phi));
        o += 2;
    }
    return g;
}

/// Modal form of a PSGS: u(t) = sum_i exp(lambda_i t) psi_u(i).
struct PSGSEigen {
    std::vector<Complex> lambda;
    std::vector<CVector> psi_u;
    /// Eigenvalues with nonnegative imaginary part come first.
    Index m_plus = 0;
    Index mu = 0;

    Index size() const { return static_cast<Index>(lambda.size()); }
};

inline PSGSEigen eigen(const PSGS& g, double gap_tol = 1e-10)
{
    g.validate();
    PSGSEigen out;
    out.mu = g.mu();
    const Index n = g.mxi();
    if (n == 0) return out;

    Eigen::EigenSolver<Matrix> es(g.Xi, true);
    if (es.info() != Eigen::Success) throw NumericError("PSGS eigen: eigensolver failed");
    const CVector lam = es.eigenvalues();
    const CMatrix T = es.eigenvectors();
    const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            if (std::abs(lam(i) - lam(j)) <= gap_tol * scale) {
                std::ostringstream os;
                os << "PSGS eigen: repeated eigenvalue " << lam(i)
                   << "; non-diagonalizable generators are not supported";
                throw DomainError(os.str(), std::abs(lam(i) - lam(j)));
            }

    Eigen::PartialPivLU<CMatrix> lu(T);
    if (rcond(T) < 1e-12) throw DomainError("PSGS eigen: eigenvector matrix is singular");
    const CVector c = lu.solve(g.xi0.cast<Complex>());
    const CMatrix Pi = g.Pi.cast<Complex>();

    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    auto key = [&](Index i) {
        const Complex l = lam(i);
        const bool upper = l.imag() >= -gap_tol * scale;
        return std::tuple(upper ? 0 : 1, std::abs(l.imag()), l.real());
    };
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return key(a) < key(b); });
    for (const Index i : order) {
        Complex l = lam(i);
        if (std::abs(l.imag()) <= gap_tol * scale) l.imag(0.0);
        out.lambda.push_back(l);
        out.psi_u.push_back(c(i) * (Pi * T.col(i)));
        if (l.imag() >= 0.0) ++out.m_plus;
    }
    return out;
}

inline Vector u_at(const PSGSEigen& e, double t)
{
    CVector u = CVector::Zero(e.mu);
    for (Index i = 0; i < e.size(); ++i)
        u += std::exp(e.lambda[static_cast<std::size_t>(i)] * t) * e.psi_u[static_cast<std::size_t>(i)];
    if (u.size() == 0) return Vector();
    const double im = u.imag().cwiseAbs().maxCoeff(), re = u.real().norm();
    if (im > 1e-9 * std::max(1.0, re)) {
        std::ostringstream os;
        os << "u_at: probing signal has imaginary residue " << im << " at t = " << t;
        throw NumericError(os.str(), im);
    }
    return u.real();
}

/// Nonnegative integer exponent vectors of total order 1..K over `count` items.
inline std::vector<std::vector<int>> combinations_up_to(Index count, int K)
{
    std::vector<std::vector<int>> out;
    if (count <= 0 || K <= 0) return out;
    std::vector<int> c(static_cast<std::size_t>(count), 0);
    auto rec = [&](auto&& self, Index pos, int left) -> void {
        if (pos == count - 1) {
            for (int v = 0; v <= left; ++v) {
                c[static_cast<std::size_t>(pos)] = v;
                int total = 0;
                for (const int x : c) total += x;
                if (total > 0) out.push_back(c);
            }
            return;
        }
        for (int v = 0; v <= left; ++v) {
            c[static_cast<std::size_t>(pos)] = v;
            self(self, pos + 1, left - v);
        }
    };
    rec(rec, 0, K);
    return out;
}

struct AssumptionReport {
    bool on_axis = true;          // (a)
    bool distinct = true;         // (b)
    bool no_dc_alias = true;      // (c)
    bool off_plant_spectrum = true;  // (d)
    bool no_sampling_alias = true;   // (e)
    std::vector<std::string> messages;

    bool ok() const
    {
        return on_axis && distinct && no_dc_alias && off_plant_spectrum && no_sampling_alias;
    }
};

namespace detail {

/// Distance of x to the nearest multiple of 2 pi.
inline double wrapped(double x)
{
    const double two_pi = 2.0 * std::numbers::pi;
    return std::abs(x - two_pi * std::round(x / two_pi));
}

inline std::string combo_label(const std::vector<int>& c)
{
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << c[i];
    os << "]";
    return os.str();
}

} // namespace detail

/// Excitation checks (a)-(e) for a PSGS against a plant spectrum, up to order K
/// and sampling period T.
inline AssumptionReport check_assumptions(const PSGSEigen& e, const PencilSpectrum& plant, int K,
                                          double T, double tol = 1e-8)
{
    AssumptionReport r;
    const double scale = [&] {
        double s = 1.0;
        for (const Complex l : e.lambda) s = std::max(s, std::abs(l));
        return s;
    }();

    for (const Complex l : e.lambda)
        if (std::abs(l.real()) >= 1e-9) {
            r.on_axis = false;
            std::ostringstream os;
            os << "(a) eigenvalue " << l << " is off the imaginary axis";
            r.messages.push_back(os.str());
        }
    for (std::size_t i = 0; i < e.lambda.size(); ++i)
        for (std::size_t j = i + 1; j < e.lambda.size(); ++j)
            if (std::abs(e.lambda[i] - e.lambda[j]) <= tol * scale) {
                r.distinct = false;
                std::ostringstream os;
                os << "(b) eigenvalues " << i + 1 << " and " << j + 1 << " coincide";
                r.messages.push_back(os.str());
            }

    const auto plus = combinations_up_to(e.m_plus, K);
    for (const auto& c : plus) {
        Complex sum = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) sum += static_cast<double>(c[i]) * e.lambda[i];
        if (T > 0.0 && detail::wrapped(sum.imag() * T) <= tol) {
            r.no_dc_alias = false;
            r.messages.push_back("(c) combination " + detail::combo_label(c) +
                                 " of the upper eigenvalues aliases to zero frequency");
        }
        for (const Complex p : plant.eigenvalues)
            if (std::abs(sum - p) <= tol * std::max(1.0, std::abs(p))) {
                r.off_plant_spectrum = false;
                std::ostringstream os;
                os << "(d) combination " << detail::combo_label(c)
                   << " hits plant eigenvalue " << p;
                r.messages.push_back(os.str());
            }
    }

    // (e): distinct combination frequencies must stay distinct modulo 2 pi / T
    if (T > 0.0) {
        std::vector<std::pair<double, std::vector<int>>> freqs;
        for (const auto& c : combinations_up_to(e.size(), K)) {
            double f = 0.0;
            for (std::size_t i = 0; i < c.size(); ++i) f += c[i] * e.lambda[i].imag();
            bool seen = false;
            for (const auto& q : freqs)
                if (std::abs(q.first - f) <= tol * scale) seen = true;
            if (!seen) freqs.emplace_back(f, c);
        }
        for (std::size_t i = 0; i < freqs.size(); ++i)
            for (std::size_t j = i + 1; j < freqs.size(); ++j)
                if (detail::wrapped((freqs[i].first - freqs[j].first) * T) <= tol) {
                    r.no_sampling_alias = false;
                    std::ostringstream os;
                    os << "(e) frequencies " << freqs[i].first << " and " << freqs[j].first
                       << " rad/s coincide after sampling with T = " << T;
                    r.messages.push_back(os.str());
                }
    }
    return r;
}

} // namespace qbnet
