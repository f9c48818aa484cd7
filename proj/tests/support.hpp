#pragma once

// Shared test fixtures: independent closed-form oracles and random models.

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "qbnet/circuit.hpp"
#include "qbnet/model.hpp"

namespace qbtest {

using namespace qbnet;

// Closed-form responses of the two-cell circuit, written directly from the
// scalar cell equations C v' = u - Is (exp(v / V_th) - 1), y = v.
inline Complex cell_h1(double C, double Is, double v, Complex s) { return v / (C * v * s + Is); }

inline Complex cell_h2(double C, double Is, double v, Complex s1, Complex s2)
{
    return -s1 / (s1 + s2) * Is * v / ((C * v * (s1 + s2) + Is) * (C * v * s1 + Is) * (C * v * s2 + Is));
}

inline const CircuitParams kCircuit{};

inline Complex circuit_h1(int cell, const Vector& th, Complex s)
{
    return cell == 0 ? cell_h1(kCircuit.C1, kCircuit.Is1, th(0), s)
                     : cell_h1(kCircuit.C2, kCircuit.Is2, th(1), s);
}

inline Complex circuit_h2(int cell, const Vector& th, Complex s1, Complex s2)
{
    return cell == 0 ? cell_h2(kCircuit.C1, kCircuit.Is1, th(0), s1, s2)
                     : cell_h2(kCircuit.C2, kCircuit.Is2, th(1), s1, s2);
}

inline double rel_err(Complex a, Complex b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline Matrix rand_matrix(std::mt19937_64& rng, Index r, Index c, double scale = 1.0)
{
    std::normal_distribution<double> d(0.0, scale);
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = d(rng);
    return m;
}

/// Random lumped QBTI model with a stable linear part. When `singular` is set
/// the last state is algebraic (E has a zero row/column) but the pencil stays
/// impulse-free.
inline LumpedQBTI random_lumped(std::mt19937_64& rng, Index mx, Index mu, Index my,
                                bool singular = false)
{
    LumpedQBTI m;
    m.E = Matrix::Identity(mx, mx);
    m.A = rand_matrix(rng, mx, mx, 0.5) - 2.0 * Matrix::Identity(mx, mx);
    if (singular && mx >= 2) {
        m.E(mx - 1, mx - 1) = 0.0;
        m.A(mx - 1, mx - 1) = -3.0;  // algebraic row stays solvable for the last state
    }
    m.B = rand_matrix(rng, mx, mu);
    m.C = rand_matrix(rng, my, mx);
    m.D = rand_matrix(rng, my, mu, 0.3);
    m.Gamma_x = rand_matrix(rng, mx, mx * mx, 0.3);
    m.Gamma_u = rand_matrix(rng, mx, mx * mu, 0.3);
    m.theta = SIPVector(Vector::Zero(0));
    return m;
}

/// Random two-subsystem network with m_x_i = 2 and a three-element SCM basis.
inline Network random_network(std::mt19937_64& rng, bool singular_E = false)
{
    Network net;
    const Index mx = 2, mu = 1, mv = 2, mz = 2, my = 1;
    for (int i = 0; i < 2; ++i) {
        auto s = SubsystemMatrices::zeros(mx, mu, mv, mz, my);
        s.E = Matrix::Identity(mx, mx);
        if (singular_E && i == 1) s.E(1, 1) = 0.0;
        s.A_xx = rand_matrix(rng, mx, mx, 0.5) - 2.0 * Matrix::Identity(mx, mx);
        s.B_xv = rand_matrix(rng, mx, mv, 0.5);
        s.B_xu = rand_matrix(rng, mx, mu);
        s.Gamma_xx = rand_matrix(rng, mx, mx * mx, 0.3);
        s.Gamma_xv = rand_matrix(rng, mx, mx * mv, 0.3);
        s.Gamma_xu = rand_matrix(rng, mx, mx * mu, 0.3);
        s.C_zx = rand_matrix(rng, mz, mx, 0.5);
        s.D_zv = rand_matrix(rng, mz, mv, 0.2);
        s.D_zu = rand_matrix(rng, mz, mu, 0.3);
        s.C_yx = rand_matrix(rng, my, mx);
        s.D_yv = rand_matrix(rng, my, mv, 0.3);
        s.D_yu = rand_matrix(rng, my, mu, 0.3);
        net.subsystems.emplace_back(std::move(s), i + 1);
    }
    std::vector<Matrix> basis;
    for (int k = 0; k < 3; ++k) basis.push_back(rand_matrix(rng, 4, 4, 0.3));
    net.basis = SCMBasis(basis, 4, 4);
    return net;
}

/// Right-hand side of the network obtained by solving the interconnection
/// v = Theta z, z = C_zx x + D_zv v + D_zu u per point, with each subsystem's
/// quadratic terms formed from its own x(i), v(i), u(i).
inline Vector network_rhs_oracle(const Network& net, const Vector& theta, const Vector& x,
                                 const Vector& u_ext)
{
    const Matrix Theta = scm(net.basis, SIPVector(theta));
    const Vector u = net.input_matrix() * u_ext;
    // z = Cx + Dzv v + Dzu u, v = Theta z  =>  v = Theta (I - Dzv Theta)^{-1} (Cx + Dzu u)
    const Index mz = net.mz();
    Matrix Czx = Matrix::Zero(mz, net.mx()), Dzv = Matrix::Zero(mz, net.mv()), Dzu = Matrix::Zero(mz, u.size());
    Index oz = 0, ox = 0, ov = 0, ou = 0;
    for (const auto& s : net.subsystems) {
        const auto& m = s.matrices();
        Czx.block(oz, ox, s.mz(), s.mx()) = m.C_zx;
        Dzv.block(oz, ov, s.mz(), s.mv()) = m.D_zv;
        Dzu.block(oz, ou, s.mz(), s.mu()) = m.D_zu;
        oz += s.mz(); ox += s.mx(); ov += s.mv(); ou += s.mu();
    }
    const Vector w = Czx * x + Dzu * u;
    const Vector z = (Matrix::Identity(mz, mz) - Dzv * Theta).lu().solve(w);
    const Vector v = Theta * z;

    Vector f(net.mx());
    ox = ov = ou = 0;
    for (const auto& s : net.subsystems) {
        const auto& m = s.matrices();
        const Vector xi = x.segment(ox, s.mx()), vi = v.segment(ov, s.mv()), ui = u.segment(ou, s.mu());
        Vector fi = m.A_xx * xi + m.B_xv * vi + m.B_xu * ui;
        for (Index j = 0; j < s.mx(); ++j) {
            for (Index k = 0; k < s.mx(); ++k) fi += m.Gamma_xx.col(j * s.mx() + k) * xi(j) * xi(k);
            for (Index k = 0; k < s.mv(); ++k) fi += m.Gamma_xv.col(j * s.mv() + k) * xi(j) * vi(k);
            for (Index k = 0; k < s.mu(); ++k) fi += m.Gamma_xu.col(j * s.mu() + k) * xi(j) * ui(k);
        }
        f.segment(ox, s.mx()) = fi;
        ox += s.mx(); ov += s.mv(); ou += s.mu();
    }
    return f;
}

} // namespace qbtest
