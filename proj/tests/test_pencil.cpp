#include <random>

#include <gtest/gtest.h>

#include "qbnet/pencil.hpp"
#include "support.hpp"

using namespace qbnet;
using namespace qbtest;

namespace {

Matrix diag2(double a, double b)
{
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

LumpedQBTI circuit() { return lump(preset_circuit(), SIPVector(circuit_true_theta())); }

} // namespace

TEST(Regular, OrdinaryStateSpace)
{
    std::mt19937_64 rng(1);
    EXPECT_TRUE(is_regular(Matrix::Identity(3, 3), rand_matrix(rng, 3, 3)));
}

TEST(Regular, PurelyAlgebraic)
{
    EXPECT_TRUE(is_regular(Matrix::Zero(2, 2), Matrix::Identity(2, 2)));
}

TEST(Regular, ZeroPencilIsSingular)
{
    EXPECT_FALSE(is_regular(Matrix::Zero(1, 1), Matrix::Zero(1, 1)));
    Matrix E = Matrix::Zero(2, 2), A = Matrix::Zero(2, 2);
    E(0, 0) = 1.0;  // second row identically zero
    A(0, 1) = 1.0;
    EXPECT_FALSE(is_regular(E, A));
}

TEST(ImpulseFree, IdentityMassMatrix)
{
    std::mt19937_64 rng(2);
    for (int k = 0; k < 10; ++k) EXPECT_TRUE(is_impulse_free(Matrix::Identity(4, 4), rand_matrix(rng, 4, 4)));
}

TEST(ImpulseFree, ConstantDeterminantHasImpulses)
{
    Matrix A(2, 2);
    A << 0, 1, 1, 0;
    EXPECT_FALSE(is_impulse_free(diag2(1, 0), A));
}

TEST(ImpulseFree, CircuitIsImpulseFree)
{
    const auto m = circuit();
    EXPECT_TRUE(is_impulse_free(m.E, m.A));
    EXPECT_EQ(determinant_degree(m.E, m.A), 4);
}

TEST(ImpulseFree, IrregularThrows)
{
    EXPECT_THROW(is_impulse_free(Matrix::Zero(1, 1), Matrix::Zero(1, 1)), DomainError);
}

TEST(GeneralizedEigs, Diagonal)
{
    const auto sp = generalized_eigs(Matrix::Identity(2, 2), diag2(-1, -2));
    ASSERT_EQ(sp.eigenvalues.size(), 2u);
    EXPECT_NEAR(std::abs(sp.eigenvalues[0] - Complex(-2, 0)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(sp.eigenvalues[1] - Complex(-1, 0)), 0.0, 1e-12);
}

TEST(GeneralizedEigs, NoFiniteEigenvalues)
{
    EXPECT_TRUE(generalized_eigs(Matrix::Zero(2, 2), Matrix::Identity(2, 2)).eigenvalues.empty());
}

TEST(GeneralizedEigs, CircuitPoles)
{
    // each cell: det = s (C V_th s + Is) / C up to sign -> {0, -Is / (C V_th)}
    const auto sp = generalized_eigs(circuit().E, circuit().A);
    ASSERT_EQ(sp.eigenvalues.size(), 4u);
    const double want[4] = {-3.0, -0.75, 0.0, 0.0};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(sp.eigenvalues[static_cast<std::size_t>(i)] - want[i]), 0.0, 1e-9);
    EXPECT_EQ(sp.rank_E, 4);
}

TEST(GeneralizedEigs, InvariantUnderRowScaling)
{
    std::mt19937_64 rng(3);
    const Matrix E = rand_matrix(rng, 4, 4), A = rand_matrix(rng, 4, 4);
    Eigen::VectorXd d(4);
    d << 1e-3, 10.0, 1.0, 300.0;
    const auto a = generalized_eigs(E, A), b = generalized_eigs(d.asDiagonal() * E, d.asDiagonal() * A);
    ASSERT_EQ(a.eigenvalues.size(), b.eigenvalues.size());
    for (std::size_t i = 0; i < a.eigenvalues.size(); ++i)
        EXPECT_LT(std::abs(a.eigenvalues[i] - b.eigenvalues[i]), 1e-8 * (1.0 + std::abs(a.eigenvalues[i])));
}

TEST(GeneralizedEigs, ConjugateClosure)
{
    std::mt19937_64 rng(4);
    const auto sp = generalized_eigs(rand_matrix(rng, 5, 5), rand_matrix(rng, 5, 5));
    for (const Complex l : sp.eigenvalues) {
        if (std::abs(l.imag()) < 1e-12) continue;
        bool found = false;
        for (const Complex m : sp.eigenvalues) found = found || std::abs(m - std::conj(l)) < 1e-8 * (1 + std::abs(l));
        EXPECT_TRUE(found) << l;
    }
}

TEST(Residues, DiagonalProjectors)
{
    const Matrix E = Matrix::Identity(2, 2), A = diag2(-1, -2);
    const auto sp = residues(E, A, generalized_eigs(E, A));
    ASSERT_EQ(sp.residues.size(), 2u);
    // eigenvalue order: -2 then -1
    CMatrix P2 = CMatrix::Zero(2, 2), P1 = CMatrix::Zero(2, 2);
    P2(1, 1) = 1.0;
    P1(0, 0) = 1.0;
    EXPECT_LT((sp.residues[0] - P2).norm(), 1e-12);
    EXPECT_LT((sp.residues[1] - P1).norm(), 1e-12);
    EXPECT_LT(sp.feedthrough.norm(), 1e-10);
}

TEST(Residues, RandomOrdinaryPencilReconstructs)
{
    std::mt19937_64 rng(5);
    const Matrix E = Matrix::Identity(3, 3), A = rand_matrix(rng, 3, 3);
    const auto sp = residues(E, A, generalized_eigs(E, A));
    for (int k = 0; k < 10; ++k) {
        const Complex s(rand_matrix(rng, 1, 1)(0), rand_matrix(rng, 1, 1)(0));
        CMatrix sum = sp.feedthrough;
        for (std::size_t i = 0; i < sp.eigenvalues.size(); ++i) sum += sp.residues[i] / (s - sp.eigenvalues[i]);
        EXPECT_LT((resolvent(E, A, s) - sum).norm(), 1e-8);
    }
    // conjugate eigenvalues carry conjugate residues
    for (std::size_t i = 0; i < sp.eigenvalues.size(); ++i)
        for (std::size_t j = 0; j < sp.eigenvalues.size(); ++j)
            if (i != j && std::abs(sp.eigenvalues[i] - std::conj(sp.eigenvalues[j])) < 1e-10)
                EXPECT_LT((sp.residues[i] - sp.residues[j].conjugate()).norm(), 1e-8);
}

TEST(Residues, DescriptorPencilNeedsConstantTerm)
{
    // one differential and one algebraic state: the resolvent is proper, not strictly proper
    Matrix E = diag2(1, 0), A(2, 2);
    A << -1, 1, 2, -4;
    const auto sp = residues(E, A, generalized_eigs(E, A));
    ASSERT_EQ(sp.eigenvalues.size(), 1u);
    EXPECT_NEAR(sp.eigenvalues[0].real(), -0.5, 1e-12);
    EXPECT_GT(sp.feedthrough.norm(), 0.1);
    EXPECT_LT((sp.feedthrough * E.cast<Complex>()).norm(), 1e-10);
    const Complex s(0.0, 2.0);
    EXPECT_LT((resolvent(E, A, s) - sp.residues[0] / (s - sp.eigenvalues[0]) - sp.feedthrough).norm(), 1e-8);
}

TEST(Residues, CircuitHasRepeatedZeroEigenvalue)
{
    const auto m = circuit();
    EXPECT_THROW(residues(m.E, m.A, generalized_eigs(m.E, m.A)), DomainError);
}

TEST(Residues, SingleCircuitCellReconstructs)
{
    Network net = preset_circuit();
    net.subsystems.pop_back();
    net.basis = SCMBasis({Matrix::Identity(1, 1)}, 1, 1);
    net.input_map = Matrix();
    const auto m = lump(net, SIPVector(Vector::Constant(1, 0.04)));
    const auto sp = residues(m.E, m.A, generalized_eigs(m.E, m.A));
    const Complex s(0.0, 2.0);
    CMatrix sum = sp.feedthrough;
    for (std::size_t i = 0; i < sp.eigenvalues.size(); ++i) sum += sp.residues[i] / (s - sp.eigenvalues[i]);
    EXPECT_LT((resolvent(m.E, m.A, s) - sum).norm(), 1e-8);
}

TEST(Resolvent, ScalarInverse)
{
    EXPECT_LT((resolvent(Matrix::Identity(2, 2), Matrix::Zero(2, 2), 2.0) - 0.5 * CMatrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(Resolvent, OnSpectrumThrows)
{
    try {
        resolvent(Matrix::Identity(2, 2), diag2(-1, -2), -1.0);
        FAIL();
    } catch (const SpectralCollision& e) {
        EXPECT_LT(e.value(), 1e-10);
    }
}

TEST(Resolvent, MultipliesBackToIdentity)
{
    std::mt19937_64 rng(6);
    const Matrix E = rand_matrix(rng, 4, 4), A = rand_matrix(rng, 4, 4);
    const Complex s(0.3, 1.7);
    const CMatrix X = resolvent(E, A, s);
    const CMatrix M = s * E.cast<Complex>() - A.cast<Complex>();
    EXPECT_LT((X * M - CMatrix::Identity(4, 4)).norm(), 1e-10);
}
