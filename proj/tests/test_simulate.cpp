#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "qbnet/simulate.hpp"
#include "qbnet/volterra.hpp"
#include "support.hpp"

using namespace qbnet;
using namespace qbtest;

namespace {

LumpedQBTI circuit() { return lump(preset_circuit(), SIPVector(circuit_true_theta())); }

LumpedQBTI scalar_linear()
{
    LumpedQBTI m;
    m.E = Matrix::Identity(1, 1);
    m.A = -Matrix::Identity(1, 1);
    m.B = Matrix::Identity(1, 1);
    m.C = Matrix::Identity(1, 1);
    m.D = Matrix::Zero(1, 1);
    m.Gamma_x = Matrix::Zero(1, 1);
    m.Gamma_u = Matrix::Zero(1, 1);
    return m;
}

// x' = -x + sin(t), x(0) = 0
double scalar_exact(double t) { return 0.5 * (std::sin(t) - std::cos(t) + std::exp(-t)); }

InputFn sine(double w, double a = 1.0)
{
    return [=](double t) { return Vector::Constant(1, a * std::sin(w * t)); };
}

double scalar_error(double dt)
{
    const auto tr = simulate_dae(scalar_linear(), sine(1.0), Vector::Zero(1), 5.0, dt);
    double e = 0.0;
    for (std::size_t k = 0; k < tr.size(); ++k)
        e = std::max(e, std::abs(tr.outputs[k](0) - scalar_exact(tr.times[k])));
    return e;
}

} // namespace

TEST(Dae, ZeroInputStaysAtRest)
{
    const auto m = circuit();
    const auto tr = simulate_dae(m, [](double) { return Vector::Zero(1); }, Vector::Zero(6), 3.0, 0.01);
    for (const auto& x : tr.states) EXPECT_EQ(x.norm(), 0.0);
}

TEST(Dae, LinearScalarMatchesClosedForm)
{
    EXPECT_LT(scalar_error(1e-3), 1e-6);
}

TEST(Dae, SecondOrderConvergence)
{
    const double e1 = scalar_error(0.02), e2 = scalar_error(0.01);
    EXPECT_GE(e1 / e2, 3.0);
}

TEST(Dae, CircuitAlgebraicRowsStaySatisfied)
{
    const auto m = circuit();
    const auto e = eigen(multisine({4.5}, {5.0}));
    const auto tr = simulate_dae(m, e, Vector::Zero(6), 5.0, 0.0025);
    for (const double r : tr.constraint_residuals) EXPECT_LE(r, 1e-9);
}

TEST(Dae, CircuitStepHalvingRatio)
{
    const auto m = circuit();
    const auto e = eigen(multisine({4.5}, {0.5}));
    const auto ref = simulate_dae(m, e, Vector::Zero(6), 2.0, 0.0005);
    auto err = [&](double dt) {
        const auto tr = simulate_dae(m, e, Vector::Zero(6), 2.0, dt);
        double d = 0.0;
        for (std::size_t k = 0; k < tr.size(); ++k) {
            const std::size_t j = static_cast<std::size_t>(std::lround(tr.times[k] / 0.0005));
            d = std::max(d, (tr.outputs[k] - ref.outputs[j]).cwiseAbs().maxCoeff());
        }
        return d;
    };
    EXPECT_GE(err(0.02) / err(0.01), 3.0);
}

TEST(Dae, InconsistentInitialValueIsProjected)
{
    const auto m = circuit();
    Vector x0 = Vector::Zero(6);
    x0(1) = 0.3;  // algebraic current of cell 1 is fixed by x1
    const auto tr = simulate_dae(m, [](double) { return Vector::Zero(1); }, x0, 0.1, 0.01);
    EXPECT_LE(tr.constraint_residuals.front(), 1e-9);
}

TEST(Dae, BadArgumentsThrow)
{
    const auto m = scalar_linear();
    EXPECT_THROW(simulate_dae(m, sine(1.0), Vector::Zero(1), 1.0, 0.0), ParameterError);
    EXPECT_THROW(simulate_dae(m, sine(1.0), Vector::Zero(2), 1.0, 0.1), ParameterError);
}

TEST(Cascade, LinearStageMatchesDae)
{
    const auto m = scalar_linear();
    const auto a = simulate_dae(m, sine(1.0), Vector::Zero(1), 3.0, 0.01);
    const auto b = simulate_cascade(m, sine(1.0), Vector::Zero(1), 3, 3.0, 0.01);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a.outputs[k](0), b.outputs[k](0), 1e-12);
}

TEST(Cascade, ApproachesSteadyStateForSmallAmplitude)
{
    const auto m = circuit();
    const auto e = eigen(multisine({4.5}, {0.5}));
    SteadyStateExpansion ss(m, e, 3);
    const Vector x0 = Vector::Zero(6);
    const auto tr = simulate_cascade(m, e, x0, 3, 170.0, 0.005);
    double dev = 0.0, peak = 0.0;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        if (tr.times[k] < 150.0) continue;
        const Vector y = ss(tr.times[k]);
        dev = std::max(dev, (tr.outputs[k] - y).cwiseAbs().maxCoeff());
        peak = std::max(peak, y.cwiseAbs().maxCoeff());
    }
    EXPECT_LT(dev, 0.05 * peak);
}

TEST(Cascade, FirstOrderErrorGrowsWithAmplitude)
{
    const auto m = circuit();
    double prev = 0.0;
    for (const double a : {0.5, 2.0, 5.0}) {
        const auto e = eigen(multisine({4.5}, {a}));
        const auto full = simulate_dae(m, e, Vector::Zero(6), 10.0, 0.005);
        const auto lin = simulate_cascade(m, e, Vector::Zero(6), 1, 10.0, 0.005);
        double dev = 0.0;
        for (std::size_t k = 0; k < full.size(); ++k)
            dev = std::max(dev, (full.outputs[k] - lin.outputs[k]).cwiseAbs().maxCoeff());
        EXPECT_GT(dev, prev) << "amplitude " << a;
        prev = dev;
    }
}

TEST(Sampling, DeterministicForFixedSeed)
{
    auto y = [](double t) { return Vector::Constant(2, std::sin(t)); };
    const auto a = sample_outputs(y, 2, 0.05, 100, 0.01, 42);
    const auto b = sample_outputs(y, 2, 0.05, 100, 0.01, 42);
    const auto c = sample_outputs(y, 2, 0.05, 100, 0.01, 43);
    ASSERT_EQ(a.y.size(), 101u);
    for (std::size_t k = 0; k < a.y.size(); ++k) EXPECT_EQ(a.y[k], b.y[k]);
    EXPECT_NE(a.y[5], c.y[5]);
}

TEST(Sampling, ZeroSigmaIsNoiseFree)
{
    auto y = [](double t) { return Vector::Constant(1, t); };
    const auto r = sample_outputs(y, 1, 0.1, 10, 0.0, 1);
    for (std::size_t k = 0; k <= 10; ++k) EXPECT_DOUBLE_EQ(r.y[k](0), 0.1 * static_cast<double>(k));
}

TEST(Sampling, NoiseHasRequestedMoments)
{
    auto y = [](double) { return Vector::Zero(1); };
    const auto r = sample_outputs(y, 1, 1.0, 200000, 0.5, 9);
    double s = 0.0, s2 = 0.0;
    for (const auto& v : r.y) {
        s += v(0);
        s2 += v(0) * v(0);
    }
    const double n = static_cast<double>(r.y.size());
    EXPECT_NEAR(s / n, 0.0, 5.0 * 0.5 / std::sqrt(n));
    EXPECT_NEAR(std::sqrt(s2 / n), 0.5, 0.005);
}

TEST(Sampling, TrajectoryGuards)
{
    const auto tr = simulate_dae(scalar_linear(), sine(1.0), Vector::Zero(1), 1.0, 0.1);
    EXPECT_THROW(sample_outputs(tr, 0.05, 10, 0.0, 1), ParameterError);
    EXPECT_THROW(sample_outputs(tr, 0.2, 10, 0.0, 1), ParameterError);
    EXPECT_NO_THROW(sample_outputs(tr, 0.2, 5, 0.0, 1));
}

TEST(Sampling, InterpolationIsAccurate)
{
    const auto tr = simulate_dae(scalar_linear(), sine(1.0), Vector::Zero(1), 5.0, 0.001);
    const auto r = sample_outputs(tr, 0.0137, 300, 0.0, 1);
    for (std::size_t k = 0; k < r.y.size(); ++k)
        EXPECT_NEAR(r.y[k](0), scalar_exact(0.0137 * static_cast<double>(k)), 1e-6);
}

TEST(Seeds, SplitSeedsAreDistinct)
{
    EXPECT_NE(split_seed(1, 0), split_seed(1, 1));
    EXPECT_NE(split_seed(1, 0), split_seed(2, 0));
    EXPECT_EQ(split_seed(7, 3), split_seed(7, 3));
}

TEST(Csv, HeaderAndPrecision)
{
    SampledRecord r;
    r.T = 0.5;
    r.y = {Vector::Constant(2, 1.0 / 3.0)};
    std::ostringstream os;
    write_csv(os, r);
    EXPECT_EQ(os.str(), "t,y1,y2\n0,0.33333333333333331,0.33333333333333331\n");
}
