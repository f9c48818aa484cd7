#pragma once

// Time-domain simulation of lumped QBTI descriptor models with the implicit
// trapezoidal rule, the Volterra-cascade reference, and noisy sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qbnet/core.hpp"
#include "qbnet/model.hpp"
#include "qbnet/psgs.hpp"

namespace qbnet {

using InputFn = std::function<Vector(double)>;

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> outputs;
    /// Max |algebraic row residual| at each accepted step.
    std::vector<double> constraint_residuals;

    std::size_t size() const { return times.size(); }

    /// Cubic Hermite interpolation of the outputs, slopes from finite differences.
    Vector output_at(double t) const
    {
        const std::size_t n = times.size();
        require(n >= 2, "trajectory has fewer than two samples");
        require(t >= times.front() - 1e-12 && t <= times.back() + 1e-9 * std::max(1.0, times.back()),
                "output_at: t outside the simulated interval");
        std::size_t i = static_cast<std::size_t>(
            std::upper_bound(times.begin(), times.end(), t) - times.begin());
        i = std::clamp<std::size_t>(i, 1, n - 1) - 1;
        const double h = times[i + 1] - times[i];
        const double s = std::clamp((t - times[i]) / h, 0.0, 1.0);
        auto slope = [&](std::size_t j) -> Vector {
            if (j == 0) return (outputs[1] - outputs[0]) / (times[1] - times[0]);
            if (j == n - 1) return (outputs[n - 1] - outputs[n - 2]) / (times[n - 1] - times[n - 2]);
            return (outputs[j + 1] - outputs[j - 1]) / (times[j + 1] - times[j - 1]);
        };
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
        return h00 * outputs[i] + h10 * h * slope(i) + h01 * outputs[i + 1] + h11 * h * slope(i + 1);
    }
};

struct SampledRecord {
    double T = 0.0;
    std::vector<Vector> y;  // N_d + 1 samples at t_k = k T
    double sigma = 0.0;
    std::uint64_t seed = 0;

    std::size_t nd() const { return y.empty() ? 0 : y.size() - 1; }
};

struct SimOptions {
    double newton_tol = 1e-10;
    int newton_max_iter = 25;
};

namespace detail {

/// Orthogonal row compression of E: the first `rank` rows of U^T E are
/// independent, the remaining rows of U^T (E x' = f) are algebraic.
struct RowSplit {
    Matrix Ut;   // U^T
    Matrix Ed;   // (U^T E) differential rows
    Matrix N;    // null-space basis of E
    Index rank = 0;
};

inline RowSplit split_rows(const Matrix& E)
{
    RowSplit r;
    const Index n = E.rows();
    Eigen::JacobiSVD<Matrix> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    r.rank = 0;
    for (Index i = 0; i < s.size(); ++i)
        if (s(0) > 0.0 && s(i) > 1e-10 * s(0)) ++r.rank;
    r.Ut = svd.matrixU().transpose();
    r.Ed = (r.Ut * E).topRows(r.rank);
    r.N = svd.matrixV().rightCols(n - r.rank);
    return r;
}

inline Matrix jacobian(const LumpedQBTI& m, const Vector& x, const Vector& u)
{
    const Index n = m.mx();
    const Matrix I = Matrix::Identity(n, n);
    Matrix J = m.A + m.Gamma_x * (kron(x, I) + kron(I, x));
    if (u.size() > 0) J += m.Gamma_u * kron(I, u);
    return J;
}

inline double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

} // namespace detail

/// Solve the algebraic rows for the null-space components of x0, keeping E x0.
inline Vector consistent_initial(const LumpedQBTI& m, const Vector& x0, const Vector& u0,
                                 const SimOptions& opt = {})
{
    const auto rs = detail::split_rows(m.E);
    const Index na = m.mx() - rs.rank;
    if (na == 0) return x0;
    const Matrix Ua = rs.Ut.bottomRows(na);
    Vector x = x0;
    for (int it = 0; it < opt.newton_max_iter; ++it) {
        const Vector g = Ua * m.rhs(x, u0);
        const Matrix Jz = Ua * detail::jacobian(m, x, u0) * rs.N;
        Eigen::FullPivLU<Matrix> lu(Jz);
        if (!lu.isInvertible())
            throw DomainError("consistent_initial: algebraic rows are singular in the free "
                              "components; the pencil is not impulse-free");
        const Vector dz = lu.solve(-g);
        x += rs.N * dz;
        if (detail::max_abs(dz) <= opt.newton_tol * (1.0 + detail::max_abs(x))) {
            if (detail::max_abs(Ua * m.rhs(x, u0)) <= 1e-8 * (1.0 + detail::max_abs(x)))
                return x;
        }
    }
    throw DomainError("consistent_initial: Newton did not find consistent initial values");
}

/// Implicit trapezoidal integration on [0, t_end] with fixed step dt.
inline Trajectory simulate_dae(const LumpedQBTI& m, const InputFn& u, const Vector& x0,
                               double t_end, double dt, const SimOptions& opt = {})
{
    m.validate();
    require(dt > 0.0 && t_end >= 0.0, "simulate_dae: need dt > 0 and t_end >= 0");
    require(x0.size() == m.mx(), "simulate_dae: x0 has wrong length");
    const auto rs = detail::split_rows(m.E);
    const Index n = m.mx(), r = rs.rank;
    const Matrix Ud = rs.Ut.topRows(r), Ua = rs.Ut.bottomRows(n - r);
    const std::size_t steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));

    Trajectory tr;
    tr.times.reserve(steps + 1);
    tr.states.reserve(steps + 1);
    tr.outputs.reserve(steps + 1);
    tr.constraint_residuals.reserve(steps + 1);

    Vector un = u(0.0);
    Vector x = consistent_initial(m, x0, un, opt);
    Vector fn = m.rhs(x, un);
    auto record = [&](double t, const Vector& xs, const Vector& us, const Vector& f) {
        tr.times.push_back(t);
        tr.states.push_back(xs);
        tr.outputs.push_back(m.output(xs, us));
        tr.constraint_residuals.push_back(detail::max_abs(Ua * f));
    };
    record(0.0, x, un, fn);

    for (std::size_t k = 0; k < steps; ++k) {
        const double t1 = std::min(t_end, static_cast<double>(k + 1) * dt);
        const double h = t1 - tr.times.back();
        const Vector u1 = u(t1);
        const Vector base = rs.Ed * x / h + 0.5 * (Ud * fn);
        Vector y = x;  // Newton iterate for x_{n+1}
        bool ok = false;
        Vector f1;
        for (int it = 0; it < opt.newton_max_iter; ++it) {
            f1 = m.rhs(y, u1);
            Vector F(n);
            F.head(r) = rs.Ed * y / h - 0.5 * (Ud * f1) - base;
            F.tail(n - r) = Ua * f1;
            const Matrix J = detail::jacobian(m, y, u1);
            Matrix JF(n, n);
            JF.topRows(r) = rs.Ed / h - 0.5 * (Ud * J);
            JF.bottomRows(n - r) = Ua * J;
            const Vector d = JF.partialPivLu().solve(-F);
            if (!d.allFinite()) break;
            y += d;
            if (detail::max_abs(d) <= opt.newton_tol * (1.0 + detail::max_abs(y))) {
                f1 = m.rhs(y, u1);
                ok = true;
                break;
            }
        }
        if (!ok) {
            std::ostringstream os;
            os << "simulate_dae: Newton failed to converge at step " << k + 1 << " (t = " << t1
               << ")";
            throw NumericError(os.str(), t1);
        }
        x = y;
        fn = f1;
        record(t1, x, u1, fn);
    }
    return tr;
}

inline Trajectory simulate_dae(const LumpedQBTI& m, const PSGSEigen& psgs, const Vector& x0,
                               double t_end, double dt, const SimOptions& opt = {})
{
    return simulate_dae(m, [&](double t) { return u_at(psgs, t); }, x0, t_end, dt, opt);
}

/// Volterra cascade: K coupled linear descriptor systems whose states sum to
/// the order-K approximation of the nonlinear response. x0 seeds stage 1.
inline Trajectory simulate_cascade(const LumpedQBTI& m, const InputFn& u, const Vector& x0, int K,
                                   double t_end, double dt)
{
    m.validate();
    require(K >= 1, "simulate_cascade: K must be >= 1");
    require(dt > 0.0 && t_end >= 0.0, "simulate_cascade: need dt > 0 and t_end >= 0");
    const auto rs = detail::split_rows(m.E);
    const Index n = m.mx(), r = rs.rank;
    const Matrix Ud = rs.Ut.topRows(r), Ua = rs.Ut.bottomRows(n - r);
    const std::size_t steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    const std::size_t Ks = static_cast<std::size_t>(K);

    // forcing of stage k from lower stages
    auto forcing = [&](const std::vector<Vector>& xs, std::size_t k, const Vector& uu) -> Vector {
        if (k == 0) return m.B * uu;
        Vector g = Vector::Zero(n);
        for (std::size_t l = 0; l < k; ++l) g += m.Gamma_x * kron_vec(xs[l], xs[k - 1 - l]);
        if (uu.size() > 0) g += m.Gamma_u * kron_vec(xs[k - 1], uu);
        return g;
    };

    // stage-wise consistency: A_a x + g_a = 0 on the null-space directions
    const Matrix Aa = Ua * m.A;
    Eigen::FullPivLU<Matrix> init_lu(Aa * rs.N);
    Vector u0 = u(0.0);
    std::vector<Vector> xs(Ks, Vector::Zero(n));
    xs[0] = x0;
    for (std::size_t k = 0; k < Ks; ++k) {
        if (n - r == 0) break;
        const Vector g = Aa * xs[k] + Ua * forcing(xs, k, u0);
        if (!init_lu.isInvertible())
            throw DomainError("simulate_cascade: algebraic rows are singular; not impulse-free");
        xs[k] += rs.N * init_lu.solve(-g);
    }

    Trajectory tr;
    auto record = [&](double t, const Vector& uu) {
        Vector sum = Vector::Zero(n);
        for (const auto& v : xs) sum += v;
        tr.times.push_back(t);
        tr.states.push_back(sum);
        tr.outputs.push_back(m.output(sum, uu));
        double res = 0.0;
        for (std::size_t k = 0; k < Ks; ++k)
            res = std::max(res, detail::max_abs(Aa * xs[k] + Ua * forcing(xs, k, uu)));
        tr.constraint_residuals.push_back(res);
    };
    record(0.0, u0);

    Matrix lhs(n, n);
    Eigen::PartialPivLU<Matrix> lu;
    double h_cached = -1.0;
    std::vector<Vector> g_prev(Ks);
    for (std::size_t k = 0; k < Ks; ++k) g_prev[k] = forcing(xs, k, u0);

    for (std::size_t step = 0; step < steps; ++step) {
        const double t1 = std::min(t_end, static_cast<double>(step + 1) * dt);
        const double h = t1 - tr.times.back();
        if (h != h_cached) {
            lhs.topRows(r) = rs.Ed / h - 0.5 * (Ud * m.A);
            lhs.bottomRows(n - r) = -Aa;
            lu.compute(lhs);
            h_cached = h;
        }
        const Vector u1 = u(t1);
        std::vector<Vector> next(Ks);
        std::vector<Vector> g_next(Ks);
        for (std::size_t k = 0; k < Ks; ++k) {
            // forcing at t1 depends only on stages < k, already advanced
            std::vector<Vector> mix(xs);
            for (std::size_t l = 0; l < k; ++l) mix[l] = next[l];
            g_next[k] = forcing(mix, k, u1);
            Vector rhs(n);
            rhs.head(r) = rs.Ed * xs[k] / h + 0.5 * (Ud * (m.A * xs[k] + g_prev[k] + g_next[k]));
            rhs.tail(n - r) = Ua * g_next[k];
            next[k] = lu.solve(rhs);
        }
        xs = std::move(next);
        g_prev = std::move(g_next);
        record(t1, u1);
    }
    return tr;
}

inline Trajectory simulate_cascade(const LumpedQBTI& m, const PSGSEigen& psgs, const Vector& x0,
                                   int K, double t_end, double dt)
{
    return simulate_cascade(m, [&](double t) { return u_at(psgs, t); }, x0, K, t_end, dt);
}

/// Seed splitting for replicas: seed_k = splitmix64(master + (k + 1) * golden).
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t k)
{
    std::uint64_t z = master + (k + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Samples y(kT), k = 0..N_d, plus i.i.d. Gaussian noise drawn in time-major,
/// channel-minor order from mt19937_64(seed).
inline SampledRecord sample_outputs(const std::function<Vector(double)>& y, Index my, double T,
                                    std::size_t nd, double sigma, std::uint64_t seed)
{
    require(T > 0.0, "sample_outputs: T must be positive");
    require(sigma >= 0.0, "sample_outputs: sigma must be nonnegative");
    SampledRecord rec;
    rec.T = T;
    rec.sigma = sigma;
    rec.seed = seed;
    rec.y.reserve(nd + 1);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t k = 0; k <= nd; ++k) {
        Vector v = y(static_cast<double>(k) * T);
        require(v.size() == my, "sample_outputs: output has wrong length");
        for (Index c = 0; c < my; ++c) {
            const double n = noise(rng);
            if (sigma > 0.0) v(c) += sigma * n;
        }
        rec.y.push_back(std::move(v));
    }
    return rec;
}

inline SampledRecord sample_outputs(const Trajectory& tr, double T, std::size_t nd, double sigma,
                                    std::uint64_t seed)
{
    require(tr.size() >= 2, "sample_outputs: trajectory is too short");
    const double dt = tr.times[1] - tr.times[0];
    if (dt > T * (1.0 + 1e-12))
        throw ParameterError("sample_outputs: integration step exceeds the sampling period");
    const double t_end = tr.times.back();
    if (T * static_cast<double>(nd) > t_end * (1.0 + 1e-12) + 1e-12)
        throw ParameterError("sample_outputs: T * N_d exceeds the simulated horizon");
    const Index my = tr.outputs.front().size();
    return sample_outputs([&](double t) { return tr.output_at(std::min(t, t_end)); }, my, T, nd,
                          sigma, seed);
}

namespace detail {

inline void write_row(std::ostream& os, double t, const Vector& v)
{
    os << std::setprecision(17) << t;
    for (Index i = 0; i < v.size(); ++i) os << ',' << v(i);
    os << '\n';
}

inline void write_header(std::ostream& os, Index my)
{
    os << 't';
    for (Index i = 0; i < my; ++i) os << ",y" << i + 1;
    os << '\n';
}

} // namespace detail

inline void write_csv(std::ostream& os, const Trajectory& tr)
{
    detail::write_header(os, tr.outputs.empty() ? 0 : tr.outputs.front().size());
    for (std::size_t k = 0; k < tr.size(); ++k) detail::write_row(os, tr.times[k], tr.outputs[k]);
}

inline void write_csv(std::ostream& os, const SampledRecord& rec)
{
    detail::write_header(os, rec.y.empty() ? 0 : rec.y.front().size());
    for (std::size_t k = 0; k < rec.y.size(); ++k)
        detail::write_row(os, static_cast<double>(k) * rec.T, rec.y[k]);
}

} // namespace qbnet
