#pragma once

// Nonparametric estimation of tangential conditions from sampled outputs and
// parametric recovery of the interaction parameters by least squares.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qbnet/core.hpp"
#include "qbnet/model.hpp"
#include "qbnet/psgs.hpp"
#include "qbnet/simulate.hpp"
#include "qbnet/volterra.hpp"

namespace qbnet {

/// sum_{k=0}^{n} exp(k alpha) exp(i k beta), real and imaginary parts in closed form.
inline Complex lemma4_sum(long n, double alpha, double beta)
{
    if (n < 0) return 0.0;
    const double two_pi = 2.0 * std::numbers::pi;
    const double bw = beta - two_pi * std::round(beta / two_pi);
    if (alpha == 0.0 && bw == 0.0) return static_cast<double>(n + 1);

    const double ea = std::exp(alpha);
    const double s2 = std::sin(0.5 * beta);
    const double den = (ea - 1.0) * (ea - 1.0) + 4.0 * ea * s2 * s2;
    if (den < 1e-4) {
        // near the removable point the closed form cancels; sum directly
        Complex s = 0.0;
        for (long k = 0; k <= n; ++k) s += std::exp(Complex(k * alpha, k * beta));
        return s;
    }
    const double nn = static_cast<double>(n);
    const double e_n2 = std::exp((nn + 2.0) * alpha), e_n1 = std::exp((nn + 1.0) * alpha);
    const double re = e_n2 * std::cos(nn * beta) - e_n1 * std::cos((nn + 1.0) * beta) -
                      ea * std::cos(beta) + 1.0;
    const double im = e_n2 * std::sin(nn * beta) - e_n1 * std::sin((nn + 1.0) * beta) +
                      ea * std::sin(beta);
    return {re / den, im / den};
}

struct TangentialEstimate {
    MultiIndex tuple;
    Complex frequency;
    CVector phi_hat;
    std::size_t n_used = 0;
    double T = 0.0;
};

struct AliasEntry {
    MultiIndex tuple;
    Complex frequency;
    int sign = 1;  // +1: matches +f, -1: matches -f
    long wrap = 0; // multiples of 2 pi / T separating the two frequencies
    double predicted = std::numeric_limits<double>::quiet_NaN();
};

/// Tuples up to `max_order` whose sampled frequency equals +-f(tuple) modulo
/// 2 pi / T with at most `max_wrap` wraps.
inline std::vector<AliasEntry> alias_report(const MultiIndex& tuple, const PSGSEigen& e, double T,
                                            int max_order, long max_wrap = 8,
                                            PsiEvaluator* ev = nullptr, double tol = 1e-8)
{
    std::vector<AliasEntry> out;
    if (max_order <= 0 || e.size() == 0) return out;
    const double two_pi = 2.0 * std::numbers::pi;
    const double f = tuple_lambda(e, tuple).imag();
    for (int k = 1; k <= max_order; ++k)
        for (const auto& t : ordered_tuples(e.size(), k)) {
            const double g = tuple_lambda(e, t).imag();
            for (const int sign : {1, -1}) {
                const double d = (g - sign * f) * T / two_pi;
                const long w = std::lround(d);
                if (std::abs(d - static_cast<double>(w)) * two_pi > tol || std::labs(w) > max_wrap)
                    continue;
                AliasEntry a;
                a.tuple = t;
                a.frequency = tuple_lambda(e, t);
                a.sign = sign;
                a.wrap = w;
                if (ev) {
                    try {
                        a.predicted = ev->phi_u(t).norm();
                    } catch (const SpectralCollision&) {
                        a.predicted = std::numeric_limits<double>::infinity();
                    }
                }
                out.push_back(std::move(a));
                break;
            }
        }
    return out;
}

inline std::vector<MultiIndex> alias_sets(const MultiIndex& tuple, const PSGSEigen& e, double T,
                                          int max_order, long max_wrap = 8)
{
    std::vector<MultiIndex> out;
    for (auto& a : alias_report(tuple, e, T, max_order, max_wrap)) out.push_back(std::move(a.tuple));
    return out;
}

struct CorrOptions {
    int max_order = 4;
    long max_wrap = 8;
    /// Use only the first n_used samples; 0 means the whole record.
    std::size_t n_used = 0;
};

/// phi_hat = mean_k exp(-i f kT) y_m(kT) with f the combined frequency.
inline TangentialEstimate corr_estimate(const SampledRecord& rec, const PSGSEigen& e,
                                        const MultiIndex& tuple, const CorrOptions& opt = {})
{
    check_tuple(tuple, e.size());
    for (const int i : tuple.indices)
        if (i >= e.m_plus)
            throw ParameterError("corr_estimate: tuple " + tuple.label() +
                                 " uses an eigenvalue with negative imaginary part");
    require(rec.T > 0.0 && !rec.y.empty(), "corr_estimate: empty record");
    for (const auto& a : alias_report(tuple, e, rec.T, opt.max_order, opt.max_wrap))
        if (a.wrap != 0) {
            std::ostringstream os;
            os << "corr_estimate: tuple " << a.tuple.label() << " at " << a.frequency.imag()
               << " rad/s aliases onto " << (a.sign > 0 ? "+" : "-") << "f" << tuple.label()
               << " after sampling (wrap " << a.wrap << ")";
            throw DomainError(os.str(), static_cast<double>(a.wrap));
        }

    const std::size_t n = opt.n_used ? std::min(opt.n_used, rec.y.size()) : rec.y.size();
    const Complex lam = tuple_lambda(e, tuple);
    const double w = lam.imag() * rec.T;
    const Index my = rec.y.front().size();
    CVector acc = CVector::Zero(my);
    for (std::size_t k = 0; k < n; ++k)
        acc += std::polar(1.0, -w * static_cast<double>(k)) * rec.y[k].cast<Complex>();
    TangentialEstimate est;
    est.tuple = tuple;
    est.frequency = lam;
    est.phi_hat = acc / static_cast<double>(n);
    est.n_used = n;
    est.T = rec.T;
    return est;
}

/// Running estimates at increasing prefix lengths in a single pass.
inline std::vector<TangentialEstimate> corr_estimate_prefixes(const SampledRecord& rec,
                                                              const PSGSEigen& e,
                                                              const MultiIndex& tuple,
                                                              const std::vector<std::size_t>& counts,
                                                              const CorrOptions& opt = {})
{
    CorrOptions first = opt;
    first.n_used = 1;
    TangentialEstimate base = corr_estimate(rec, e, tuple, first);  // validates
    std::vector<TangentialEstimate> out;
    const double w = base.frequency.imag() * rec.T;
    CVector acc = CVector::Zero(rec.y.front().size());
    std::size_t k = 0;
    for (const std::size_t c : counts) {
        require(c >= 1 && c <= rec.y.size(), "corr_estimate_prefixes: bad sample count");
        require(c >= k, "corr_estimate_prefixes: counts must be nondecreasing");
        for (; k < c; ++k) acc += std::polar(1.0, -w * static_cast<double>(k)) * rec.y[k].cast<Complex>();
        TangentialEstimate est = base;
        est.phi_hat = acc / static_cast<double>(c);
        est.n_used = c;
        out.push_back(std::move(est));
    }
    return out;
}

inline nlohmann::json to_json(const TangentialEstimate& e)
{
    nlohmann::json j;
    std::vector<int> idx;
    for (const int i : e.tuple.indices) idx.push_back(i + 1);
    j["indices"] = idx;
    j["frequency"] = {e.frequency.real(), e.frequency.imag()};
    nlohmann::json phi = nlohmann::json::array();
    for (Index i = 0; i < e.phi_hat.size(); ++i) phi.push_back({e.phi_hat(i).real(), e.phi_hat(i).imag()});
    j["phi_hat"] = phi;
    j["n_used"] = e.n_used;
    j["T"] = e.T;
    return j;
}

/// Theta-independent frequency-response blocks of the stacked subsystems at s.
struct LftBlocks {
    Complex s;
    CMatrix Gyu, Gyv, Gzu, Gzv;
};

inline LftBlocks lft_blocks(const StackedMatrices& st, Complex s)
{
    LftBlocks b;
    b.s = s;
    const Index nu = st.B_xu.cols(), nv = st.B_xv.cols();
    CMatrix rhs(st.E.rows(), nu + nv);
    rhs << st.B_xu.cast<Complex>(), st.B_xv.cast<Complex>();
    const CMatrix X = resolvent_apply(st.E, st.A_xx, s, rhs);
    const CMatrix Cy = st.C_yx.cast<Complex>(), Cz = st.C_zx.cast<Complex>();
    b.Gyu = Cy * X.leftCols(nu) + st.D_yu.cast<Complex>();
    b.Gyv = Cy * X.rightCols(nv) + st.D_yv.cast<Complex>();
    b.Gzu = Cz * X.leftCols(nu) + st.D_zu.cast<Complex>();
    b.Gzv = Cz * X.rightCols(nv) + st.D_zv.cast<Complex>();
    return b;
}

/// H(s, theta) = G_yu + G_yv [I - Theta G_zv]^{-1} Theta G_zu.
inline CMatrix lft_h1(const LftBlocks& b, const Matrix& Theta, double tol = 1e-12)
{
    const CMatrix Th = Theta.cast<Complex>();
    const Index nv = Th.rows();
    const CMatrix core = CMatrix::Identity(nv, nv) - Th * b.Gzv;
    const double rc = rcond(core);
    if (rc < tol) {
        std::ostringstream os;
        os << "lft_h1: I - Theta G_zv(s) is near-singular at s = " << b.s << " (rcond " << rc << ")";
        throw NumericError(os.str(), rc);
    }
    return b.Gyu + b.Gyv * core.partialPivLu().solve(Th * b.Gzu);
}

inline CMatrix lft_h1(const Network& net, const SIPVector& theta, Complex s)
{
    return lft_h1(lft_blocks(stack(net), s), scm(net.basis, theta));
}

struct Bounds {
    Vector lower, upper;
};

struct FitProblem {
    const Network* network = nullptr;
    const PSGSEigen* eigen = nullptr;
    std::vector<TangentialEstimate> estimates;
    /// psi_u (x) ... (x) psi_u per ordering of each estimate's tuple.
    std::vector<std::vector<CVector>> directions;
    std::vector<double> weights;
    SIPVector theta0;
    std::optional<Bounds> bounds;
    std::vector<std::optional<LftBlocks>> blocks;  // order-1 cache

    FitProblem() = default;
    FitProblem(const Network& net, const PSGSEigen& e, std::vector<TangentialEstimate> est,
               SIPVector th0, std::vector<double> w = {}, std::optional<Bounds> b = std::nullopt)
        : network(&net), eigen(&e), estimates(std::move(est)), theta0(std::move(th0)),
          bounds(std::move(b))
    {
        require(!estimates.empty(), "FitProblem: no estimates");
        weights = w.empty() ? std::vector<double>(estimates.size(), 1.0) : std::move(w);
        require(weights.size() == estimates.size(), "FitProblem: one weight per estimate");
        bool any = false;
        for (const double x : weights) {
            require(x >= 0.0 && std::isfinite(x), "FitProblem: weights must be finite and >= 0");
            any = any || x > 0.0;
        }
        require(any, "FitProblem: at least one weight must be positive");
        require(theta0.size() == net.basis.size(), "FitProblem: theta0 has wrong length");
        if (bounds) {
            require(bounds->lower.size() == theta0.size() && bounds->upper.size() == theta0.size(),
                    "FitProblem: bounds have wrong length");
            require((bounds->lower.array() <= bounds->upper.array()).all(),
                    "FitProblem: lower bound exceeds upper bound");
        }
        const StackedMatrices st = stack(net);
        for (const auto& es : estimates) {
            check_tuple(es.tuple, e.size());
            std::vector<CVector> dirs;
            for (const auto& p : permutations_of(es.tuple)) dirs.push_back(direction(e, p));
            directions.push_back(std::move(dirs));
            if (es.tuple.order() == 1)
                blocks.emplace_back(lft_blocks(st, es.frequency));
            else
                blocks.emplace_back(std::nullopt);
        }
    }

    Index residual_size() const
    {
        Index n = 0;
        for (std::size_t l = 0; l < estimates.size(); ++l)
            if (weights[l] > 0.0) n += 2 * estimates[l].phi_hat.size();
        return n;
    }
};

/// Model value of the tangential condition at theta: the sum over all orderings
/// of the estimate's tuple, which share its frequency.
inline CVector predicted_phi(const FitProblem& p, std::size_t l, const SIPVector& theta,
                             const LumpedQBTI* lumped)
{
    const auto& es = p.estimates[l];
    if (es.tuple.order() == 1 && p.blocks[l]) {
        const CMatrix H = lft_h1(*p.blocks[l], scm(p.network->basis, theta));
        return H * p.directions[l][0];
    }
    CVector sum = CVector::Zero(es.phi_hat.size());
    const auto perms = permutations_of(es.tuple);
    for (std::size_t q = 0; q < perms.size(); ++q) {
        std::vector<Complex> s;
        for (const int i : perms[q].indices) s.push_back(p.eigen->lambda[static_cast<std::size_t>(i)]);
        sum += hk(*lumped, s) * p.directions[l][q];
    }
    return sum;
}

inline Vector residuals(const FitProblem& p, const SIPVector& theta)
{
    Vector r(p.residual_size());
    std::optional<LumpedQBTI> lumped;
    bool need_lump = false;
    for (const auto& e : p.estimates) need_lump = need_lump || e.tuple.order() > 1;
    try {
        if (need_lump) lumped = lump(*p.network, theta);
        Index o = 0;
        for (std::size_t l = 0; l < p.estimates.size(); ++l) {
            if (p.weights[l] <= 0.0) continue;
            const CVector d = p.estimates[l].phi_hat - predicted_phi(p, l, theta, lumped ? &*lumped : nullptr);
            const double sw = std::sqrt(p.weights[l]);
            for (Index c = 0; c < d.size(); ++c) {
                r(o++) = sw * d(c).real();
                r(o++) = sw * d(c).imag();
            }
        }
        if (!r.allFinite()) throw NumericError("residuals: non-finite value");
    } catch (const std::exception&) {
        // ill-posed or resonant theta: large penalty so the optimizer retreats
        Index o = 0;
        for (std::size_t l = 0; l < p.estimates.size(); ++l) {
            if (p.weights[l] <= 0.0) continue;
            const double pen = 1e6 * std::max(p.estimates[l].phi_hat.norm(), 1e-12) * std::sqrt(p.weights[l]);
            for (Index c = 0; c < 2 * p.estimates[l].phi_hat.size(); ++c) r(o++) = pen;
        }
    }
    return r;
}

struct FitOptions {
    int max_iter = 200;
    double grad_tol = 1e-10;
    double step_tol = 1e-12;
};

struct FitResult {
    SIPVector theta_hat;
    double residual_norm = 0.0;
    double jacobian_rcond = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline Vector project(const Vector& th, const std::optional<Bounds>& b)
{
    if (!b) return th;
    return th.cwiseMax(b->lower).cwiseMin(b->upper);
}

inline Matrix fd_jacobian(const FitProblem& p, const Vector& th, const Vector& r0)
{
    Matrix J(r0.size(), th.size());
    for (Index j = 0; j < th.size(); ++j) {
        double h = 1e-7 * (1.0 + std::abs(th(j)));
        Vector tp = th;
        tp(j) += h;
        if (p.bounds && tp(j) > p.bounds->upper(j)) {
            h = -h;
            tp(j) = th(j) + h;
        }
        J.col(j) = (residuals(p, SIPVector(tp)) - r0) / h;
    }
    return J;
}

} // namespace detail

/// Levenberg-Marquardt with forward-difference Jacobian and box projection.
inline FitResult fit_theta(const FitProblem& p, const FitOptions& opt = {})
{
    require(p.network && p.eigen, "fit_theta: problem is not bound to a network");
    Vector th = detail::project(p.theta0.values, p.bounds);
    Vector r = residuals(p, SIPVector(th));
    double cost = r.squaredNorm();
    double mu = -1.0;
    FitResult res;
    Matrix J = detail::fd_jacobian(p, th, r);
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        const Vector g = J.transpose() * r;
        if (g.size() == 0 || g.cwiseAbs().maxCoeff() <= opt.grad_tol) {
            res.converged = true;
            break;
        }
        const Matrix JtJ = J.transpose() * J;
        if (mu < 0.0) mu = 1e-3 * std::max(JtJ.diagonal().maxCoeff(), 1e-300);
        bool accepted = false, tiny = false;
        for (int inner = 0; inner < 60; ++inner) {
            Matrix Mx = JtJ;
            Mx.diagonal().array() += mu;
            const Vector step = Mx.ldlt().solve(-g);
            const Vector cand = detail::project(th + step, p.bounds);
            const Vector d = cand - th;
            if (d.norm() <= opt.step_tol * (1.0 + th.norm())) {
                tiny = true;
                break;
            }
            const Vector rc = residuals(p, SIPVector(cand));
            const double cc = rc.squaredNorm();
            if (cc < cost) {
                th = cand;
                r = rc;
                cost = cc;
                mu = std::max(mu / 3.0, 1e-300);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if (tiny || !accepted) {
            res.converged = true;
            ++it;
            break;
        }
        J = detail::fd_jacobian(p, th, r);
    }
    res.theta_hat = SIPVector(th);
    res.residual_norm = std::sqrt(cost);
    res.jacobian_rcond = rcond(J);
    res.iterations = it;
    return res;
}

inline nlohmann::json to_json(const FitResult& f)
{
    nlohmann::json j;
    j["theta_hat"] = std::vector<double>(f.theta_hat.values.data(),
                                         f.theta_hat.values.data() + f.theta_hat.size());
    j["residual_norm"] = f.residual_norm;
    j["jacobian_rcond"] = f.jacobian_rcond;
    j["iterations"] = f.iterations;
    j["converged"] = f.converged;
    return j;
}

} // namespace qbnet
