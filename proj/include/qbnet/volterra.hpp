#pragma once

// Generalized transfer functions G(s_1..s_k), the steady-state coefficient
// recursion psi_s and the truncated steady-state output of a lumped QBTI model.

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qbnet/core.hpp"
#include "qbnet/model.hpp"
#include "qbnet/pencil.hpp"
#include "qbnet/psgs.hpp"

namespace qbnet {

/// Ordered tuple of PSGS mode indices (zero-based). Printed one-based.
struct MultiIndex {
    std::vector<int> indices;

    MultiIndex() = default;
    MultiIndex(std::initializer_list<int> il) : indices(il) {}
    explicit MultiIndex(std::vector<int> v) : indices(std::move(v)) {}

    int order() const { return static_cast<int>(indices.size()); }
    int operator[](std::size_t h) const { return indices[h]; }

    MultiIndex slice(std::size_t from, std::size_t to) const
    {
        return MultiIndex(std::vector<int>(indices.begin() + static_cast<std::ptrdiff_t>(from),
                                           indices.begin() + static_cast<std::ptrdiff_t>(to)));
    }
    MultiIndex sorted() const
    {
        MultiIndex m = *this;
        std::sort(m.indices.begin(), m.indices.end());
        return m;
    }
    std::string label() const
    {
        std::string s = "(";
        for (std::size_t h = 0; h < indices.size(); ++h)
            s += (h ? "," : "") + std::to_string(indices[h] + 1);
        return s + ")";
    }
    auto operator<=>(const MultiIndex&) const = default;
};

inline void check_tuple(const MultiIndex& t, Index modes)
{
    require(t.order() >= 1, "tuple must have order >= 1");
    for (const int i : t.indices)
        require(i >= 0 && i < modes, "tuple index " + std::to_string(i + 1) + " out of range 1.." +
                                         std::to_string(modes));
}

/// Combined frequency: the sum of the PSGS eigenvalues over the tuple.
inline Complex tuple_lambda(const PSGSEigen& e, const MultiIndex& t)
{
    Complex s = 0.0;
    for (const int i : t.indices) s += e.lambda[static_cast<std::size_t>(i)];
    return s;
}

/// All ordered tuples of order k over `modes` indices.
inline std::vector<MultiIndex> ordered_tuples(Index modes, int k)
{
    std::vector<MultiIndex> out;
    if (modes <= 0 || k <= 0) return out;
    std::vector<int> cur(static_cast<std::size_t>(k), 0);
    while (true) {
        out.emplace_back(cur);
        int p = k - 1;
        while (p >= 0 && ++cur[static_cast<std::size_t>(p)] == modes) cur[static_cast<std::size_t>(p--)] = 0;
        if (p < 0) break;
    }
    return out;
}

/// Distinct orderings of a tuple (all tuples with the same multiset).
inline std::vector<MultiIndex> permutations_of(const MultiIndex& t)
{
    std::vector<MultiIndex> out;
    MultiIndex m = t.sorted();
    do out.push_back(m);
    while (std::next_permutation(m.indices.begin(), m.indices.end()));
    return out;
}

inline CMatrix g1(const LumpedQBTI& model, Complex s)
{
    return resolvent_apply(model.E, model.A, s, model.B.cast<Complex>());
}

namespace detail {

inline std::string sum_label(const std::vector<Complex>& s, std::size_t a, std::size_t b)
{
    std::ostringstream os;
    Complex sum = 0.0;
    for (std::size_t i = a; i < b; ++i) sum += s[i];
    os << "partial sum s_" << a + 1 << "..s_" << b << " = " << sum;
    return os.str();
}

} // namespace detail

/// G(s_1..s_k) of size m_x x m_u^k by the asymmetric recursion, memoized over
/// contiguous ranges of the argument list.
inline CMatrix gk(const LumpedQBTI& model, const std::vector<Complex>& s)
{
    const std::size_t k = s.size();
    require(k >= 1, "gk: empty argument list");
    const Index mx = model.mx(), mu = model.mu();
    const CMatrix Gx = model.Gamma_x.cast<Complex>();
    const CMatrix Gu = model.Gamma_u.cast<Complex>();
    const CMatrix Iu = CMatrix::Identity(mu, mu);
    std::map<std::pair<std::size_t, std::size_t>, CMatrix> memo;

    auto rec = [&](auto&& self, std::size_t a, std::size_t b) -> const CMatrix& {
        const auto key = std::make_pair(a, b);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        Complex sum = 0.0;
        for (std::size_t i = a; i < b; ++i) sum += s[i];
        CMatrix rhs;
        if (b - a == 1) {
            rhs = model.B.cast<Complex>();
        } else {
            Index cols = 1;
            for (std::size_t i = a; i < b; ++i) cols *= mu;
            CMatrix acc = CMatrix::Zero(mx * mx, cols);
            for (std::size_t l = a + 1; l < b; ++l) {
                const CMatrix left = self(self, a, l);
                const CMatrix& right = self(self, l, b);
                acc += kron(left, right);
            }
            rhs = Gx * acc;
            if (mu > 0 && Gu.size() > 0) rhs += Gu * kron(self(self, a, b - 1), Iu);
        }
        try {
            return memo.emplace(key, resolvent_apply(model.E, model.A, sum, rhs)).first->second;
        } catch (const SpectralCollision& e) {
            throw SpectralCollision("gk: " + detail::sum_label(s, a, b) + ": " + e.what(), sum,
                                    e.value());
        }
    };
    return rec(rec, 0, k);
}

/// H(s_1..s_k): C G + D for k = 1, C G otherwise.
inline CMatrix hk(const LumpedQBTI& model, const std::vector<Complex>& s)
{
    const CMatrix G = gk(model, s);
    CMatrix H = model.C.cast<Complex>() * G;
    if (s.size() == 1) H += model.D.cast<Complex>();
    return H;
}

/// Memoized psi_s / phi_u evaluator bound to a model and a PSGS eigenstructure.
/// `shift` is added to every PSGS eigenvalue; it is used to take limits at
/// removable singularities. Safe for concurrent use.
class PsiEvaluator {
public:
    PsiEvaluator(const LumpedQBTI& model, const PSGSEigen& eig, Complex shift = 0.0)
        : model_(model), eig_(eig), shift_(shift),
          Gx_(model.Gamma_x.cast<Complex>()), Gu_(model.Gamma_u.cast<Complex>()),
          B_(model.B.cast<Complex>())
    {
        require(eig.mu == model.mu(), "PSGS output count does not match model input count");
    }

    const LumpedQBTI& model() const { return model_; }
    const PSGSEigen& eigen() const { return eig_; }

    Complex lambda(const MultiIndex& t) const
    {
        return tuple_lambda(eig_, t) + static_cast<double>(t.order()) * shift_;
    }

    CVector psi_s(const MultiIndex& t)
    {
        {
            std::lock_guard lock(mutex_);
            if (auto it = memo_.find(t); it != memo_.end()) return it->second;
        }
        check_tuple(t, eig_.size());
        const std::size_t k = t.indices.size();
        CVector rhs;
        if (k == 1) {
            rhs = B_ * eig_.psi_u[static_cast<std::size_t>(t[0])];
        } else {
            CVector acc = CVector::Zero(model_.mx() * model_.mx());
            for (std::size_t l = 1; l < k; ++l)
                acc += kron_vec(psi_s(t.slice(0, l)), psi_s(t.slice(l, k)));
            rhs = Gx_ * acc;
            if (Gu_.size() > 0)
                rhs += Gu_ * kron_vec(psi_s(t.slice(0, k - 1)),
                                      eig_.psi_u[static_cast<std::size_t>(t[k - 1])]);
        }
        const Complex lam = lambda(t);
        CVector v;
        try {
            v = resolvent_apply(model_.E, model_.A, lam, rhs);
        } catch (const SpectralCollision& e) {
            throw SpectralCollision("psi_s" + t.label() + ": combined frequency on the plant spectrum: " +
                                        e.what(),
                                    lam, e.value());
        }
        std::lock_guard lock(mutex_);
        return memo_.emplace(t, std::move(v)).first->second;
    }

    CVector phi_u(const MultiIndex& t)
    {
        CVector phi = model_.C.cast<Complex>() * psi_s(t);
        if (t.order() == 1)
            phi += model_.D.cast<Complex>() * eig_.psi_u[static_cast<std::size_t>(t[0])];
        return phi;
    }

private:
    const LumpedQBTI& model_;
    const PSGSEigen& eig_;
    Complex shift_;
    CMatrix Gx_, Gu_, B_;
    std::mutex mutex_;
    std::map<MultiIndex, CVector> memo_;
};

inline CVector psi_s(const LumpedQBTI& model, const PSGSEigen& eig, const MultiIndex& t)
{
    PsiEvaluator ev(model, eig);
    return ev.psi_s(t);
}

inline CVector phi_u(const LumpedQBTI& model, const PSGSEigen& eig, const MultiIndex& t)
{
    PsiEvaluator ev(model, eig);
    return ev.phi_u(t);
}

/// psi_u(i_1) (x) ... (x) psi_u(i_k).
inline CVector direction(const PSGSEigen& eig, const MultiIndex& t)
{
    CVector d = eig.psi_u[static_cast<std::size_t>(t[0])];
    for (std::size_t h = 1; h < t.indices.size(); ++h)
        d = kron_vec(d, eig.psi_u[static_cast<std::size_t>(t[h])]);
    return d;
}

/// Steady-state output coefficients grouped by multiset: every ordering of a
/// multiset shares the same combined frequency, so only the sum over orderings
/// is observable.
struct SteadyTerm {
    MultiIndex tuple;  // sorted representative
    Complex lambda;
    CVector phi;       // sum of phi_u over all orderings
    int orderings = 1;
    /// True when the value is a limit across a removable singularity.
    bool regularized = false;
};

struct SteadyStateOptions {
    double epsilon = 1e-4;
    /// Relative tolerance for accepting the extrapolated limit.
    double limit_tol = 1e-3;
};

namespace detail {

inline CVector group_sum(PsiEvaluator& ev, const std::vector<MultiIndex>& perms)
{
    CVector s = CVector::Zero(ev.model().my());
    for (const auto& p : perms) s += ev.phi_u(p);
    return s;
}

} // namespace detail

class SteadyStateExpansion {
public:
    SteadyStateExpansion(const LumpedQBTI& model, const PSGSEigen& eig, int K,
                         SteadyStateOptions opt = {})
        : K_(K), my_(model.my())
    {
        require(K >= 1, "steady-state truncation order must be >= 1");
        PsiEvaluator ev(model, eig);
        std::optional<PsiEvaluator> shifted[4];
        const double eps[4] = {opt.epsilon, -opt.epsilon, 2 * opt.epsilon, -2 * opt.epsilon};
        for (int k = 1; k <= K; ++k) {
            for (const auto& t : ordered_tuples(eig.size(), k)) {
                if (t != t.sorted()) continue;
                SteadyTerm term;
                term.tuple = t;
                term.lambda = tuple_lambda(eig, t);
                const auto perms = permutations_of(t);
                term.orderings = static_cast<int>(perms.size());
                try {
                    term.phi = detail::group_sum(ev, perms);
                } catch (const SpectralCollision&) {
                    for (int j = 0; j < 4; ++j)
                        if (!shifted[j]) shifted[j].emplace(model, eig, Complex(eps[j], 0.0));
                    CVector f[4];
                    for (int j = 0; j < 4; ++j) f[j] = detail::group_sum(*shifted[j], perms);
                    const CVector even1 = 0.5 * (f[0] + f[1]), even2 = 0.5 * (f[2] + f[3]);
                    const CVector odd1 = 0.5 * (f[0] - f[1]), odd2 = 0.5 * (f[2] - f[3]);
                    const double scale = std::max(even1.norm(), 1e-300);
                    // a pole makes the odd part grow as epsilon shrinks
                    if ((even1 - even2).norm() > opt.limit_tol * std::max(scale, 1e-12) ||
                        odd1.norm() > odd2.norm() + 1e-10 * scale) {
                        std::ostringstream os;
                        os << "steady state: combined frequency of " << t.label()
                           << " is a genuine resonance with the plant spectrum";
                        throw SpectralCollision(os.str(), term.lambda, odd1.norm());
                    }
                    term.phi = (4.0 * even1 - even2) / 3.0;
                    term.regularized = true;
                }
                terms_.push_back(std::move(term));
            }
        }
    }

    const std::vector<SteadyTerm>& terms() const { return terms_; }
    int truncation() const { return K_; }

    /// Sum of all terms of order k whose combined frequency matches `lambda`.
    CVector coefficient(Complex lambda, int k, double tol = 1e-9) const
    {
        CVector s = CVector::Zero(my_);
        for (const auto& t : terms_)
            if (t.tuple.order() == k && std::abs(t.lambda - lambda) <= tol * std::max(1.0, std::abs(lambda)))
                s += t.phi;
        return s;
    }

    const SteadyTerm* find(const MultiIndex& t) const
    {
        const MultiIndex key = t.sorted();
        for (const auto& term : terms_)
            if (term.tuple == key) return &term;
        return nullptr;
    }

    /// Per-order sum of coefficient norms.
    std::vector<double> order_norms() const
    {
        std::vector<double> n(static_cast<std::size_t>(K_), 0.0);
        for (const auto& t : terms_) n[static_cast<std::size_t>(t.tuple.order() - 1)] += t.phi.norm();
        return n;
    }

    Vector operator()(double t) const
    {
        CVector y = CVector::Zero(my_);
        double scale = 0.0;
        for (const auto& term : terms_) {
            y += std::exp(term.lambda * t) * term.phi;
            scale += term.phi.norm();
        }
        const double im = y.size() ? y.imag().cwiseAbs().maxCoeff() : 0.0;
        if (im > 1e-8 * std::max(scale, 1e-300) && im > 1e-300) {
            std::ostringstream os;
            os << "y_steady: imaginary residue " << im << " at t = " << t
               << " (conjugate closure broken)";
            throw NumericError(os.str(), im);
        }
        return y.real();
    }

private:
    int K_;
    Index my_;
    std::vector<SteadyTerm> terms_;
};

inline Vector y_steady(const LumpedQBTI& model, const PSGSEigen& eig, int K, double t)
{
    return SteadyStateExpansion(model, eig, K)(t);
}

} // namespace qbnet
