#pragma once

// Quadratic-bilinear descriptor subsystems, the parameterized subsystem
// connection matrix, and assembly of the lumped network model.

#include <string>
#include <utility>
#include <vector>

#include "qbnet/core.hpp"

namespace qbnet {

/// Raw matrices of one subsystem
///   E x' = A_xx x + B_xv v + B_xu u + G_xx (x(x)x) + G_xv (x(x)v) + G_xu (x(x)u)
///   z    = C_zx x + D_zv v + D_zu u
///   y    = C_yx x + D_yv v + D_yu u
struct SubsystemMatrices {
    Matrix E, A_xx, B_xv, B_xu;
    Matrix Gamma_xx, Gamma_xv, Gamma_xu;
    Matrix C_zx, D_zv, D_zu;
    Matrix C_yx, D_yv, D_yu;

    /// All-zero matrices of consistent size.
    static SubsystemMatrices zeros(Index mx, Index mu, Index mv, Index mz, Index my)
    {
        SubsystemMatrices m;
        m.E = Matrix::Zero(mx, mx);
        m.A_xx = Matrix::Zero(mx, mx);
        m.B_xv = Matrix::Zero(mx, mv);
        m.B_xu = Matrix::Zero(mx, mu);
        m.Gamma_xx = Matrix::Zero(mx, mx * mx);
        m.Gamma_xv = Matrix::Zero(mx, mx * mv);
        m.Gamma_xu = Matrix::Zero(mx, mx * mu);
        m.C_zx = Matrix::Zero(mz, mx);
        m.D_zv = Matrix::Zero(mz, mv);
        m.D_zu = Matrix::Zero(mz, mu);
        m.C_yx = Matrix::Zero(my, mx);
        m.D_yv = Matrix::Zero(my, mv);
        m.D_yu = Matrix::Zero(my, mu);
        return m;
    }
};

/// Fold duplicate columns of a quadratic coefficient matrix: the column of
/// x_k x_j (k > j) is added into the column of x_j x_k and then zeroed.
inline Matrix normalize_gamma_xx(const Matrix& gamma, Index mx)
{
    require(gamma.cols() == mx * mx, "normalize_gamma_xx: expected " +
                                         std::to_string(mx * mx) + " columns, got " +
                                         std::to_string(gamma.cols()));
    Matrix out = gamma;
    for (Index j = 0; j < mx; ++j) {
        for (Index k = j + 1; k < mx; ++k) {
            out.col(j * mx + k) += out.col(k * mx + j);
            out.col(k * mx + j).setZero();
        }
    }
    return out;
}

/// One validated subsystem. Gamma_xx is stored in duplicate-folded form.
class SubsystemQBTI {
public:
    SubsystemQBTI() = default;

    explicit SubsystemQBTI(SubsystemMatrices m, int index = 0) : m_(std::move(m)), index_(index)
    {
        validate();
        m_.Gamma_xx = normalize_gamma_xx(m_.Gamma_xx, mx());
    }

    const SubsystemMatrices& matrices() const noexcept { return m_; }
    int index() const noexcept { return index_; }

    Index mx() const noexcept { return m_.E.rows(); }
    Index mu() const noexcept { return m_.B_xu.cols(); }
    Index mv() const noexcept { return m_.B_xv.cols(); }
    Index mz() const noexcept { return m_.C_zx.rows(); }
    Index my() const noexcept { return m_.C_yx.rows(); }

private:
    void check(const Matrix& a, Index r, Index c, const char* name) const
    {
        if (a.rows() != r || a.cols() != c)
            throw ParameterError("subsystem " + std::to_string(index_) + ": " + name + " is " +
                                 std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                 ", expected " + std::to_string(r) + "x" + std::to_string(c));
    }

    void validate() const
    {
        const Index x = mx(), u = mu(), v = mv(), z = mz(), y = my();
        check(m_.E, x, x, "E");
        check(m_.A_xx, x, x, "A_xx");
        check(m_.B_xv, x, v, "B_xv");
        check(m_.B_xu, x, u, "B_xu");
        check(m_.Gamma_xx, x, x * x, "Gamma_xx");
        check(m_.Gamma_xv, x, x * v, "Gamma_xv");
        check(m_.Gamma_xu, x, x * u, "Gamma_xu");
        check(m_.C_zx, z, x, "C_zx");
        check(m_.D_zv, z, v, "D_zv");
        check(m_.D_zu, z, u, "D_zu");
        check(m_.C_yx, y, x, "C_yx");
        check(m_.D_yv, y, v, "D_yv");
        check(m_.D_yu, y, u, "D_yu");
    }

    SubsystemMatrices m_;
    int index_ = 0;
};

/// Theta(theta) = sum_i theta_i * basis_i, every basis matrix m_v x m_z.
class SCMBasis {
public:
    SCMBasis() = default;
    SCMBasis(std::vector<Matrix> basis, Index mv, Index mz)
        : basis_(std::move(basis)), mv_(mv), mz_(mz)
    {
        for (std::size_t i = 0; i < basis_.size(); ++i)
            if (basis_[i].rows() != mv_ || basis_[i].cols() != mz_)
                throw ParameterError("SCM basis matrix " + std::to_string(i) +
                                     " has wrong dimensions");
    }

    const std::vector<Matrix>& basis() const noexcept { return basis_; }
    Index size() const noexcept { return static_cast<Index>(basis_.size()); }
    Index mv() const noexcept { return mv_; }
    Index mz() const noexcept { return mz_; }

private:
    std::vector<Matrix> basis_;
    Index mv_ = 0, mz_ = 0;
};

/// Subsystem interaction parameters.
struct SIPVector {
    Vector values;

    SIPVector() = default;
    explicit SIPVector(Vector v) : values(std::move(v))
    {
        if (!values.allFinite()) throw ParameterError("SIP vector has non-finite entries");
    }
    Index size() const noexcept { return values.size(); }
    double operator[](Index i) const { return values(i); }
};

inline Matrix scm(const SCMBasis& basis, const SIPVector& theta)
{
    if (theta.size() != basis.size())
        throw ParameterError("scm: theta has " + std::to_string(theta.size()) +
                             " entries, basis has " + std::to_string(basis.size()));
    Matrix out = Matrix::Zero(basis.mv(), basis.mz());
    for (Index i = 0; i < basis.size(); ++i) out += theta[i] * basis.basis()[i];
    return out;
}

/// Subsystems plus their interconnection. `input_map` maps the external input
/// vector onto the stacked subsystem inputs col{u(i)}; identity when inputs are
/// not shared between subsystems.
struct Network {
    std::vector<SubsystemQBTI> subsystems;
    SCMBasis basis;
    Matrix input_map;

    Index mx() const { return sum([](const SubsystemQBTI& s) { return s.mx(); }); }
    Index mu_stacked() const { return sum([](const SubsystemQBTI& s) { return s.mu(); }); }
    Index mv() const { return sum([](const SubsystemQBTI& s) { return s.mv(); }); }
    Index mz() const { return sum([](const SubsystemQBTI& s) { return s.mz(); }); }
    Index my() const { return sum([](const SubsystemQBTI& s) { return s.my(); }); }
    Index mu() const { return input_map.size() ? input_map.cols() : mu_stacked(); }

    Matrix input_matrix() const
    {
        if (input_map.size() == 0) return Matrix::Identity(mu_stacked(), mu_stacked());
        require(input_map.rows() == mu_stacked(), "input_map rows must equal stacked input count");
        return input_map;
    }

    void validate() const
    {
        require(!subsystems.empty(), "network has no subsystems");
        require(basis.mv() == mv() && basis.mz() == mz(),
                "SCM basis dimensions do not match stacked internal signals");
        (void)input_matrix();
    }

private:
    template <typename F>
    Index sum(F f) const
    {
        Index n = 0;
        for (const auto& s : subsystems) n += f(s);
        return n;
    }
};

/// Block-diagonal stacking of per-subsystem matrices selected by `get`.
template <typename Get>
Matrix block_diag(const std::vector<SubsystemQBTI>& subs, Get get)
{
    Index r = 0, c = 0;
    for (const auto& s : subs) {
        r += get(s).rows();
        c += get(s).cols();
    }
    Matrix out = Matrix::Zero(r, c);
    Index ro = 0, co = 0;
    for (const auto& s : subs) {
        const Matrix& m = get(s);
        out.block(ro, co, m.rows(), m.cols()) = m;
        ro += m.rows();
        co += m.cols();
    }
    return out;
}

/// Embed per-subsystem coefficient matrices of x(i) (x) w(i) into the global
/// matrix acting on x (x) w, where x = col{x(i)} and w = col{w(i)}.
/// `mw` lists the per-subsystem dimensions of w.
inline Matrix embed_gamma(const std::vector<Matrix>& blocks, const std::vector<Index>& mx,
                          const std::vector<Index>& mw)
{
    require(blocks.size() == mx.size() && mx.size() == mw.size(),
            "embed_gamma: inconsistent subsystem counts");
    Index gx = 0, gw = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        gx += mx[i];
        gw += mw[i];
    }
    Matrix out = Matrix::Zero(gx, gx * gw);
    Index ox = 0, ow = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const Matrix& b = blocks[i];
        if (b.rows() != mx[i] || b.cols() != mx[i] * mw[i])
            throw ParameterError("embed_gamma: block " + std::to_string(i) + " is " +
                                 std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
        for (Index j = 0; j < mx[i]; ++j)
            for (Index k = 0; k < mw[i]; ++k)
                out.block(ox, (ox + j) * gw + ow + k, mx[i], 1) = b.col(j * mw[i] + k);
        ox += mx[i];
        ow += mw[i];
    }
    return out;
}

struct WellPosedness {
    bool ok = false;
    double rcond = 0.0;
};

/// I - D_zv * Theta must be invertible with reciprocal condition >= tol.
inline WellPosedness well_posed(const Matrix& D_zv, const Matrix& Theta, double tol = 1e-12)
{
    require(D_zv.cols() == Theta.rows() && D_zv.rows() == Theta.cols(),
            "well_posed: D_zv and Theta are not compatible");
    const Matrix core = Matrix::Identity(D_zv.rows(), D_zv.rows()) - D_zv * Theta;
    const double rc = rcond(core);
    return {rc >= tol, rc};
}

/// Network model after eliminating the internal signals v, z:
///   E x' = A x + B u + Gamma_x (x(x)x) + Gamma_u (x(x)u),   y = C x + D u.
struct LumpedQBTI {
    Matrix E, A, B, C, D, Gamma_x, Gamma_u;
    SIPVector theta;

    Index mx() const { return E.rows(); }
    Index mu() const { return B.cols(); }
    Index my() const { return C.rows(); }

    void validate() const
    {
        const Index x = mx(), u = mu(), y = my();
        require(E.cols() == x && A.rows() == x && A.cols() == x, "lumped model: E/A dims");
        require(B.rows() == x, "lumped model: B dims");
        require(C.cols() == x, "lumped model: C dims");
        require(D.rows() == y && D.cols() == u, "lumped model: D dims");
        require(Gamma_x.rows() == x && Gamma_x.cols() == x * x, "lumped model: Gamma_x dims");
        require(Gamma_u.rows() == x && Gamma_u.cols() == x * u, "lumped model: Gamma_u dims");
    }

    /// Right-hand side A x + B u + Gamma_x (x(x)x) + Gamma_u (x(x)u).
    Vector rhs(const Vector& x, const Vector& u) const
    {
        Vector f = A * x + B * u + Gamma_x * kron_vec(x, x);
        if (u.size() > 0) f += Gamma_u * kron_vec(x, u);
        return f;
    }

    Vector output(const Vector& x, const Vector& u) const { return C * x + D * u; }
};

/// Stacked (block-diagonal) subsystem matrices with input sharing applied.
struct StackedMatrices {
    Matrix E, A_xx, B_xv, B_xu, C_zx, D_zv, D_zu, C_yx, D_yv, D_yu;
    Matrix Gamma_xx, Gamma_xv, Gamma_xu;
};

inline StackedMatrices stack(const Network& net)
{
    net.validate();
    const auto& subs = net.subsystems;
    StackedMatrices s;
    s.E = block_diag(subs, [](const SubsystemQBTI& q) -> const Matrix& { return q.matrices().E; });
    s.A_xx = block_diag(subs, [](const SubsystemQBTI& q) -> const Matrix& { return q.matrices().A_xx; });
    s.B_xv = block_diag(subs, [](const SubsystemQBTI& q) -> const Matrix& { return q.matrices().B_xv; });
    s.B_xu = block_diag(subs, [](const SubsystemQBTI& q) -> const Matrix& { return q.matrices().B_xu; });
    s.C_zx = block_diag(subs, [](const SubsystemQBTI& q) -> const Matrix& { return q.matrices().C_zx; });
    s.D_zv = block_diag(subs, [](const SubsystemQBTI& q) -> const Matrix& { return q.matrices().D_zv; });
    s.D_zu = block_diag(subs, [](const SubsystemQBTI& q) -> const Matrix& { return q.matrices().D_zu; });
    s.C_yx = block_diag(subs, [](const SubsystemQBTI& q) -> const Matrix& { return q.matrices().C_yx; });
    s.D_yv = block_diag(subs, [](const SubsystemQBTI& q) -> const Matrix& { return q.matrices().D_yv; });
    s.D_yu = block_diag(subs, [](const SubsystemQBTI& q) -> const Matrix& { return q.matrices().D_yu; });

    std::vector<Matrix> gxx, gxv, gxu;
    std::vector<Index> mx, mv, mu;
    for (const auto& q : subs) {
        gxx.push_back(q.matrices().Gamma_xx);
        gxv.push_back(q.matrices().Gamma_xv);
        gxu.push_back(q.matrices().Gamma_xu);
        mx.push_back(q.mx());
        mv.push_back(q.mv());
        mu.push_back(q.mu());
    }
    s.Gamma_xx = embed_gamma(gxx, mx, mx);
    s.Gamma_xv = embed_gamma(gxv, mx, mv);
    s.Gamma_xu = embed_gamma(gxu, mx, mu);

    // shared inputs: u_stacked = J u
    const Matrix J = net.input_matrix();
    const Index gx = s.E.rows();
    s.B_xu = s.B_xu * J;
    s.D_zu = s.D_zu * J;
    s.D_yu = s.D_yu * J;
    s.Gamma_xu = s.Gamma_xu * kron(Matrix::Identity(gx, gx), J);
    return s;
}

/// Assemble the lumped QBTI model of the network at theta.
inline LumpedQBTI lump(const Network& net, const SIPVector& theta, double tol = 1e-12)
{
    const StackedMatrices s = stack(net);
    const Matrix Theta = scm(net.basis, theta);
    const WellPosedness wp = well_posed(s.D_zv, Theta, tol);
    if (!wp.ok)
        throw DomainError("network is not well-posed: rcond(I - D_zv Theta) = " +
                              std::to_string(wp.rcond),
                          wp.rcond);

    const Index mz = s.D_zv.rows();
    const Index mx = s.E.rows();
    // M = Theta (I - D_zv Theta)^{-1}, so that v = M (C_zx x + D_zu u)
    const Matrix core = Matrix::Identity(mz, mz) - s.D_zv * Theta;
    const Matrix M = core.transpose().partialPivLu().solve(Theta.transpose()).transpose();

    LumpedQBTI out;
    out.E = s.E;
    out.A = s.A_xx + s.B_xv * M * s.C_zx;
    out.B = s.B_xu + s.B_xv * M * s.D_zu;
    out.C = s.C_yx + s.D_yv * M * s.C_zx;
    out.D = s.D_yu + s.D_yv * M * s.D_zu;
    const Matrix I = Matrix::Identity(mx, mx);
    out.Gamma_x = s.Gamma_xx + s.Gamma_xv * kron(I, Matrix(M * s.C_zx));
    out.Gamma_u = s.Gamma_xu + s.Gamma_xv * kron(I, Matrix(M * s.D_zu));
    out.theta = theta;
    return out;
}

} // namespace qbnet
