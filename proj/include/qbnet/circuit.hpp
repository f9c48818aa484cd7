#pragma once

// Two diode-capacitor cells driven by a shared current source. Each cell
// is lifted to a 3-state descriptor QBTI model with
//   x1 = v,  x2 = i_c / V_th,  x3 = exp(v / V_th) - 1,
// and the thermal voltage V_th enters only through the interconnection v = V_th z.

#include <vector>

#include "qbnet/model.hpp"

namespace qbnet {

struct CircuitParams {
    double C1 = 20.0, Is1 = 0.6;
    double C2 = 4.0, Is2 = 0.6;
};

inline Vector circuit_true_theta() { return (Vector(2) << 0.04, 0.05).finished(); }

inline SubsystemQBTI circuit_cell(double C, double Is, int index)
{
    auto m = SubsystemMatrices::zeros(3, 1, 1, 1, 1);
    m.E = Eigen::Vector3d(1.0, 0.0, 1.0).asDiagonal();
    // x1' = (V_th / C) x2 ; 0 = -V_th x2 - Is x3 + u ; x3' = x2 / C + x2 x3 / C
    m.A_xx << 0, 0, 0,
              0, 0, -Is,
              0, 1.0 / C, 0;
    m.B_xv << 1.0 / C, -1.0, 0.0;
    m.B_xu << 0.0, 1.0, 0.0;
    m.C_zx << 0.0, 1.0, 0.0;
    m.C_yx << 1.0, 0.0, 0.0;
    m.Gamma_xx(2, 1 * 3 + 2) = 1.0 / C;
    return SubsystemQBTI(std::move(m), index);
}

/// Network with SCM basis Theta_1 = diag(1, 0), Theta_2 = diag(0, 1) and one
/// shared input.
inline Network preset_circuit(const CircuitParams& p = {})
{
    Network net;
    net.subsystems.push_back(circuit_cell(p.C1, p.Is1, 1));
    net.subsystems.push_back(circuit_cell(p.C2, p.Is2, 2));
    Matrix T1 = Matrix::Zero(2, 2), T2 = Matrix::Zero(2, 2);
    T1(0, 0) = 1.0;
    T2(1, 1) = 1.0;
    net.basis = SCMBasis({T1, T2}, 2, 2);
    net.input_map = Matrix::Ones(2, 1);
    net.validate();
    return net;
}

} // namespace qbnet
