#pragma once

#include <Eigen/Dense>

#include "pmint/core.hpp"
#include "pmint/fem/section.hpp"

namespace pmint::fem {

struct Material {
    double E = 0.0;
    double nu = 0.0;
    double rho = 0.0;

    double G() const { return E / (2.0 * (1.0 + nu)); }
};

/// 2-node 3D Timoshenko beam element, 6 DoF per node in the order
/// [ux uy uz rx ry rz]. Shear-deformable stiffness and consistent mass
/// including rotatory inertia.
class TimoshenkoElement {
  public:
    TimoshenkoElement(const Material& mat, const RectSection& sec,
                      const Eigen::Vector3d& xi, const Eigen::Vector3d& xj)
        : mat_(mat), sec_(sec) {
        Eigen::Vector3d axis = xj - xi;
        L_ = axis.norm();
        if (L_ <= 0.0) throw DomainError("timoshenko element: zero length");
        ex_ = axis / L_;
        // Local y/z from a global reference direction; for an x-aligned beam
        // local y/z coincide with global y/z.
        Eigen::Vector3d ref = Eigen::Vector3d::UnitZ();
        if (std::abs(ex_.dot(ref)) > 0.99) ref = Eigen::Vector3d::UnitY();
        ey_ = ref.cross(ex_).normalized();
        ez_ = ex_.cross(ey_);
    }

    double length() const { return L_; }

    Eigen::Matrix<double, 12, 12> stiffness_global() const {
        return transform(stiffness_local());
    }

    Eigen::Matrix<double, 12, 12> mass_global() const {
        return transform(mass_local());
    }

    Eigen::Matrix<double, 12, 12> stiffness_local() const {
        const double E = mat_.E, G = mat_.G();
        const double A = sec_.area(), Iy = sec_.Iy(), Iz = sec_.Iz(), J = sec_.J();
        const double kappa = shear_correction_rect(mat_.nu);
        const double L = L_;
        const double phi_y = 12.0 * E * Iz / (G * kappa * A * L * L);  // x-y plane
        const double phi_z = 12.0 * E * Iy / (G * kappa * A * L * L);  // x-z plane

        Eigen::Matrix<double, 12, 12> K = Eigen::Matrix<double, 12, 12>::Zero();
        // axial (ux)
        const double ka = E * A / L;
        K(0, 0) = ka;  K(0, 6) = -ka;
        K(6, 0) = -ka; K(6, 6) = ka;
        // torsion (rx)
        const double kt = G * J / L;
        K(3, 3) = kt;  K(3, 9) = -kt;
        K(9, 3) = -kt; K(9, 9) = kt;
        // bending in x-y plane: DoFs (uy_i, rz_i, uy_j, rz_j)
        add_bending(K, {1, 5, 7, 11}, E * Iz, phi_y, +1.0);
        // bending in x-z plane: DoFs (uz_i, ry_i, uz_j, ry_j); rotation sign flipped
        add_bending(K, {2, 4, 8, 10}, E * Iy, phi_z, -1.0);
        return K;
    }

    Eigen::Matrix<double, 12, 12> mass_local() const {
        const double rho = mat_.rho;
        const double A = sec_.area(), Iy = sec_.Iy(), Iz = sec_.Iz();
        const double E = mat_.E, G = mat_.G();
        const double kappa = shear_correction_rect(mat_.nu);
        const double L = L_;
        const double phi_y = 12.0 * E * Iz / (G * kappa * A * L * L);
        const double phi_z = 12.0 * E * Iy / (G * kappa * A * L * L);

        Eigen::Matrix<double, 12, 12> M = Eigen::Matrix<double, 12, 12>::Zero();
        // axial
        const double ma = rho * A * L / 6.0;
        M(0, 0) = 2.0 * ma; M(0, 6) = ma;
        M(6, 0) = ma;       M(6, 6) = 2.0 * ma;
        // torsion (polar rotatory inertia)
        const double mt = rho * sec_.Ip() * L / 6.0;
        M(3, 3) = 2.0 * mt; M(3, 9) = mt;
        M(9, 3) = mt;       M(9, 9) = 2.0 * mt;
        add_bending_mass(M, {1, 5, 7, 11}, rho, A, Iz, phi_y, +1.0);
        add_bending_mass(M, {2, 4, 8, 10}, rho, A, Iy, phi_z, -1.0);
        return M;
    }

  private:
    // Shear-deformable bending stiffness block (Przemieniecki).
    void add_bending(Eigen::Matrix<double, 12, 12>& K, std::array<int, 4> d,
                     double EI, double phi, double s) const {
        const double L = L_;
        const double c = EI / (L * L * L * (1.0 + phi));
        Eigen::Matrix4d B;
        B << 12.0,                s * 6.0 * L,          -12.0,                s * 6.0 * L,
             s * 6.0 * L,        (4.0 + phi) * L * L,   -s * 6.0 * L,        (2.0 - phi) * L * L,
             -12.0,              -s * 6.0 * L,           12.0,               -s * 6.0 * L,
             s * 6.0 * L,        (2.0 - phi) * L * L,   -s * 6.0 * L,        (4.0 + phi) * L * L;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) K(d[a], d[b]) += c * B(a, b);
    }

    // Consistent Timoshenko mass block, translational + rotatory parts
    // (Friedman & Kosmatka coefficients).
    void add_bending_mass(Eigen::Matrix<double, 12, 12>& M, std::array<int, 4> d,
                          double rho, double A, double I, double phi, double s) const {
        const double L = L_;
        const double p = phi, p2 = phi * phi;
        const double ct = rho * A * L / ((1.0 + p) * (1.0 + p));
        const double m11 = 13.0 / 35.0 + 7.0 * p / 10.0 + p2 / 3.0;
        const double m12 = (11.0 / 210.0 + 11.0 * p / 120.0 + p2 / 24.0) * L;
        const double m13 = 9.0 / 70.0 + 3.0 * p / 10.0 + p2 / 6.0;
        const double m14 = -(13.0 / 420.0 + 3.0 * p / 40.0 + p2 / 24.0) * L;
        const double m22 = (1.0 / 105.0 + p / 60.0 + p2 / 120.0) * L * L;
        const double m24 = -(1.0 / 140.0 + p / 60.0 + p2 / 120.0) * L * L;
        Eigen::Matrix4d T;
        T << m11,      s * m12,  m13,      s * m14,
             s * m12,  m22,      -s * m14, m24,
             m13,      -s * m14, m11,      -s * m12,
             s * m14,  m24,      -s * m12, m22;

        const double cr = rho * I / ((1.0 + p) * (1.0 + p) * L);
        const double r11 = 6.0 / 5.0;
        const double r12 = (1.0 / 10.0 - p / 2.0) * L;
        const double r22 = (2.0 / 15.0 + p / 6.0 + p2 / 3.0) * L * L;
        const double r24 = -(1.0 / 30.0 + p / 6.0 - p2 / 6.0) * L * L;
        Eigen::Matrix4d R;
        R << r11,      s * r12,  -r11,     s * r12,
             s * r12,  r22,      -s * r12, r24,
             -r11,     -s * r12, r11,      -s * r12,
             s * r12,  r24,      -s * r12, r22;

        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) M(d[a], d[b]) += ct * T(a, b) + cr * R(a, b);
    }

    Eigen::Matrix<double, 12, 12> transform(const Eigen::Matrix<double, 12, 12>& Kl) const {
        Eigen::Matrix3d lambda;
        lambda.col(0) = ex_;
        lambda.col(1) = ey_;
        lambda.col(2) = ez_;
        Eigen::Matrix<double, 12, 12> T = Eigen::Matrix<double, 12, 12>::Zero();
        for (int b = 0; b < 4; ++b) T.block<3, 3>(3 * b, 3 * b) = lambda;
        return T * Kl * T.transpose();
    }

    Material mat_;
    RectSection sec_;
    double L_ = 0.0;
    Eigen::Vector3d ex_, ey_, ez_;
};

}  // namespace pmint::fem
