#pragma once

#include <cmath>
#include <map>
#include <string>

#include "pmint/core.hpp"
#include "pmint/fem/frame.hpp"

namespace pmint::fem {

/// 3D cantilever beam, clamped at x = 0, tip force tilted in the y-z plane.
struct BeamSpec {
    double h = 0.03;             // height (local z), the parameter
    double t = 0.01;             // thickness (local y)
    double l = 1.0;
    double E = 2.1e11;
    double nu = 0.3;
    double rho = 7860.0;
    double rayleigh_alpha = 8e-6;
    double rayleigh_beta = 8.0;
    int n_elements = 50;
    double force_tilt = kPi / 4.0;  // angle in the y-z plane

    void validate() const {
        if (h <= 0 || t <= 0 || l <= 0 || E <= 0 || rho <= 0)
            throw DomainError("beam spec: physical values must be strictly positive");
        if (!(nu > 0 && nu < 0.5)) throw DomainError("beam spec: need 0 < nu < 0.5");
        if (n_elements < 2) throw DomainError("beam spec: n_elements >= 2 required");
    }
};

/// Kelvin cell (tetrakaidecahedron edge skeleton) of square-section struts,
/// bottom face clamped, uniform input on the left face, output on the right.
struct KelvinCellSpec {
    double l_x = 0.0675;
    double l_y = 0.0325;
    double l_z = 0.05;
    double t = 0.001;
    double E = 4.35e9;
    double nu = 0.3;
    double rho = 1180.0;
    double rayleigh_alpha = 8e-6;
    double rayleigh_beta = 8.0;
    int elements_per_strut = 10;

    void validate() const {
        if (l_x <= 0 || l_y <= 0 || l_z <= 0 || t <= 0 || E <= 0 || rho <= 0)
            throw DomainError("kelvin spec: lengths and material values must be strictly positive");
        if (!(nu > 0 && nu < 0.5)) throw DomainError("kelvin spec: need 0 < nu < 0.5");
        if (elements_per_strut < 1) throw DomainError("kelvin spec: elements_per_strut >= 1 required");
    }
};

inline Frame build_beam_frame(const BeamSpec& s) {
    s.validate();
    Frame fr;
    fr.mat = Material{s.E, s.nu, s.rho};
    fr.rayleigh_alpha = s.rayleigh_alpha;
    fr.rayleigh_beta = s.rayleigh_beta;
    RectSection sec{s.t, s.h};  // width t along y, height h along z
    const int ne = s.n_elements;
    for (int i = 0; i <= ne; ++i)
        fr.nodes.emplace_back(s.l * double(i) / double(ne), 0.0, 0.0);
    for (int i = 0; i < ne; ++i) fr.elements.push_back({i, i + 1, sec});
    fr.clamped_nodes.insert(0);
    const int tip = ne;
    const double fy = std::cos(s.force_tilt), fz = std::sin(s.force_tilt);
    fr.force = {{6 * tip + 1, fy}, {6 * tip + 2, fz}};
    fr.output = {{6 * tip + 1, fy}, {6 * tip + 2, fz}};
    return fr;
}

inline SystemMatrices assemble_timoshenko_beam(const BeamSpec& s) {
    return build_beam_frame(s).assemble();
}

/// Canonical tetrakaidecahedron: the 24 permutations of (0, +-1, +-2),
/// edges between vertices at squared distance 2. Scaled by (l_x, l_y, l_z)/4.
inline Frame build_kelvin_frame(const KelvinCellSpec& s) {
    s.validate();
    Frame fr;
    fr.mat = Material{s.E, s.nu, s.rho};
    fr.rayleigh_alpha = s.rayleigh_alpha;
    fr.rayleigh_beta = s.rayleigh_beta;
    fr.normalize_io = true;
    RectSection sec{s.t, s.t};

    std::vector<Eigen::Vector3d> verts;
    const int vals[3] = {0, 1, 2};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) {
                if (a == b || b == c || a == c) continue;
                for (int sb : {-1, 1})
                    for (int sc : {-1, 1}) {
                        double xyz[3];
                        xyz[a] = 0.0;
                        xyz[b] = sb * 1.0;
                        xyz[c] = sc * 2.0;
                        verts.emplace_back(xyz[0], xyz[1], xyz[2]);
                    }
            }
    // dedupe (the zero coordinate admits no sign duplicate, but keep it robust)
    std::vector<Eigen::Vector3d> uniq;
    for (const auto& v : verts) {
        bool seen = false;
        for (const auto& u : uniq)
            if ((u - v).norm() < 1e-12) seen = true;
        if (!seen) uniq.push_back(v);
    }
    verts = uniq;

    const Eigen::Vector3d scale(s.l_x / 4.0, s.l_y / 4.0, s.l_z / 4.0);
    for (auto& v : verts) v = v.cwiseProduct(scale);
    fr.nodes = verts;

    std::vector<std::pair<int, int>> struts;
    for (int i = 0; i < (int)verts.size(); ++i)
        for (int j = i + 1; j < (int)verts.size(); ++j) {
            Eigen::Vector3d d = verts[j].cwiseQuotient(scale) - verts[i].cwiseQuotient(scale);
            if (std::abs(d.squaredNorm() - 2.0) < 1e-9) struts.emplace_back(i, j);
        }

    const double zmin = -2.0 * scale.z();
    auto is_bottom_vertex = [&](int v) { return std::abs(fr.nodes[v].z() - zmin) < 1e-12; };

    const int eps = s.elements_per_strut;
    for (auto [a, b] : struts) {
        int prev = a;
        std::vector<int> strut_nodes{a};
        for (int k = 1; k < eps; ++k) {
            double tau = double(k) / double(eps);
            fr.nodes.push_back((1.0 - tau) * fr.nodes[a] + tau * fr.nodes[b]);
            int mid = (int)fr.nodes.size() - 1;
            fr.elements.push_back({prev, mid, sec});
            strut_nodes.push_back(mid);
            prev = mid;
        }
        fr.elements.push_back({prev, b, sec});
        strut_nodes.push_back(b);
        if (is_bottom_vertex(a) && is_bottom_vertex(b))
            for (int nd : strut_nodes) fr.clamped_nodes.insert(nd);
    }

    const double xmin = -2.0 * scale.x(), xmax = 2.0 * scale.x();
    for (int nd = 0; nd < (int)fr.nodes.size(); ++nd) {
        if (std::abs(fr.nodes[nd].x() - xmin) < 1e-12)
            for (int k = 0; k < 6; ++k) fr.force.emplace_back(6 * nd + k, 1.0);
        if (std::abs(fr.nodes[nd].x() - xmax) < 1e-12)
            for (int k = 0; k < 6; ++k) fr.output.emplace_back(6 * nd + k, 1.0);
    }
    return fr;
}

inline SystemMatrices assemble_kelvin_cell(const KelvinCellSpec& s) {
    return build_kelvin_frame(s).assemble();
}

enum class FomFamily { beam, kelvin2d, kelvin3d };

inline FomFamily family_from_string(const std::string& s) {
    if (s == "beam") return FomFamily::beam;
    if (s == "kelvin2d") return FomFamily::kelvin2d;
    if (s == "kelvin3d") return FomFamily::kelvin3d;
    throw ConfigError("unknown model family: " + s);
}

inline int family_dim(FomFamily f) { return f == FomFamily::beam ? 1 : (f == FomFamily::kelvin2d ? 2 : 3); }

/// Physical parameter boxes: beam -> h; kelvin2d -> (l_x, l_y);
/// kelvin3d -> (l_x, l_y/l_x, l_z/l_x).
struct FamilyBox {
    Vec lower, upper;
};

inline FamilyBox family_box(FomFamily f) {
    FamilyBox b;
    switch (f) {
        case FomFamily::beam:
            b.lower = Vec::Constant(1, 0.02);
            b.upper = Vec::Constant(1, 0.05);
            break;
        case FomFamily::kelvin2d:
            b.lower = (Vec(2) << 0.055, 0.020).finished();
            b.upper = (Vec(2) << 0.080, 0.045).finished();
            break;
        case FomFamily::kelvin3d:
            b.lower = (Vec(3) << 0.045, 0.6, 1.1).finished();
            b.upper = (Vec(3) << 0.055, 0.9, 1.4).finished();
            break;
    }
    return b;
}

/// Parametric FOM: maps a parameter point onto a spec and assembles it.
/// The base specs carry the non-parametric (Table) values and mesh settings.
class ParametricFom {
  public:
    ParametricFom(FomFamily family, BeamSpec beam_base, KelvinCellSpec kelvin_base)
        : family_(family), beam_(beam_base), kelvin_(kelvin_base), box_(family_box(family)) {}

    FomFamily family() const { return family_; }
    int dim() const { return family_dim(family_); }
    const FamilyBox& box() const { return box_; }
    void set_box(const FamilyBox& b) { box_ = b; }

    SystemMatrices operator()(const Vec& p) const {
        check_in_box(p);
        switch (family_) {
            case FomFamily::beam: {
                BeamSpec s = beam_;
                s.h = p[0];
                return assemble_timoshenko_beam(s);
            }
            case FomFamily::kelvin2d: {
                KelvinCellSpec s = kelvin_;
                s.l_x = p[0];
                s.l_y = p[1];
                return assemble_kelvin_cell(s);
            }
            case FomFamily::kelvin3d: {
                KelvinCellSpec s = kelvin_;
                s.l_x = p[0];
                s.l_y = p[1] * p[0];
                s.l_z = p[2] * p[0];
                return assemble_kelvin_cell(s);
            }
        }
        throw DomainError("unreachable family");
    }

    void check_in_box(const Vec& p) const {
        if (p.size() != dim()) throw DomainError("parameter dimension mismatch");
        const double tol = 1e-12;
        for (Index i = 0; i < p.size(); ++i)
            if (p[i] < box_.lower[i] - tol || p[i] > box_.upper[i] + tol)
                throw DomainError("parameter point outside the family box");
    }

  private:
    FomFamily family_;
    BeamSpec beam_;
    KelvinCellSpec kelvin_;
    FamilyBox box_;
};

}  // namespace pmint::fem

namespace pmint {
using fem::assemble_kelvin_cell;
using fem::assemble_timoshenko_beam;
using fem::BeamSpec;
using fem::family_box;
using fem::family_dim;
using fem::family_from_string;
using fem::FamilyBox;
using fem::FomFamily;
using fem::KelvinCellSpec;
using fem::ParametricFom;
}  // namespace pmint
