#pragma once

#include <algorithm>
#include <set>
#include <vector>

#include "pmint/core.hpp"
#include "pmint/fem/timoshenko_element.hpp"

namespace pmint::fem {

/// A frame of Timoshenko beam elements: nodes, 2-node elements, clamped nodes
/// and nodal load/output vectors. Assembles the clamped SystemMatrices.
struct Frame {
    std::vector<Eigen::Vector3d> nodes;
    struct Elem {
        int a, b;
        RectSection sec;
    };
    std::vector<Elem> elements;
    Material mat;
    double rayleigh_alpha = 0.0;
    double rayleigh_beta = 0.0;
    std::set<int> clamped_nodes;
    // nodal forces / outputs on the full (unclamped) DoF set, 6 per node
    std::vector<std::pair<int, double>> force;   // (global dof, value)
    std::vector<std::pair<int, double>> output;  // (global dof, value)
    bool normalize_io = false;

    Index n_full() const { return 6 * static_cast<Index>(nodes.size()); }

    SpMat assemble_stiffness_full() const { return assemble_full(false); }
    SpMat assemble_mass_full() const { return assemble_full(true); }

    SystemMatrices assemble() const {
        SpMat Kf = assemble_full(false);
        SpMat Mf = assemble_full(true);

        // free-DoF index map
        std::vector<Index> keep;
        keep.reserve(n_full());
        for (Index nd = 0; nd < static_cast<Index>(nodes.size()); ++nd) {
            if (clamped_nodes.count(static_cast<int>(nd))) continue;
            for (Index k = 0; k < 6; ++k) keep.push_back(6 * nd + k);
        }
        const Index n = static_cast<Index>(keep.size());
        std::vector<Index> full2red(n_full(), -1);
        for (Index i = 0; i < n; ++i) full2red[keep[i]] = i;

        SystemMatrices sys;
        sys.n = n;
        sys.K = restrict(Kf, full2red, n);
        sys.M = restrict(Mf, full2red, n);
        sys.C = rayleigh_alpha * sys.M + rayleigh_beta * sys.K;
        sys.C.makeCompressed();

        sys.f = Vec::Zero(n);
        for (auto [dof, v] : force)
            if (full2red[dof] >= 0) sys.f[full2red[dof]] += v;
        Vec gt = Vec::Zero(n);
        for (auto [dof, v] : output)
            if (full2red[dof] >= 0) gt[full2red[dof]] += v;
        if (normalize_io) {
            if (sys.f.norm() == 0.0 || gt.norm() == 0.0)
                throw NumericError("frame assembly: zero input or output vector");
            sys.f /= sys.f.norm();
            gt /= gt.norm();
        }
        sys.g = gt.transpose();
        return sys;
    }

  private:
    SpMat assemble_full(bool mass) const {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(elements.size() * 144);
        for (const auto& e : elements) {
            TimoshenkoElement el(mat, e.sec, nodes[e.a], nodes[e.b]);
            Eigen::Matrix<double, 12, 12> ke = mass ? el.mass_global() : el.stiffness_global();
            const Index base[2] = {6 * static_cast<Index>(e.a), 6 * static_cast<Index>(e.b)};
            for (int i = 0; i < 12; ++i)
                for (int j = 0; j < 12; ++j)
                    trip.emplace_back(base[i / 6] + i % 6, base[j / 6] + j % 6, ke(i, j));
        }
        SpMat A(n_full(), n_full());
        A.setFromTriplets(trip.begin(), trip.end());
        A.makeCompressed();
        return A;
    }

    static SpMat restrict(const SpMat& A, const std::vector<Index>& map, Index n) {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(A.nonZeros());
        for (Index k = 0; k < A.outerSize(); ++k)
            for (SpMat::InnerIterator it(A, k); it; ++it)
                if (map[it.row()] >= 0 && map[it.col()] >= 0)
                    trip.emplace_back(map[it.row()], map[it.col()], it.value());
        SpMat R(n, n);
        R.setFromTriplets(trip.begin(), trip.end());
        R.makeCompressed();
        return R;
    }
};

}  // namespace pmint::fem
