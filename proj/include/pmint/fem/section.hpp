#pragma once

#include <cmath>

#include "pmint/core.hpp"

namespace pmint::fem {

/// Rectangular cross section, width w along local y, height h along local z.
struct RectSection {
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double Iy() const { return w * h * h * h / 12.0; }  // bending about local y (deflection in z)
    double Iz() const { return h * w * w * w / 12.0; }  // bending about local z (deflection in y)
    double Ip() const { return Iy() + Iz(); }

    /// Saint-Venant torsion constant from the series solution for rectangles
    /// (Timoshenko & Goodier), a >= b half side lengths.
    double J() const {
        double a = 0.5 * std::max(w, h);
        double b = 0.5 * std::min(w, h);
        double sum = 0.0;
        for (int n = 1; n <= 39; n += 2) {
            sum += std::tanh(n * kPi * a / (2.0 * b)) / std::pow(double(n), 5);
        }
        return (16.0 / 3.0) * a * b * b * b *
               (1.0 - 192.0 * b / (kPi * kPi * kPi * kPi * kPi * a) * sum);
    }
};

/// Shear correction factor for rectangular sections.
inline double shear_correction_rect(double nu) {
    return 10.0 * (1.0 + nu) / (12.0 + 11.0 * nu);
}

}  // namespace pmint::fem
