#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmint {

using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using SpCMat = Eigen::SparseMatrix<std::complex<double>>;
using Index = Eigen::Index;

// Error categories map onto CLI exit codes: config -> 2, numeric -> 3.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DomainError : public std::runtime_error {
  public:
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
  public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Full order model instance at one parameter point: second-order SISO system
///   s^2 M x + s C x + K x = f u,  y = g x.
struct SystemMatrices {
    SpMat M;
    SpMat C;
    SpMat K;
    Vec f;
    RowVec g;
    Index n = 0;
};

/// Galerkin-reduced system together with the basis that produced it.
struct ReducedModel {
    Mat M_r;
    Mat C_r;
    Mat K_r;
    Vec f_r;
    RowVec g_r;
    Mat V;    // n x r, orthonormal columns; empty for purely interpolated models
    Index r = 0;
    Vec p;    // parameter point (physical coordinates)
};

}  // namespace pmint
