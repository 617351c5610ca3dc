#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace iuzawa {

/// Uniform vertex-centered grid over a box. Axis 0 is x (fastest in memory),
/// axis 1 is y, axis 2 is time (slowest) for space-time domains.
struct Domain {
    int ndims = 2;
    std::array<int, 3> res{0, 0, 0};        // points per axis, >= 4
    std::array<double, 3> extent{1.0, 1.0, 1.0};

    static Domain square(int m);
    static Domain spacetime(int m, int mt, double t_final = 1.0);

    double spacing(int axis) const { return extent[axis] / (res[axis] - 1); }
    std::size_t size() const;
    bool operator==(const Domain& o) const;
    bool operator!=(const Domain& o) const { return !(*this == o); }
};

/// Scalar field sampled on a Domain, row-major with time slowest.
struct GridField {
    Domain domain;
    std::vector<double> values;

    GridField() = default;
    explicit GridField(const Domain& d) : domain(d), values(d.size(), 0.0) {}
    GridField(const Domain& d, std::vector<double> v);

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const { return values.size(); }
};

/// Quadrature weight of grid point i: prod(spacing) with 1/2 per touching
/// boundary face (trapezoid rule). Exposed for modules that need W directly.
double quad_weight(const Domain& d, std::size_t i);

/// Discrete L2(Omega) inner product (trapezoid weights).
double inner_product(const GridField& a, const GridField& b);

double norm_l2(const GridField& a);

/// ||u_hat - u_star|| / max(||u_star||, eps_floor).
double relative_error(const GridField& u_hat, const GridField& u_star, double eps_floor);

/// Bilinear/trilinear resampling onto a target grid with the same extents.
GridField resample(const GridField& a, const Domain& target);

// Elementwise helpers used throughout the solvers.
GridField operator+(const GridField& a, const GridField& b);
GridField operator-(const GridField& a, const GridField& b);
GridField operator*(double s, const GridField& a);
void axpy(double s, const GridField& x, GridField& y);  // y += s*x

}  // namespace iuzawa
