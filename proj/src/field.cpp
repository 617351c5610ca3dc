#include "iuzawa/field.hpp"

#include <cmath>
#include <stdexcept>

namespace iuzawa {

Domain Domain::square(int m) {
    if (m < 4) throw std::invalid_argument("Domain: resolution must be >= 4");
    Domain d;
    d.ndims = 2;
    d.res = {m, m, 1};
    d.extent = {1.0, 1.0, 1.0};
    return d;
}

Domain Domain::spacetime(int m, int mt, double t_final) {
    if (m < 4 || mt < 4) throw std::invalid_argument("Domain: resolution must be >= 4");
    Domain d;
    d.ndims = 3;
    d.res = {m, m, mt};
    d.extent = {1.0, 1.0, t_final};
    return d;
}

std::size_t Domain::size() const {
    std::size_t n = 1;
    for (int a = 0; a < ndims; ++a) n *= static_cast<std::size_t>(res[a]);
    return n;
}

bool Domain::operator==(const Domain& o) const {
    if (ndims != o.ndims) return false;
    for (int a = 0; a < ndims; ++a)
        if (res[a] != o.res[a] || extent[a] != o.extent[a]) return false;
    return true;
}

GridField::GridField(const Domain& d, std::vector<double> v) : domain(d), values(std::move(v)) {
    if (values.size() != d.size()) throw std::invalid_argument("GridField: values length mismatch");
}

double quad_weight(const Domain& d, std::size_t i) {
    double w = 1.0;
    std::size_t rem = i;
    for (int a = 0; a < d.ndims; ++a) {
        const int n = d.res[a];
        const int ia = static_cast<int>(rem % n);
        rem /= n;
        double wa = d.spacing(a);
        if (ia == 0 || ia == n - 1) wa *= 0.5;
        w *= wa;
    }
    return w;
}

double inner_product(const GridField& a, const GridField& b) {
    if (a.domain != b.domain) throw std::invalid_argument("inner_product: domain mismatch");
    const Domain& d = a.domain;
    // Separable weights: accumulate per-axis to avoid the per-point decode.
    double s = 0.0;
    const int nx = d.res[0], ny = d.ndims >= 2 ? d.res[1] : 1, nt = d.ndims == 3 ? d.res[2] : 1;
    std::size_t i = 0;
    for (int it = 0; it < nt; ++it) {
        const double wt = (d.ndims == 3 && (it == 0 || it == nt - 1)) ? 0.5 : 1.0;
        for (int iy = 0; iy < ny; ++iy) {
            const double wy = (iy == 0 || iy == ny - 1) ? 0.5 : 1.0;
            double row = 0.0;
            row += 0.5 * a.values[i] * b.values[i];
            ++i;
            for (int ix = 1; ix < nx - 1; ++ix, ++i) row += a.values[i] * b.values[i];
            row += 0.5 * a.values[i] * b.values[i];
            ++i;
            s += wt * wy * row;
        }
    }
    double cell = 1.0;
    for (int axis = 0; axis < d.ndims; ++axis) cell *= d.spacing(axis);
    return s * cell;
}

double norm_l2(const GridField& a) { return std::sqrt(inner_product(a, a)); }

double relative_error(const GridField& u_hat, const GridField& u_star, double eps_floor) {
    if (u_hat.domain != u_star.domain) throw std::invalid_argument("relative_error: domain mismatch");
    return norm_l2(u_hat - u_star) / std::max(norm_l2(u_star), eps_floor);
}

GridField resample(const GridField& a, const Domain& target) {
    const Domain& s = a.domain;
    if (s.ndims != target.ndims) throw std::invalid_argument("resample: ndims mismatch");
    for (int ax = 0; ax < s.ndims; ++ax)
        if (s.extent[ax] != target.extent[ax]) throw std::invalid_argument("resample: extent mismatch");

    GridField out(target);
    const int nd = s.ndims;
    const int tnx = target.res[0], tny = nd >= 2 ? target.res[1] : 1, tnt = nd == 3 ? target.res[2] : 1;
    std::array<std::size_t, 3> sstride{1, static_cast<std::size_t>(s.res[0]),
                                       static_cast<std::size_t>(s.res[0]) * s.res[1]};
    std::size_t o = 0;
    for (int it = 0; it < tnt; ++it) {
        for (int iy = 0; iy < tny; ++iy) {
            for (int ix = 0; ix < tnx; ++ix, ++o) {
                std::array<int, 3> ti{ix, iy, it};
                std::array<int, 3> lo{0, 0, 0};
                std::array<double, 3> frac{0.0, 0.0, 0.0};
                for (int ax = 0; ax < nd; ++ax) {
                    // position in source index coordinates
                    double pos = (target.res[ax] == 1)
                                     ? 0.0
                                     : static_cast<double>(ti[ax]) * (s.res[ax] - 1) / (target.res[ax] - 1);
                    int i0 = static_cast<int>(std::floor(pos));
                    if (i0 > s.res[ax] - 2) i0 = s.res[ax] - 2;
                    lo[ax] = i0;
                    frac[ax] = pos - i0;
                }
                double v = 0.0;
                const int corners = 1 << nd;
                for (int c = 0; c < corners; ++c) {
                    double w = 1.0;
                    std::size_t idx = 0;
                    for (int ax = 0; ax < nd; ++ax) {
                        const int bit = (c >> ax) & 1;
                        w *= bit ? frac[ax] : (1.0 - frac[ax]);
                        idx += sstride[ax] * static_cast<std::size_t>(lo[ax] + bit);
                    }
                    v += w * a.values[idx];
                }
                out.values[o] = v;
            }
        }
    }
    return out;
}

GridField operator+(const GridField& a, const GridField& b) {
    if (a.domain != b.domain) throw std::invalid_argument("field add: domain mismatch");
    GridField r(a.domain);
    for (std::size_t i = 0; i < r.size(); ++i) r.values[i] = a.values[i] + b.values[i];
    return r;
}

GridField operator-(const GridField& a, const GridField& b) {
    if (a.domain != b.domain) throw std::invalid_argument("field sub: domain mismatch");
    GridField r(a.domain);
    for (std::size_t i = 0; i < r.size(); ++i) r.values[i] = a.values[i] - b.values[i];
    return r;
}

GridField operator*(double s, const GridField& a) {
    GridField r(a.domain);
    for (std::size_t i = 0; i < r.size(); ++i) r.values[i] = s * a.values[i];
    return r;
}

void axpy(double s, const GridField& x, GridField& y) {
    if (x.domain != y.domain) throw std::invalid_argument("axpy: domain mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) y.values[i] += s * x.values[i];
}

}  // namespace iuzawa
