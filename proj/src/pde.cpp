#include "iuzawa/pde.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "iuzawa/rng.hpp"
#include "iuzawa/spectral.hpp"

namespace iuzawa {

namespace {

// Discrete 1-d Laplacian eigenvalues (4/h^2) sin^2(j pi h / 2), shared by the
// Dirichlet (j = 1..m-2) and Neumann (j = 0..m-1) bases.
std::vector<double> axis_eigs(int m, double h, int j0, int j1) {
    std::vector<double> e;
    e.reserve(j1 - j0);
    for (int j = j0; j < j1; ++j) {
        const double s = std::sin(0.5 * std::numbers::pi * j * h);
        e.push_back(4.0 / (h * h) * s * s);
    }
    return e;
}

}  // namespace

PdeOperator::PdeOperator(const PdeKind& kind, const Domain& domain)
    : kind_(kind), domain_(domain) {
    const int m = domain.res[0];
    const double h = domain.spacing(0);
    if (domain.res[1] != m || domain.extent[0] != domain.extent[1])
        throw std::invalid_argument("PdeOperator: spatial grid must be square");

    switch (kind.variant) {
        case PdeKind::Variant::EllipticDirichlet: {
            if (domain.ndims != 2) throw std::invalid_argument("EllipticDirichlet: 2-d domain expected");
            auto e1 = axis_eigs(m, h, 1, m - 1);
            eig_.resize(e1.size() * e1.size());
            for (std::size_t j = 0; j < e1.size(); ++j)
                for (std::size_t i = 0; i < e1.size(); ++i) eig_[j * e1.size() + i] = e1[i] + e1[j];
            break;
        }
        case PdeKind::Variant::EllipticAnisoNeumann: {
            if (domain.ndims != 2) throw std::invalid_argument("EllipticAnisoNeumann: 2-d domain expected");
            if (kind.a1 <= 0 || kind.a2 <= 0 || kind.c <= 0)
                throw std::invalid_argument("EllipticAnisoNeumann: need a1, a2, c > 0");
            auto e1 = axis_eigs(m, h, 0, m);
            eig_.resize(static_cast<std::size_t>(m) * m);
            for (int j = 0; j < m; ++j)
                for (int i = 0; i < m; ++i)
                    eig_[static_cast<std::size_t>(j) * m + i] = kind.a1 * e1[i] + kind.a2 * e1[j] + kind.c;
            break;
        }
        case PdeKind::Variant::HeatDirichlet: {
            if (domain.ndims != 3) throw std::invalid_argument("HeatDirichlet: space-time domain expected");
            auto e1 = axis_eigs(m, h, 1, m - 1);
            const double dt = domain.spacing(2);
            eig_.resize(e1.size() * e1.size());
            heat_fac_.resize(eig_.size());
            for (std::size_t j = 0; j < e1.size(); ++j)
                for (std::size_t i = 0; i < e1.size(); ++i) {
                    eig_[j * e1.size() + i] = e1[i] + e1[j];
                    heat_fac_[j * e1.size() + i] = 1.0 / (1.0 + dt * eig_[j * e1.size() + i]);
                }
            break;
        }
    }
}

GridField PdeOperator::apply(const GridField& g) const {
    if (g.domain != domain_) throw std::invalid_argument("apply_S: domain mismatch");
    switch (kind_.variant) {
        case PdeKind::Variant::EllipticDirichlet: {
            SpectralCoeffs c = dst(g);
            for (std::size_t i = 0; i < c.values.size(); ++i) c.values[i] /= eig_[i];
            return idst(c, domain_);
        }
        case PdeKind::Variant::EllipticAnisoNeumann: {
            SpectralCoeffs c = dct(g);
            for (std::size_t i = 0; i < c.values.size(); ++i) c.values[i] /= eig_[i];
            return idct(c, domain_);
        }
        case PdeKind::Variant::HeatDirichlet:
            return heat_forward(g);
    }
    throw std::logic_error("unreachable");
}

GridField PdeOperator::apply_adjoint(const GridField& w) const {
    if (kind_.variant == PdeKind::Variant::HeatDirichlet) return heat_adjoint(w);
    // elliptic discretizations are self-adjoint in the quadrature inner product
    return apply(w);
}

namespace {

// interior sine transform of one m x m time slice
void slice_dst(const double* slice, int m, std::vector<double>& coef) {
    const int n = m - 2;
    coef.resize(static_cast<std::size_t>(n) * n);
    for (int iy = 1; iy < m - 1; ++iy)
        for (int ix = 1; ix < m - 1; ++ix)
            coef[static_cast<std::size_t>(iy - 1) * n + (ix - 1)] =
                slice[static_cast<std::size_t>(iy) * m + ix];
    std::vector<double> out(n), colin(n);
    for (int r = 0; r < n; ++r) {
        fft::dst1(coef.data() + static_cast<std::size_t>(r) * n, out.data(), n);
        std::copy(out.begin(), out.end(), coef.begin() + static_cast<std::size_t>(r) * n);
    }
    for (int ccol = 0; ccol < n; ++ccol) {
        for (int r = 0; r < n; ++r) colin[r] = coef[static_cast<std::size_t>(r) * n + ccol];
        fft::dst1(colin.data(), out.data(), n);
        for (int r = 0; r < n; ++r) coef[static_cast<std::size_t>(r) * n + ccol] = out[r];
    }
}

void slice_idst(const std::vector<double>& coef, int m, double* slice) {
    const int n = m - 2;
    const double scale = 4.0 / ((m - 1.0) * (m - 1.0));
    std::vector<double> buf(coef), out(n), colin(n);
    for (int r = 0; r < n; ++r) {
        fft::dst1(buf.data() + static_cast<std::size_t>(r) * n, out.data(), n);
        std::copy(out.begin(), out.end(), buf.begin() + static_cast<std::size_t>(r) * n);
    }
    for (int ccol = 0; ccol < n; ++ccol) {
        for (int r = 0; r < n; ++r) colin[r] = buf[static_cast<std::size_t>(r) * n + ccol];
        fft::dst1(colin.data(), out.data(), n);
        for (int r = 0; r < n; ++r) buf[static_cast<std::size_t>(r) * n + ccol] = out[r];
    }
    for (int iy = 0; iy < m; ++iy)
        for (int ix = 0; ix < m; ++ix)
            slice[static_cast<std::size_t>(iy) * m + ix] =
                (ix == 0 || ix == m - 1 || iy == 0 || iy == m - 1)
                    ? 0.0
                    : scale * buf[static_cast<std::size_t>(iy - 1) * n + (ix - 1)];
}

}  // namespace

GridField PdeOperator::heat_forward(const GridField& g) const {
    const int m = domain_.res[0], mt = domain_.res[2];
    const double dt = domain_.spacing(2);
    const std::size_t slice_n = static_cast<std::size_t>(m) * m;
    const int n = m - 2;
    GridField y(domain_);
    std::vector<double> yc(static_cast<std::size_t>(n) * n, 0.0), gc;
    // y_0 = 0; (I + dt A) y_{k} = y_{k-1} + dt g_k
    for (int k = 1; k < mt; ++k) {
        slice_dst(g.values.data() + static_cast<std::size_t>(k) * slice_n, m, gc);
        for (std::size_t i = 0; i < yc.size(); ++i) yc[i] = (yc[i] + dt * gc[i]) * heat_fac_[i];
        slice_idst(yc, m, y.values.data() + static_cast<std::size_t>(k) * slice_n);
    }
    return y;
}

GridField PdeOperator::heat_adjoint(const GridField& w) const {
    if (w.domain != domain_) throw std::invalid_argument("apply_S_adjoint: domain mismatch");
    const int m = domain_.res[0], mt = domain_.res[2];
    const double dt = domain_.spacing(2);
    const std::size_t slice_n = static_cast<std::size_t>(m) * m;
    const int n = m - 2;

    // v = W^{-1} S^T (W w): weight, run the transposed march backwards, unweight.
    GridField z(domain_);
    for (std::size_t i = 0; i < z.size(); ++i) z.values[i] = quad_weight(domain_, i) * w.values[i];

    GridField v(domain_);
    std::vector<double> qc(static_cast<std::size_t>(n) * n, 0.0), zc;
    for (int k = mt - 1; k >= 1; --k) {
        slice_dst(z.values.data() + static_cast<std::size_t>(k) * slice_n, m, zc);
        for (std::size_t i = 0; i < qc.size(); ++i) qc[i] = (qc[i] + dt * zc[i]) * heat_fac_[i];
        slice_idst(qc, m, v.values.data() + static_cast<std::size_t>(k) * slice_n);
    }
    for (std::size_t i = 0; i < v.size(); ++i) v.values[i] /= quad_weight(domain_, i);
    return v;
}

double PdeOperator::operator_norm_estimate(int iters, std::uint64_t seed) const {
    if (iters < 1) throw std::invalid_argument("operator_norm_estimate: iters must be >= 1");
    RngState rng(seed);
    GridField v(domain_);
    for (auto& x : v.values) x = rng.normal();
    double est = 0.0;
    for (int k = 0; k < iters; ++k) {
        const double nv = norm_l2(v);
        if (nv == 0.0) break;
        v = (1.0 / nv) * v;
        GridField t = apply_adjoint(apply(v));  // S* S v
        est = std::sqrt(std::max(0.0, inner_product(t, v)));
        v = t;
    }
    return est;
}

}  // namespace iuzawa
