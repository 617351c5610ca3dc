#include "iuzawa/spectral.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace iuzawa {

std::size_t SpectralCoeffs::size() const {
    std::size_t n = 1;
    for (int a = 0; a < ndims; ++a) n *= static_cast<std::size_t>(shape[a]);
    return n;
}

namespace fft {

namespace {

std::vector<int> factorize(int n) {
    std::vector<int> f;
    while (n % 4 == 0) {
        f.push_back(4);
        n /= 4;
    }
    for (int p = 2; p * p <= n;) {
        if (n % p == 0) {
            f.push_back(p);
            n /= p;
        } else {
            ++p;
        }
    }
    if (n > 1) f.push_back(n);
    return f;
}

void build_perm(std::vector<int>& perm, const std::vector<int>& factors, int out0, int in0,
                int stride, int n, int depth) {
    if (n == 1) {
        perm[out0] = in0;
        return;
    }
    const int r = factors[depth], m = n / r;
    for (int q = 0; q < r; ++q)
        build_perm(perm, factors, out0 + q * m, in0 + q * stride, stride * r, m, depth + 1);
}

}  // namespace

Plan::Plan(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("fft: size must be positive");
    const std::vector<int> factors = factorize(n);
    perm_.resize(n);
    build_perm(perm_, factors, 0, 0, 1, n, 0);

    // stages from the innermost combine (last factor) outward
    int block = 1;
    for (int d = static_cast<int>(factors.size()) - 1; d >= 0; --d) {
        Stage s;
        s.radix = factors[d];
        s.m = block;
        s.block = s.radix * block;
        s.tw_fwd.resize(static_cast<std::size_t>(s.radix - 1) * s.m);
        s.tw_inv.resize(s.tw_fwd.size());
        for (int q = 1; q < s.radix; ++q)
            for (int k2 = 0; k2 < s.m; ++k2) {
                const double ang = -2.0 * std::numbers::pi * q * k2 / s.block;
                const cplx w(std::cos(ang), std::sin(ang));
                s.tw_fwd[static_cast<std::size_t>(q - 1) * s.m + k2] = w;
                s.tw_inv[static_cast<std::size_t>(q - 1) * s.m + k2] = std::conj(w);
            }
        s.wr_fwd.resize(static_cast<std::size_t>(s.radix) * s.radix);
        s.wr_inv.resize(s.wr_fwd.size());
        for (int q = 0; q < s.radix; ++q)
            for (int k = 0; k < s.radix; ++k) {
                const double ang = -2.0 * std::numbers::pi * q * k / s.radix;
                const cplx w(std::cos(ang), std::sin(ang));
                s.wr_fwd[static_cast<std::size_t>(q) * s.radix + k] = w;
                s.wr_inv[static_cast<std::size_t>(q) * s.radix + k] = std::conj(w);
            }
        block = s.block;
        stages_.push_back(std::move(s));
    }
}

void Plan::execute(cplx* x, int sign) const {
    if (n_ == 1) return;
    thread_local std::vector<cplx> work;
    if (work.size() < static_cast<std::size_t>(n_)) work.resize(n_);
    std::memcpy(work.data(), x, sizeof(cplx) * n_);
    for (int i = 0; i < n_; ++i) x[i] = work[perm_[i]];

    const bool inv = sign > 0;
    const double s3 = inv ? std::sqrt(3.0) / 2.0 : -std::sqrt(3.0) / 2.0;
    for (const Stage& st : stages_) {
        const cplx* tw = (inv ? st.tw_inv : st.tw_fwd).data();
        const int r = st.radix, m = st.m, block = st.block;
        for (int b = 0; b < n_; b += block) {
            cplx* base = x + b;
            switch (r) {
                case 2:
                    for (int k2 = 0; k2 < m; ++k2) {
                        const cplx t0 = base[k2];
                        const cplx t1 = base[m + k2] * tw[k2];
                        base[k2] = t0 + t1;
                        base[m + k2] = t0 - t1;
                    }
                    break;
                case 3:
                    for (int k2 = 0; k2 < m; ++k2) {
                        const cplx t0 = base[k2];
                        const cplx t1 = base[m + k2] * tw[k2];
                        const cplx t2 = base[2 * m + k2] * tw[m + k2];
                        const cplx s = t1 + t2;
                        const cplx d = t1 - t2;
                        const cplx rot(-s3 * d.imag(), s3 * d.real());  // i*s3*d
                        base[k2] = t0 + s;
                        base[m + k2] = t0 - 0.5 * s + rot;
                        base[2 * m + k2] = t0 - 0.5 * s - rot;
                    }
                    break;
                case 4:
                    for (int k2 = 0; k2 < m; ++k2) {
                        const cplx t0 = base[k2];
                        const cplx t1 = base[m + k2] * tw[k2];
                        const cplx t2 = base[2 * m + k2] * tw[m + k2];
                        const cplx t3 = base[3 * m + k2] * tw[2 * m + k2];
                        const cplx a = t0 + t2, b2 = t0 - t2;
                        const cplx c = t1 + t3, d = t1 - t3;
                        // forward: w4 = -i; inverse: +i
                        const cplx id = inv ? cplx(-d.imag(), d.real())
                                            : cplx(d.imag(), -d.real());
                        base[k2] = a + c;
                        base[m + k2] = b2 + id;
                        base[2 * m + k2] = a - c;
                        base[3 * m + k2] = b2 - id;
                    }
                    break;
                default: {
                    const cplx* wr = (inv ? st.wr_inv : st.wr_fwd).data();
                    cplx t[64];
                    std::unique_ptr<cplx[]> theap;
                    cplx* tb = t;
                    if (r > 64) {
                        theap.reset(new cplx[r]);
                        tb = theap.get();
                    }
                    for (int k2 = 0; k2 < m; ++k2) {
                        tb[0] = base[k2];
                        for (int q = 1; q < r; ++q)
                            tb[q] = base[q * m + k2] * tw[static_cast<std::size_t>(q - 1) * m + k2];
                        for (int k1 = 0; k1 < r; ++k1) {
                            cplx acc = tb[0];
                            for (int q = 1; q < r; ++q)
                                acc += tb[q] * wr[static_cast<std::size_t>(q) * r + k1];
                            base[k1 * m + k2] = acc;
                        }
                    }
                    break;
                }
            }
        }
    }
}

const Plan& plan(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<Plan>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, std::make_unique<Plan>(n)).first;
    return *it->second;
}

void Plan::execute_strided(cplx* base, std::size_t stride, int sign) const {
    if (n_ == 1) return;
    thread_local std::vector<cplx> work;
    if (work.size() < static_cast<std::size_t>(n_) * stride) work.resize(n_ * stride);
    std::memcpy(work.data(), base, sizeof(cplx) * n_ * stride);
    for (int i = 0; i < n_; ++i)
        std::memcpy(base + static_cast<std::size_t>(i) * stride,
                    work.data() + static_cast<std::size_t>(perm_[i]) * stride,
                    sizeof(cplx) * stride);

    const bool inv = sign > 0;
    const double s3 = inv ? std::sqrt(3.0) / 2.0 : -std::sqrt(3.0) / 2.0;
    for (const Stage& st : stages_) {
        const cplx* tw = (inv ? st.tw_inv : st.tw_fwd).data();
        const int r = st.radix, m = st.m, block = st.block;
        for (int b = 0; b < n_; b += block) {
            cplx* bb = base + static_cast<std::size_t>(b) * stride;
            for (int k2 = 0; k2 < m; ++k2) {
                cplx* r0 = bb + static_cast<std::size_t>(k2) * stride;
                switch (r) {
                    case 2: {
                        const cplx w1 = tw[k2];
                        cplx* r1 = r0 + static_cast<std::size_t>(m) * stride;
                        for (std::size_t l = 0; l < stride; ++l) {
                            const cplx t0 = r0[l], t1 = r1[l] * w1;
                            r0[l] = t0 + t1;
                            r1[l] = t0 - t1;
                        }
                        break;
                    }
                    case 3: {
                        const cplx w1 = tw[k2], w2 = tw[m + k2];
                        cplx* r1 = r0 + static_cast<std::size_t>(m) * stride;
                        cplx* r2 = r1 + static_cast<std::size_t>(m) * stride;
                        for (std::size_t l = 0; l < stride; ++l) {
                            const cplx t0 = r0[l], t1 = r1[l] * w1, t2 = r2[l] * w2;
                            const cplx s = t1 + t2, d = t1 - t2;
                            const cplx rot(-s3 * d.imag(), s3 * d.real());
                            r0[l] = t0 + s;
                            r1[l] = t0 - 0.5 * s + rot;
                            r2[l] = t0 - 0.5 * s - rot;
                        }
                        break;
                    }
                    case 4: {
                        const cplx w1 = tw[k2], w2 = tw[m + k2], w3 = tw[2 * m + k2];
                        cplx* r1 = r0 + static_cast<std::size_t>(m) * stride;
                        cplx* r2 = r1 + static_cast<std::size_t>(m) * stride;
                        cplx* r3 = r2 + static_cast<std::size_t>(m) * stride;
                        for (std::size_t l = 0; l < stride; ++l) {
                            const cplx t0 = r0[l], t1 = r1[l] * w1, t2 = r2[l] * w2,
                                       t3 = r3[l] * w3;
                            const cplx a = t0 + t2, b2 = t0 - t2;
                            const cplx c = t1 + t3, d = t1 - t3;
                            const cplx id = inv ? cplx(-d.imag(), d.real())
                                                : cplx(d.imag(), -d.real());
                            r0[l] = a + c;
                            r1[l] = b2 + id;
                            r2[l] = a - c;
                            r3[l] = b2 - id;
                        }
                        break;
                    }
                    default: {
                        const cplx* wr = (inv ? st.wr_inv : st.wr_fwd).data();
                        thread_local std::vector<cplx> tcol;
                        if (tcol.size() < static_cast<std::size_t>(r)) tcol.resize(r);
                        for (std::size_t l = 0; l < stride; ++l) {
                            tcol[0] = r0[l];
                            for (int q = 1; q < r; ++q)
                                tcol[q] = r0[static_cast<std::size_t>(q) * m * stride + l] *
                                          tw[static_cast<std::size_t>(q - 1) * m + k2];
                            for (int k1 = 0; k1 < r; ++k1) {
                                cplx acc = tcol[0];
                                for (int q = 1; q < r; ++q)
                                    acc += tcol[q] * wr[static_cast<std::size_t>(q) * r + k1];
                                r0[static_cast<std::size_t>(k1) * m * stride + l] = acc;
                            }
                        }
                        break;
                    }
                }
            }
        }
    }
}

void fft_nd(cplx* data, const std::array<int, 3>& dims, int ndims, int sign) {
    std::size_t total = 1;
    for (int a = 0; a < ndims; ++a) total *= static_cast<std::size_t>(dims[a]);

    // Axis 0 is contiguous.
    {
        const Plan& p = plan(dims[0]);
        for (std::size_t off = 0; off < total; off += dims[0]) p.execute(data + off, sign);
    }
    std::size_t stride = dims[0];
    for (int a = 1; a < ndims; ++a) {
        const int n = dims[a];
        const Plan& p = plan(n);
        const std::size_t block = stride * n;  // one full axis-a plane set
        for (std::size_t base = 0; base < total; base += block)
            p.execute_strided(data + base, stride, sign);
        stride *= n;
    }
}

void dst1(const double* in, double* out, int n) {
    const int L = 2 * (n + 1);
    thread_local std::vector<cplx> buf;
    buf.assign(L, cplx(0.0, 0.0));
    for (int j = 1; j <= n; ++j) {
        buf[j] = cplx(in[j - 1], 0.0);
        buf[L - j] = cplx(-in[j - 1], 0.0);
    }
    plan(L).execute(buf.data(), -1);
    for (int k = 1; k <= n; ++k) out[k - 1] = -0.5 * buf[k].imag();
}

void dct1(const double* in, double* out, int n) {
    const int N = n - 1;
    const int L = 2 * N;
    thread_local std::vector<cplx> buf;
    buf.assign(L, cplx(0.0, 0.0));
    for (int j = 0; j < n; ++j) buf[j] = cplx(in[j], 0.0);
    for (int j = 1; j < N; ++j) buf[L - j] = cplx(in[j], 0.0);
    plan(L).execute(buf.data(), -1);
    for (int k = 0; k < n; ++k) out[k] = 0.5 * buf[k].real();
}

namespace {

using Kernel = void (*)(const double*, double*, int);

// Apply a 1-D real transform along every axis of a dense block.
void apply_all_axes(std::vector<double>& data, const std::array<int, 3>& dims, int ndims, Kernel k) {
    std::size_t total = 1;
    for (int a = 0; a < ndims; ++a) total *= static_cast<std::size_t>(dims[a]);
    std::vector<double> in_line, out_line;
    std::size_t stride = 1;
    for (int a = 0; a < ndims; ++a) {
        const int n = dims[a];
        in_line.resize(n);
        out_line.resize(n);
        const std::size_t block = stride * n;
        for (std::size_t base = 0; base < total; base += block) {
            for (std::size_t lo = 0; lo < stride; ++lo) {
                double* src = data.data() + base + lo;
                for (int j = 0; j < n; ++j) in_line[j] = src[j * stride];
                k(in_line.data(), out_line.data(), n);
                for (int j = 0; j < n; ++j) src[j * stride] = out_line[j];
            }
        }
        stride *= n;
    }
}

}  // namespace

}  // namespace fft

SpectralCoeffs dst(const GridField& a) {
    const Domain& d = a.domain;
    SpectralCoeffs c;
    c.kind = SpectralCoeffs::Kind::Sine;
    c.ndims = d.ndims;
    std::array<int, 3> idim{1, 1, 1};
    for (int ax = 0; ax < d.ndims; ++ax) {
        c.shape[ax] = d.res[ax] - 2;
        idim[ax] = d.res[ax] - 2;
    }
    // gather interior
    std::size_t n_int = c.size();
    std::vector<double> buf(n_int);
    const int nx = d.res[0], ny = d.res[1], nt = d.ndims == 3 ? d.res[2] : 3;
    std::size_t o = 0;
    const int t_hi = d.ndims == 3 ? d.res[2] - 1 : 2;
    for (int it = 1; it < t_hi; ++it)
        for (int iy = 1; iy < ny - 1; ++iy)
            for (int ix = 1; ix < nx - 1; ++ix, ++o)
                buf[o] = a.values[(static_cast<std::size_t>(d.ndims == 3 ? it : 0) * ny + iy) * nx + ix];
    (void)nt;
    fft::apply_all_axes(buf, idim, d.ndims, fft::dst1);
    c.values.resize(n_int);
    for (std::size_t i = 0; i < n_int; ++i) c.values[i] = cplx(buf[i], 0.0);
    return c;
}

GridField idst(const SpectralCoeffs& c, const Domain& target) {
    if (c.kind != SpectralCoeffs::Kind::Sine) throw std::invalid_argument("idst: kind mismatch");
    std::array<int, 3> idim{1, 1, 1};
    double scale = 1.0;
    for (int ax = 0; ax < c.ndims; ++ax) {
        if (c.shape[ax] != target.res[ax] - 2) throw std::invalid_argument("idst: shape mismatch");
        idim[ax] = c.shape[ax];
        scale *= 2.0 / (target.res[ax] - 1);
    }
    std::vector<double> buf(c.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = c.values[i].real();
    fft::apply_all_axes(buf, idim, c.ndims, fft::dst1);
    GridField out(target);
    const int nx = target.res[0], ny = target.res[1];
    const int t_hi = c.ndims == 3 ? target.res[2] - 1 : 2;
    std::size_t o = 0;
    for (int it = 1; it < t_hi; ++it)
        for (int iy = 1; iy < ny - 1; ++iy)
            for (int ix = 1; ix < nx - 1; ++ix, ++o)
                out.values[(static_cast<std::size_t>(c.ndims == 3 ? it : 0) * ny + iy) * nx + ix] =
                    scale * buf[o];
    return out;
}

SpectralCoeffs dct(const GridField& a) {
    const Domain& d = a.domain;
    SpectralCoeffs c;
    c.kind = SpectralCoeffs::Kind::Cosine;
    c.ndims = d.ndims;
    std::array<int, 3> dim{1, 1, 1};
    for (int ax = 0; ax < d.ndims; ++ax) {
        c.shape[ax] = d.res[ax];
        dim[ax] = d.res[ax];
    }
    std::vector<double> buf(a.values);
    fft::apply_all_axes(buf, dim, d.ndims, fft::dct1);
    c.values.resize(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) c.values[i] = cplx(buf[i], 0.0);
    return c;
}

GridField idct(const SpectralCoeffs& c, const Domain& target) {
    if (c.kind != SpectralCoeffs::Kind::Cosine) throw std::invalid_argument("idct: kind mismatch");
    std::array<int, 3> dim{1, 1, 1};
    double scale = 1.0;
    for (int ax = 0; ax < c.ndims; ++ax) {
        if (c.shape[ax] != target.res[ax]) throw std::invalid_argument("idct: shape mismatch");
        dim[ax] = c.shape[ax];
        scale *= 2.0 / (target.res[ax] - 1);
    }
    std::vector<double> buf(c.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = c.values[i].real();
    fft::apply_all_axes(buf, dim, c.ndims, fft::dct1);
    GridField out(target);
    for (std::size_t i = 0; i < buf.size(); ++i) out.values[i] = scale * buf[i];
    return out;
}

SpectralCoeffs fft_trunc(const GridField& a, int k_max) {
    const Domain& d = a.domain;
    for (int ax = 0; ax < d.ndims; ++ax)
        if (2 * k_max >= d.res[ax])
            throw std::invalid_argument("fft_trunc: k_max >= resolution/2");
    std::vector<cplx> buf(a.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = cplx(a.values[i], 0.0);
    std::array<int, 3> dims{d.res[0], d.ndims >= 2 ? d.res[1] : 1, d.ndims == 3 ? d.res[2] : 1};
    fft::fft_nd(buf.data(), dims, d.ndims, -1);

    SpectralCoeffs c;
    c.kind = SpectralCoeffs::Kind::PeriodicTruncated;
    c.ndims = d.ndims;
    const int band = 2 * k_max + 1;
    for (int ax = 0; ax < d.ndims; ++ax) c.shape[ax] = band;
    c.values.assign(c.size(), cplx(0.0, 0.0));
    const int b1 = band, b2 = d.ndims >= 2 ? band : 1, b3 = d.ndims == 3 ? band : 1;
    std::size_t o = 0;
    for (int k3 = 0; k3 < b3; ++k3)
        for (int k2 = 0; k2 < b2; ++k2)
            for (int k1 = 0; k1 < b1; ++k1, ++o) {
                std::size_t src = 0, stride = 1;
                const int ks[3] = {k1 - k_max, k2 - k_max, k3 - k_max};
                for (int ax = 0; ax < d.ndims; ++ax) {
                    const int n = d.res[ax];
                    src += static_cast<std::size_t>((ks[ax] % n + n) % n) * stride;
                    stride *= n;
                }
                c.values[o] = buf[src];
            }
    return c;
}

GridField ifft_trunc(const SpectralCoeffs& c, const Domain& target) {
    if (c.kind != SpectralCoeffs::Kind::PeriodicFull &&
        c.kind != SpectralCoeffs::Kind::PeriodicTruncated)
        throw std::invalid_argument("ifft_trunc: kind mismatch");
    const int band = c.shape[0];
    const int k_max = (band - 1) / 2;
    for (int ax = 0; ax < c.ndims; ++ax)
        if (2 * k_max >= target.res[ax])
            throw std::invalid_argument("ifft_trunc: band exceeds target resolution");
    std::vector<cplx> buf(target.size(), cplx(0.0, 0.0));
    std::array<int, 3> dims{target.res[0], c.ndims >= 2 ? target.res[1] : 1,
                            c.ndims == 3 ? target.res[2] : 1};
    const int b2 = c.ndims >= 2 ? band : 1, b3 = c.ndims == 3 ? band : 1;
    std::size_t o = 0;
    for (int k3 = 0; k3 < b3; ++k3)
        for (int k2 = 0; k2 < b2; ++k2)
            for (int k1 = 0; k1 < band; ++k1, ++o) {
                std::size_t dst = 0, stride = 1;
                const int ks[3] = {k1 - k_max, k2 - k_max, k3 - k_max};
                for (int ax = 0; ax < c.ndims; ++ax) {
                    const int n = target.res[ax];
                    dst += static_cast<std::size_t>((ks[ax] % n + n) % n) * stride;
                    stride *= n;
                }
                buf[dst] = c.values[o];
            }
    fft::fft_nd(buf.data(), dims, c.ndims, +1);
    double inv_n = 1.0;
    for (int ax = 0; ax < c.ndims; ++ax) inv_n /= target.res[ax];
    GridField out(target);
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = buf[i].real() * inv_n;
    return out;
}

GridField pad_extend(const GridField& a, int target_res) {
    const Domain& d = a.domain;
    for (int ax = 0; ax < d.ndims; ++ax)
        if (target_res < d.res[ax]) throw std::invalid_argument("pad_extend: target smaller than source");
    Domain pd = d;
    for (int ax = 0; ax < d.ndims; ++ax) {
        // pad preserves the grid spacing; the box grows with the points
        pd.extent[ax] = d.extent[ax] * (target_res - 1) / (d.res[ax] - 1);
        pd.res[ax] = target_res;
    }
    GridField out(pd);
    const int nx = d.res[0], ny = d.ndims >= 2 ? d.res[1] : 1, nt = d.ndims == 3 ? d.res[2] : 1;
    for (int it = 0; it < nt; ++it)
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix)
                out.values[(static_cast<std::size_t>(d.ndims == 3 ? it : 0) * target_res + iy) *
                               target_res + ix] =
                    a.values[(static_cast<std::size_t>(d.ndims == 3 ? it : 0) * ny + iy) * nx + ix];
    return out;
}

GridField crop(const GridField& a, const Domain& orig) {
    const Domain& d = a.domain;
    if (d.ndims != orig.ndims) throw std::invalid_argument("crop: ndims mismatch");
    for (int ax = 0; ax < d.ndims; ++ax)
        if (orig.res[ax] > d.res[ax]) throw std::invalid_argument("crop: target larger than source");
    GridField out(orig);
    const int nx = orig.res[0], ny = orig.ndims >= 2 ? orig.res[1] : 1,
              nt = orig.ndims == 3 ? orig.res[2] : 1;
    for (int it = 0; it < nt; ++it)
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix)
                out.values[(static_cast<std::size_t>(orig.ndims == 3 ? it : 0) * ny + iy) * nx + ix] =
                    a.values[(static_cast<std::size_t>(orig.ndims == 3 ? it : 0) * d.res[1] + iy) *
                                 d.res[0] + ix];
    return out;
}

}  // namespace iuzawa
