#include "iuzawa/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "iuzawa/spectral.hpp"

namespace iuzawa::ad {

Tensor Tensor::zeros(std::vector<int> shape) {
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

int Tape::push(Tensor v, std::function<void(Tape&, const Tensor&)> back) {
    Node n;
    n.owned = std::move(v);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(Tensor v) { return push(std::move(v), nullptr); }

int Tape::constant_ref(const Tensor* v) {
    Node n;
    n.ext = v;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::param(const std::string& name, const Tensor* v) {
    Node n;
    n.ext = v;
    n.pname = name;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

const Tensor& Tape::value(int id) const {
    const Node& n = nodes_[id];
    return n.ext ? *n.ext : n.owned;
}

double* Tape::gbuf(int id) {
    Tensor& t = grads_[id];
    if (t.data.empty()) {
        t.shape = value(id).shape;
        t.data.assign(value(id).size(), 0.0);
    }
    return t.data.data();
}

void Tape::accumulate(int id, const double* g, std::size_t n) {
    double* dst = gbuf(id);
    for (std::size_t i = 0; i < n; ++i) dst[i] += g[i];
}

std::map<std::string, Tensor> Tape::backward(int loss) {
    if (value(loss).size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    grads_.assign(nodes_.size(), Tensor());
    grads_[loss] = Tensor::scalar(1.0);
    for (int id = loss; id >= 0; --id) {
        if (grads_[id].data.empty() || !nodes_[id].back) continue;
        nodes_[id].back(*this, grads_[id]);
    }
    std::map<std::string, Tensor> out;
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        if (nodes_[id].pname.empty() || grads_[id].data.empty()) continue;
        auto it = out.find(nodes_[id].pname);
        if (it == out.end()) {
            out.emplace(nodes_[id].pname, std::move(grads_[id]));
        } else {
            for (std::size_t i = 0; i < grads_[id].data.size(); ++i)
                it->second.data[i] += grads_[id].data[i];
        }
    }
    grads_.clear();
    return out;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

int Tape::add(int a, int b) {
    const Tensor &ta = value(a), &tb = value(b);
    require_same_shape(ta, tb, "add");
    Tensor r = ta;
    for (std::size_t i = 0; i < r.size(); ++i) r.data[i] += tb.data[i];
    return push(std::move(r), [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a, g.data.data(), g.size());
        t.accumulate(b, g.data.data(), g.size());
    });
}

int Tape::sub(int a, int b) {
    const Tensor &ta = value(a), &tb = value(b);
    require_same_shape(ta, tb, "sub");
    Tensor r = ta;
    for (std::size_t i = 0; i < r.size(); ++i) r.data[i] -= tb.data[i];
    return push(std::move(r), [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a, g.data.data(), g.size());
        double* gb = t.gbuf(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g.data[i];
    });
}

int Tape::scale(int a, double s) {
    Tensor r = value(a);
    for (auto& v : r.data) v *= s;
    return push(std::move(r), [a, s](Tape& t, const Tensor& g) {
        double* ga = t.gbuf(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g.data[i];
    });
}

int Tape::hadamard(int a, int b) {
    const Tensor &ta = value(a), &tb = value(b);
    require_same_shape(ta, tb, "hadamard");
    Tensor r = ta;
    for (std::size_t i = 0; i < r.size(); ++i) r.data[i] *= tb.data[i];
    return push(std::move(r), [a, b](Tape& t, const Tensor& g) {
        const Tensor &ta = t.value(a), &tb = t.value(b);
        double* ga = t.gbuf(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g.data[i] * tb.data[i];
        double* gb = t.gbuf(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g.data[i] * ta.data[i];
    });
}

int Tape::channel_matmul(int w, int x) {
    const Tensor &tw = value(w), &tx = value(x);
    if (tw.shape.size() != 2 || tx.shape.size() != 2 || tw.shape[1] != tx.shape[0])
        throw std::invalid_argument("channel_matmul: shape mismatch");
    const int out = tw.shape[0], in = tw.shape[1], n = tx.shape[1];
    Tensor r = Tensor::zeros({out, n});
    {
        const double* W = tw.data.data();
        const double* X = tx.data.data();
        double* Y = r.data.data();
        for (int o = 0; o < out; ++o)
            for (int i = 0; i < in; ++i) {
                const double wv = W[o * in + i];
                const double* xi = X + static_cast<std::size_t>(i) * n;
                double* yo = Y + static_cast<std::size_t>(o) * n;
                for (int j = 0; j < n; ++j) yo[j] += wv * xi[j];
            }
    }
    return push(std::move(r), [w, x, out, in, n](Tape& t, const Tensor& g) {
        const double* W = t.value(w).data.data();
        const double* X = t.value(x).data.data();
        const double* G = g.data.data();
        double* gw = t.gbuf(w);
        double* gx = t.gbuf(x);
        for (int o = 0; o < out; ++o)
            for (int i = 0; i < in; ++i) {
                const double* go = G + static_cast<std::size_t>(o) * n;
                const double* xi = X + static_cast<std::size_t>(i) * n;
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += go[j] * xi[j];
                gw[o * in + i] += s;
            }
        for (int i = 0; i < in; ++i)
            for (int o = 0; o < out; ++o) {
                const double wv = W[o * in + i];
                const double* go = G + static_cast<std::size_t>(o) * n;
                double* gi = gx + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) gi[j] += wv * go[j];
            }
    });
}

int Tape::channel_matmul_t(int w, int x) {
    const Tensor &tw = value(w), &tx = value(x);
    if (tw.shape.size() != 2 || tx.shape.size() != 2 || tw.shape[0] != tx.shape[0])
        throw std::invalid_argument("channel_matmul_t: shape mismatch");
    const int out = tw.shape[0], in = tw.shape[1], n = tx.shape[1];
    Tensor r = Tensor::zeros({in, n});
    {
        const double* W = tw.data.data();
        const double* X = tx.data.data();
        double* Y = r.data.data();
        for (int o = 0; o < out; ++o)
            for (int i = 0; i < in; ++i) {
                const double wv = W[o * in + i];
                const double* xo = X + static_cast<std::size_t>(o) * n;
                double* yi = Y + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) yi[j] += wv * xo[j];
            }
    }
    return push(std::move(r), [w, x, out, in, n](Tape& t, const Tensor& g) {
        const double* W = t.value(w).data.data();
        const double* X = t.value(x).data.data();
        const double* G = g.data.data();
        double* gw = t.gbuf(w);
        double* gx = t.gbuf(x);
        for (int o = 0; o < out; ++o)
            for (int i = 0; i < in; ++i) {
                const double* gi = G + static_cast<std::size_t>(i) * n;
                const double* xo = X + static_cast<std::size_t>(o) * n;
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += gi[j] * xo[j];
                gw[o * in + i] += s;
            }
        for (int o = 0; o < out; ++o)
            for (int i = 0; i < in; ++i) {
                const double wv = W[o * in + i];
                const double* gi = G + static_cast<std::size_t>(i) * n;
                double* go = gx + static_cast<std::size_t>(o) * n;
                for (int j = 0; j < n; ++j) go[j] += wv * gi[j];
            }
    });
}

int Tape::bias_broadcast(int x, int bias) {
    const Tensor &tx = value(x), &tb = value(bias);
    if (tx.shape.size() != 2 || tb.shape.size() != 1 || tb.shape[0] != tx.shape[0])
        throw std::invalid_argument("bias_broadcast: shape mismatch");
    const int c = tx.shape[0], n = tx.shape[1];
    Tensor r = tx;
    for (int ch = 0; ch < c; ++ch)
        for (int j = 0; j < n; ++j) r.data[static_cast<std::size_t>(ch) * n + j] += tb.data[ch];
    return push(std::move(r), [x, bias, c, n](Tape& t, const Tensor& g) {
        t.accumulate(x, g.data.data(), g.size());
        double* gb = t.gbuf(bias);
        for (int ch = 0; ch < c; ++ch) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += g.data[static_cast<std::size_t>(ch) * n + j];
            gb[ch] += s;
        }
    });
}

int Tape::relu(int a) {
    Tensor r = value(a);
    for (auto& v : r.data) v = v > 0.0 ? v : 0.0;
    return push(std::move(r), [a](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(a);
        double* ga = t.gbuf(a);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x.data[i] > 0.0) ga[i] += g.data[i];
    });
}

int Tape::gelu(int a) {
    Tensor r = value(a);
    for (auto& v : r.data) v = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
    return push(std::move(r), [a](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(a);
        double* ga = t.gbuf(a);
        const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = x.data[i];
            const double phi = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
            const double dens = inv_sqrt2pi * std::exp(-0.5 * v * v);
            ga[i] += g.data[i] * (phi + v * dens);
        }
    });
}

namespace {

// Band iteration helpers for spectral_linear. Modes are enumerated odometer
// style, axis 0 fastest, index k_a + k_max per axis for the centered band.
struct BandIter {
    int k_max, ndims;
    std::array<int, 3> k{0, 0, 0};
    bool done = false;
    explicit BandIter(int k_max, int ndims) : k_max(k_max), ndims(ndims) {
        k = {-k_max, ndims >= 2 ? -k_max : 0, ndims == 3 ? -k_max : 0};
    }
    void next() {
        for (int a = 0; a < ndims; ++a) {
            if (k[a] < k_max) {
                ++k[a];
                for (int b = 0; b < a; ++b) k[b] = -k_max;
                return;
            }
        }
        done = true;
    }
};

std::size_t wrapped_index(const std::array<int, 3>& k, const GridDims& g) {
    std::size_t idx = 0, stride = 1;
    for (int a = 0; a < g.ndims; ++a) {
        const int n = g.dims[a];
        idx += static_cast<std::size_t>((k[a] % n + n) % n) * stride;
        stride *= static_cast<std::size_t>(n);
    }
    return idx;
}

int orthant_index(const std::array<int, 3>& k, int k_max, int ndims) {
    int idx = 0, stride = 1;
    for (int a = 0; a < ndims; ++a) {
        idx += k[a] * stride;
        stride *= k_max + 1;
    }
    return idx;
}

enum class MirrorCase { Direct, Mirror, Zero };

MirrorCase classify(const std::array<int, 3>& k, int ndims) {
    bool nonneg = true, nonpos = true;
    for (int a = 0; a < ndims; ++a) {
        nonneg = nonneg && k[a] >= 0;
        nonpos = nonpos && k[a] <= 0;
    }
    if (nonneg) return MirrorCase::Direct;
    if (nonpos) return MirrorCase::Mirror;
    return MirrorCase::Zero;
}

/// Inverse transform of a band-limited spectrum: skips all-zero lines along
/// axis 0 (everything outside the wrapped band rows), then runs the remaining
/// axes densely. Divides by n and writes the real part.
void band_ifft_real(cplx* spec, const GridDims& g, int k_max, double* out) {
    const int n0 = g.dims[0];
    std::size_t total = 1;
    for (int a = 0; a < g.ndims; ++a) total *= static_cast<std::size_t>(g.dims[a]);

    // nonzero lines along axis 0: the outer (axis 1/2) index must be in the
    // wrapped band of its axis
    auto in_band = [&](int idx, int na) {
        return idx <= k_max || idx >= na - k_max;
    };
    const fft::Plan& p0 = fft::plan(n0);
    const int n1 = g.ndims >= 2 ? g.dims[1] : 1;
    const int n2 = g.ndims == 3 ? g.dims[2] : 1;
    for (int i2 = 0; i2 < n2; ++i2) {
        if (g.ndims == 3 && !in_band(i2, n2)) continue;
        for (int i1 = 0; i1 < n1; ++i1) {
            if (g.ndims >= 2 && !in_band(i1, n1)) continue;
            p0.execute(spec + (static_cast<std::size_t>(i2) * n1 + i1) * n0, +1);
        }
    }
    if (g.ndims >= 2) {
        const fft::Plan& p1 = fft::plan(n1);
        for (int i2 = 0; i2 < n2; ++i2) {
            if (g.ndims == 3 && !in_band(i2, n2)) continue;
            p1.execute_strided(spec + static_cast<std::size_t>(i2) * n0 * n1, n0, +1);
        }
    }
    if (g.ndims == 3)
        fft::plan(n2).execute_strided(spec, static_cast<std::size_t>(n0) * n1, +1);
    const double inv_n = 1.0 / static_cast<double>(total);
    for (std::size_t i = 0; i < total; ++i) out[i] = spec[i].real() * inv_n;
}

}  // namespace

namespace {

/// FFT of real channels, packed two per complex transform, restricted to the
/// centered band. Output layout: cb[mode * C + ch] in BandIter order.
void band_fft_channels(const double* x, int C, const GridDims& g, int k_max,
                       const std::vector<std::size_t>& idx_pos,
                       const std::vector<std::size_t>& idx_neg, std::vector<cplx>& cb) {
    const int n = g.total();
    const std::size_t band_total = idx_pos.size();
    cb.assign(band_total * C, cplx(0, 0));
    thread_local std::vector<cplx> work;
    if (work.size() < static_cast<std::size_t>(n)) work.resize(n);
    for (int ch = 0; ch < C; ch += 2) {
        const double* xa = x + static_cast<std::size_t>(ch) * n;
        const double* xb = (ch + 1 < C) ? x + static_cast<std::size_t>(ch + 1) * n : nullptr;
        if (xb)
            for (int j = 0; j < n; ++j) work[j] = cplx(xa[j], xb[j]);
        else
            for (int j = 0; j < n; ++j) work[j] = cplx(xa[j], 0.0);
        fft::fft_nd(work.data(), g.dims, g.ndims, -1);
        for (std::size_t mi = 0; mi < band_total; ++mi) {
            const cplx zp = work[idx_pos[mi]];
            const cplx zn = std::conj(work[idx_neg[mi]]);
            cb[mi * C + ch] = 0.5 * (zp + zn);
            if (xb) cb[mi * C + ch + 1] = cplx(0.0, -0.5) * (zp - zn);
        }
    }
}

void band_index_tables(const GridDims& g, int k_max, std::vector<std::size_t>& idx_pos,
                       std::vector<std::size_t>& idx_neg) {
    idx_pos.clear();
    idx_neg.clear();
    for (BandIter it(k_max, g.ndims); !it.done; it.next()) {
        idx_pos.push_back(wrapped_index(it.k, g));
        std::array<int, 3> nk{-it.k[0], -it.k[1], -it.k[2]};
        idx_neg.push_back(wrapped_index(nk, g));
    }
}

}  // namespace

int Tape::spectral_linear(int x, int w_re, int w_im, const GridDims& g, int k_max,
                          bool hermitian_half, bool adjoint) {
    const Tensor& tx = value(x);
    const Tensor &twr = value(w_re), &twi = value(w_im);
    if (tx.shape.size() != 2) throw std::invalid_argument("spectral_linear: x must be {C, n}");
    if (twr.shape != twi.shape || twr.shape.size() != 3)
        throw std::invalid_argument("spectral_linear: weights must be {modes, A, B}");
    const int n = g.total();
    if (tx.shape[1] != n) throw std::invalid_argument("spectral_linear: grid size mismatch");
    for (int a = 0; a < g.ndims; ++a)
        if (2 * k_max >= g.dims[a])
            throw std::invalid_argument("spectral_linear: k_max >= resolution/2");
    const int band = 2 * k_max + 1;
    int expect_modes = 1;
    for (int a = 0; a < g.ndims; ++a) expect_modes *= hermitian_half ? (k_max + 1) : band;
    if (twr.shape[0] != expect_modes)
        throw std::invalid_argument("spectral_linear: wrong mode count");
    const int A = twr.shape[1], B = twr.shape[2];
    const int cin = adjoint ? A : B;
    const int cout = adjoint ? B : A;
    if (tx.shape[0] != cin) throw std::invalid_argument("spectral_linear: channel mismatch");

    std::vector<std::size_t> idx_pos, idx_neg;
    band_index_tables(g, k_max, idx_pos, idx_neg);
    std::vector<cplx> cxb;
    band_fft_channels(tx.data.data(), cin, g, k_max, idx_pos, idx_neg, cxb);

    // per-mode matrix application into the (band-limited) output spectrum
    std::vector<cplx> cy(static_cast<std::size_t>(cout) * n, cplx(0, 0));
    const double* WR = twr.data.data();
    const double* WI = twi.data.data();
    std::size_t mi = 0;
    for (BandIter it(k_max, g.ndims); !it.done; it.next(), ++mi) {
        MirrorCase mc = MirrorCase::Direct;
        std::array<int, 3> kw = it.k;
        if (hermitian_half) {
            mc = classify(it.k, g.ndims);
            if (mc == MirrorCase::Zero) continue;
            if (mc == MirrorCase::Mirror)
                for (int a = 0; a < g.ndims; ++a) kw[a] = -it.k[a];
        } else {
            for (int a = 0; a < g.ndims; ++a) kw[a] = it.k[a] + k_max;
        }
        int widx;
        if (hermitian_half) {
            widx = orthant_index(kw, k_max, g.ndims);
        } else {
            int idx = 0, stride = 1;
            for (int a = 0; a < g.ndims; ++a) {
                idx += kw[a] * stride;
                stride *= band;
            }
            widx = idx;
        }
        const cplx* cvec = cxb.data() + mi * cin;
        const std::size_t wo = static_cast<std::size_t>(widx) * A * B;
        const bool conj_w = (mc == MirrorCase::Mirror);
        const std::size_t dst = idx_pos[mi];
        for (int o = 0; o < cout; ++o) {
            cplx acc(0, 0);
            for (int i = 0; i < cin; ++i) {
                // W stored {modes, A, B}; direct maps B->A, adjoint maps A->B
                const std::size_t e = adjoint ? wo + static_cast<std::size_t>(i) * B + o
                                              : wo + static_cast<std::size_t>(o) * B + i;
                cplx wv(WR[e], WI[e]);
                if (conj_w != adjoint) wv = std::conj(wv);  // adjoint applies W^H
                acc += wv * cvec[i];
            }
            cy[static_cast<std::size_t>(o) * n + dst] = acc;
        }
    }

    Tensor r = Tensor::zeros({cout, n});
    for (int o = 0; o < cout; ++o)
        band_ifft_real(cy.data() + static_cast<std::size_t>(o) * n, g, k_max,
                       r.data.data() + static_cast<std::size_t>(o) * n);

    auto back = [x, w_re, w_im, g, k_max, hermitian_half, adjoint, band, A, B, cin, cout, n,
                 cxb = std::move(cxb)](Tape& t, const Tensor& gout) {
        std::vector<std::size_t> idx_pos, idx_neg;
        band_index_tables(g, k_max, idx_pos, idx_neg);
        std::vector<cplx> cgb;
        band_fft_channels(gout.data.data(), cout, g, k_max, idx_pos, idx_neg, cgb);

        const double* WR = t.value(w_re).data.data();
        const double* WI = t.value(w_im).data.data();
        double* gwr = t.gbuf(w_re);
        double* gwi = t.gbuf(w_im);
        std::vector<cplx> cgx(static_cast<std::size_t>(cin) * n, cplx(0, 0));
        const double inv_n = 1.0 / n;

        std::size_t mi = 0;
        for (BandIter it(k_max, g.ndims); !it.done; it.next(), ++mi) {
            MirrorCase mc = MirrorCase::Direct;
            std::array<int, 3> kw = it.k;
            if (hermitian_half) {
                mc = classify(it.k, g.ndims);
                if (mc == MirrorCase::Zero) continue;
                if (mc == MirrorCase::Mirror)
                    for (int a = 0; a < g.ndims; ++a) kw[a] = -it.k[a];
            } else {
                for (int a = 0; a < g.ndims; ++a) kw[a] = it.k[a] + k_max;
            }
            int widx;
            if (hermitian_half) {
                widx = orthant_index(kw, k_max, g.ndims);
            } else {
                int idx = 0, stride = 1;
                for (int a = 0; a < g.ndims; ++a) {
                    idx += kw[a] * stride;
                    stride *= band;
                }
                widx = idx;
            }
            const cplx* gvec = cgb.data() + mi * cout;
            const cplx* cvec = cxb.data() + mi * cin;
            const std::size_t wo = static_cast<std::size_t>(widx) * A * B;
            const bool conj_w = (mc == MirrorCase::Mirror);

            // grad wrt x: the Hermitian transpose of the effective matrix
            for (int i = 0; i < cin; ++i) {
                cplx acc(0, 0);
                for (int o = 0; o < cout; ++o) {
                    const std::size_t e = adjoint ? wo + static_cast<std::size_t>(i) * B + o
                                                  : wo + static_cast<std::size_t>(o) * B + i;
                    cplx wv(WR[e], WI[e]);
                    if (conj_w != adjoint) wv = std::conj(wv);
                    acc += std::conj(wv) * gvec[o];
                }
                cgx[static_cast<std::size_t>(i) * n + idx_pos[mi]] = acc;
            }

            // grad wrt W: dL = (1/n) Re(dM_{oi} C_i conj(G_o)); the stored
            // entry enters conjugated on exactly one of the branch pairs.
            for (int o = 0; o < cout; ++o)
                for (int i = 0; i < cin; ++i) {
                    cplx z = cvec[i] * std::conj(gvec[o]) * inv_n;
                    const std::size_t e = adjoint ? wo + static_cast<std::size_t>(i) * B + o
                                                  : wo + static_cast<std::size_t>(o) * B + i;
                    if (conj_w != adjoint) z = std::conj(z);
                    gwr[e] += z.real();
                    gwi[e] -= z.imag();
                }
        }

        double* gx = t.gbuf(x);
        std::vector<double> line_out(n);
        for (int i = 0; i < cin; ++i) {
            band_ifft_real(cgx.data() + static_cast<std::size_t>(i) * n, g, k_max,
                           line_out.data());
            double* dst = gx + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) dst[j] += line_out[j];
        }
    };
    return push(std::move(r), std::move(back));
}

int Tape::pad_grid(int x, const GridDims& from, const GridDims& to) {
    const Tensor& tx = value(x);
    if (tx.shape.size() != 2 || tx.shape[1] != from.total())
        throw std::invalid_argument("pad_grid: shape mismatch");
    for (int a = 0; a < from.ndims; ++a)
        if (to.dims[a] < from.dims[a]) throw std::invalid_argument("pad_grid: target smaller");
    const int c = tx.shape[0];
    Tensor r = Tensor::zeros({c, to.total()});
    const int f1 = from.dims[0], f2 = from.ndims >= 2 ? from.dims[1] : 1,
              f3 = from.ndims == 3 ? from.dims[2] : 1;
    const int t1 = to.dims[0], t2 = to.ndims >= 2 ? to.dims[1] : 1;
    for (int ch = 0; ch < c; ++ch)
        for (int k3 = 0; k3 < f3; ++k3)
            for (int k2 = 0; k2 < f2; ++k2)
                for (int k1 = 0; k1 < f1; ++k1)
                    r.data[(static_cast<std::size_t>(ch) * to.total()) +
                           (static_cast<std::size_t>(k3) * t2 + k2) * t1 + k1] =
                        tx.data[(static_cast<std::size_t>(ch) * from.total()) +
                                (static_cast<std::size_t>(k3) * f2 + k2) * f1 + k1];
    return push(std::move(r), [x, from, to, c](Tape& t, const Tensor& g) {
        const int f1 = from.dims[0], f2 = from.ndims >= 2 ? from.dims[1] : 1,
                  f3 = from.ndims == 3 ? from.dims[2] : 1;
        const int t1 = to.dims[0], t2 = to.ndims >= 2 ? to.dims[1] : 1;
        double* gx = t.gbuf(x);
        for (int ch = 0; ch < c; ++ch)
            for (int k3 = 0; k3 < f3; ++k3)
                for (int k2 = 0; k2 < f2; ++k2)
                    for (int k1 = 0; k1 < f1; ++k1)
                        gx[(static_cast<std::size_t>(ch) * from.total()) +
                           (static_cast<std::size_t>(k3) * f2 + k2) * f1 + k1] +=
                            g.data[(static_cast<std::size_t>(ch) * to.total()) +
                                   (static_cast<std::size_t>(k3) * t2 + k2) * t1 + k1];
        return;
    });
}

int Tape::crop_grid(int x, const GridDims& from, const GridDims& to) {
    const Tensor& tx = value(x);
    if (tx.shape.size() != 2 || tx.shape[1] != from.total())
        throw std::invalid_argument("crop_grid: shape mismatch");
    for (int a = 0; a < from.ndims; ++a)
        if (to.dims[a] > from.dims[a]) throw std::invalid_argument("crop_grid: target larger");
    const int c = tx.shape[0];
    Tensor r = Tensor::zeros({c, to.total()});
    const int f1 = from.dims[0], f2 = from.ndims >= 2 ? from.dims[1] : 1;
    const int t1 = to.dims[0], t2 = to.ndims >= 2 ? to.dims[1] : 1,
              t3 = to.ndims == 3 ? to.dims[2] : 1;
    for (int ch = 0; ch < c; ++ch)
        for (int k3 = 0; k3 < t3; ++k3)
            for (int k2 = 0; k2 < t2; ++k2)
                for (int k1 = 0; k1 < t1; ++k1)
                    r.data[(static_cast<std::size_t>(ch) * to.total()) +
                           (static_cast<std::size_t>(k3) * t2 + k2) * t1 + k1] =
                        tx.data[(static_cast<std::size_t>(ch) * from.total()) +
                                (static_cast<std::size_t>(k3) * f2 + k2) * f1 + k1];
    return push(std::move(r), [x, from, to, c](Tape& t, const Tensor& g) {
        const int f1 = from.dims[0], f2 = from.ndims >= 2 ? from.dims[1] : 1;
        const int t1 = to.dims[0], t2 = to.ndims >= 2 ? to.dims[1] : 1,
                  t3 = to.ndims == 3 ? to.dims[2] : 1;
        double* gx = t.gbuf(x);
        for (int ch = 0; ch < c; ++ch)
            for (int k3 = 0; k3 < t3; ++k3)
                for (int k2 = 0; k2 < t2; ++k2)
                    for (int k1 = 0; k1 < t1; ++k1)
                        gx[(static_cast<std::size_t>(ch) * from.total()) +
                           (static_cast<std::size_t>(k3) * f2 + k2) * f1 + k1] +=
                            g.data[(static_cast<std::size_t>(ch) * to.total()) +
                                   (static_cast<std::size_t>(k3) * t2 + k2) * t1 + k1];
    });
}

int Tape::concat_channels(const std::vector<int>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: empty input");
    const int n = value(xs[0]).shape[1];
    int total_c = 0;
    for (int id : xs) {
        const Tensor& t = value(id);
        if (t.shape.size() != 2 || t.shape[1] != n)
            throw std::invalid_argument("concat_channels: shape mismatch");
        total_c += t.shape[0];
    }
    Tensor r = Tensor::zeros({total_c, n});
    std::size_t off = 0;
    for (int id : xs) {
        const Tensor& t = value(id);
        std::copy(t.data.begin(), t.data.end(), r.data.begin() + off);
        off += t.size();
    }
    return push(std::move(r), [xs](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (int id : xs) {
            const std::size_t sz = t.value(id).size();
            t.accumulate(id, g.data.data() + off, sz);
            off += sz;
        }
    });
}

int Tape::sum(int a) {
    double s = 0.0;
    for (double v : value(a).data) s += v;
    return push(Tensor::scalar(s), [a](Tape& t, const Tensor& g) {
        double* ga = t.gbuf(a);
        const std::size_t n = t.value(a).size();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g.data[0];
    });
}

int Tape::mean(int a) {
    const std::size_t n = value(a).size();
    double s = 0.0;
    for (double v : value(a).data) s += v;
    return push(Tensor::scalar(s / n), [a, n](Tape& t, const Tensor& g) {
        double* ga = t.gbuf(a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g.data[0] / n;
    });
}

int Tape::abs(int a) {
    Tensor r = value(a);
    for (auto& v : r.data) v = std::fabs(v);
    return push(std::move(r), [a](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(a);
        double* ga = t.gbuf(a);
        for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += x.data[i] > 0.0 ? g.data[i] : (x.data[i] < 0.0 ? -g.data[i] : 0.0);
    });
}

int Tape::max_scalar(int a, double c) {
    Tensor r = value(a);
    for (auto& v : r.data) v = v > c ? v : c;
    return push(std::move(r), [a, c](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(a);
        double* ga = t.gbuf(a);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x.data[i] > c) ga[i] += g.data[i];
    });
}

int Tape::divide(int a, int b) {
    if (value(a).size() != 1 || value(b).size() != 1)
        throw std::invalid_argument("divide: scalars expected");
    const double va = value(a).data[0], vb = value(b).data[0];
    return push(Tensor::scalar(va / vb), [a, b, va, vb](Tape& t, const Tensor& g) {
        const double ga = g.data[0] / vb;
        const double gb = -g.data[0] * va / (vb * vb);
        t.accumulate(a, &ga, 1);
        t.accumulate(b, &gb, 1);
    });
}

Tensor& ParamStore::add(const std::string& name, Tensor init) {
    auto [it, fresh] = params.emplace(name, std::move(init));
    if (!fresh) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    order.push_back(name);
    m1.emplace(name, Tensor::zeros(it->second.shape));
    m2.emplace(name, Tensor::zeros(it->second.shape));
    return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
    return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
    return it->second;
}

std::size_t ParamStore::total_parameters() const {
    std::size_t n = 0;
    for (const auto& [k, v] : params) n += v.size();
    return n;
}

void adamw_step(ParamStore& store, const std::map<std::string, Tensor>& grads, double lr,
                double beta1, double beta2, double eps, double weight_decay) {
    store.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(store.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(store.step));
    for (const auto& name : store.order) {
        Tensor& p = store.params.at(name);
        Tensor& m = store.m1.at(name);
        Tensor& v = store.m2.at(name);
        auto git = grads.find(name);
        const Tensor* g = git == grads.end() ? nullptr : &git->second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g ? g->data[i] : 0.0;
            m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * gi;
            v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= lr * weight_decay * p.data[i] + lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

double lr_schedule(int epoch, double base_lr, double decay, int every) {
    if (epoch < 0) throw std::invalid_argument("lr_schedule: epoch must be >= 0");
    return base_lr * std::pow(decay, epoch / every);
}

}  // namespace iuzawa::ad
