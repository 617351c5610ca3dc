#include "iuzawa/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "iuzawa/rng.hpp"

namespace iuzawa {

using ad::GridDims;
using ad::Tape;
using ad::Tensor;

int NetConfig::padded_res(int m) const {
    const long p = std::lround(static_cast<double>(pad_to) * m / base_m);
    if (p < m) throw std::invalid_argument("NetConfig: resolution exceeds the padded box");
    return static_cast<int>(p);
}

namespace {

GridDims grid_dims(const Domain& d) {
    GridDims g;
    g.ndims = d.ndims;
    for (int a = 0; a < d.ndims; ++a) g.dims[a] = d.res[a];
    return g;
}

GridDims padded_dims(const NetConfig& cfg, const Domain& d) {
    GridDims g;
    g.ndims = d.ndims;
    for (int a = 0; a < d.ndims; ++a) g.dims[a] = cfg.padded_res(d.res[a]);
    return g;
}

int pow_int(int b, int e) {
    int r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

Tensor uniform_tensor(std::vector<int> shape, double bound, RngState& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

void init_fno(ad::ParamStore& store, const std::string& prefix, const NetConfig& cfg,
              RngState& rng) {
    const int mp = cfg.m_p;
    const int band_modes = pow_int(2 * cfg.k_max + 1, cfg.ndims);
    const double r_bound = 1.0 / (mp * (2 * cfg.k_max + 1));
    store.add(prefix + ".P", uniform_tensor({mp, 1}, 1.0, rng));
    for (int l = 0; l < cfg.fourier_layers; ++l) {
        const std::string ls = std::to_string(l);
        store.add(prefix + ".R" + ls + "_re", uniform_tensor({band_modes, mp, mp}, r_bound, rng));
        store.add(prefix + ".R" + ls + "_im", uniform_tensor({band_modes, mp, mp}, r_bound, rng));
        store.add(prefix + ".W" + ls, uniform_tensor({mp, mp}, 1.0 / std::sqrt(mp), rng));
    }
    store.add(prefix + ".Q", uniform_tensor({1, mp}, 1.0 / std::sqrt(mp), rng));
}

void init_qs(ad::ParamStore& store, const std::string& prefix, const NetConfig& cfg,
             RngState& rng) {
    const int mp = cfg.m_p;
    const int orth_modes = pow_int(cfg.k_max + 1, cfg.ndims);
    const double p_bound = 1.0 / (mp * (cfg.k_max + 1));
    store.add(prefix + ".P", uniform_tensor({mp, 1}, 1.0, rng));
    store.add(prefix + ".V", uniform_tensor({mp, mp}, 1.0 / std::sqrt(mp), rng));
    store.add(prefix + ".Phi_re", uniform_tensor({orth_modes, mp, mp}, p_bound, rng));
    store.add(prefix + ".Phi_im", uniform_tensor({orth_modes, mp, mp}, p_bound, rng));
}

void init_qa(ad::ParamStore& store, const std::string& prefix, const NetConfig& cfg,
             RngState& rng) {
    const int w = cfg.qa_width, s = cfg.qa_skip_channels();
    const int in0 = 1 + s;  // (r, r, xi)
    store.add(prefix + ".W0", uniform_tensor({w, in0}, 1.0 / std::sqrt(in0), rng));
    for (int l = 1; l < cfg.qa_layers; ++l) {
        const std::string ls = std::to_string(l);
        store.add(prefix + ".W" + ls, uniform_tensor({w, w + s}, 1.0 / std::sqrt(w + s), rng));
        store.add(prefix + ".b" + ls, uniform_tensor({w}, 1.0 / std::sqrt(w + s), rng));
    }
    const std::string ls = std::to_string(cfg.qa_layers);
    store.add(prefix + ".W" + ls, uniform_tensor({1, w + s}, 1.0 / std::sqrt(w + s), rng));
    store.add(prefix + ".b" + ls, uniform_tensor({1}, 1.0 / std::sqrt(w + s), rng));
}

}  // namespace

NetParams NetParams::init(const NetConfig& cfg, std::uint64_t seed) {
    NetParams net;
    net.cfg = cfg;
    RngState rng(seed);
    const int sets = cfg.shared ? 1 : cfg.layers;
    for (int k = 0; k < sets; ++k) {
        const std::string p = cfg.shared ? "shared" : "layer" + std::to_string(k);
        init_fno(net.store, p + ".S", cfg, rng);
        init_fno(net.store, p + ".A", cfg, rng);
        init_qs(net.store, p + ".qs", cfg, rng);
        init_qa(net.store, p + ".qa", cfg, rng);
    }
    return net;
}

ad::Tensor field_to_tensor(const GridField& g) {
    return Tensor({1, static_cast<int>(g.size())}, g.values);
}

GridField tensor_to_field(const Tensor& t, const Domain& d) {
    if (t.size() != d.size()) throw std::invalid_argument("tensor_to_field: size mismatch");
    return GridField(d, t.data);
}

SampleTensors make_sample(const NetConfig& cfg, const GridField& y_d, const GridField& f,
                          const GridField& u_a, const GridField& u_b) {
    SampleTensors s;
    s.domain = y_d.domain;
    s.y_d = field_to_tensor(y_d);
    s.f = field_to_tensor(f);
    s.xi.push_back(field_to_tensor(u_a));
    s.xi.push_back(field_to_tensor(u_b));
    if (cfg.xi_channels == 3) {
        GridField bf(y_d.domain);
        for (auto& v : bf.values) v = cfg.beta;
        s.xi.push_back(field_to_tensor(bf));
    }
    return s;
}

int fno_forward(Tape& tape, const NetParams& net, const std::string& prefix, int field,
                const Domain& domain) {
    const NetConfig& cfg = net.cfg;
    const GridDims gd = grid_dims(domain), pd = padded_dims(cfg, domain);
    auto P = [&](const std::string& n) { return tape.param(prefix + "." + n, &net.store.at(prefix + "." + n)); };

    int v = tape.channel_matmul(P("P"), tape.pad_grid(field, gd, pd));
    for (int l = 0; l < cfg.fourier_layers; ++l) {
        const std::string ls = std::to_string(l);
        int spec = tape.spectral_linear(v, P("R" + ls + "_re"), P("R" + ls + "_im"), pd,
                                        cfg.k_max, false, false);
        int mix = tape.channel_matmul(P("W" + ls), v);
        v = tape.gelu(tape.add(spec, mix));
    }
    return tape.crop_grid(tape.channel_matmul(P("Q"), v), pd, gd);
}

int qs_forward(Tape& tape, const NetParams& net, const std::string& prefix, int field,
               const Domain& domain) {
    const NetConfig& cfg = net.cfg;
    const GridDims gd = grid_dims(domain), pd = padded_dims(cfg, domain);
    auto P = [&](const std::string& n) { return tape.param(prefix + "." + n, &net.store.at(prefix + "." + n)); };
    const int p_node = P("P"), v_node = P("V");

    // gamma u + P^T V^T V P u (the channel chain collapses to a scalar factor)
    int lift = tape.channel_matmul(p_node, field);
    int vv = tape.channel_matmul_t(v_node, tape.channel_matmul(v_node, lift));
    int pointwise = tape.add(tape.scale(field, cfg.gamma), tape.channel_matmul_t(p_node, vv));

    // Phi* Phi convolution on the padded torus, then restriction
    int liftp = tape.channel_matmul(p_node, tape.pad_grid(field, gd, pd));
    int s1 = tape.spectral_linear(liftp, P("Phi_re"), P("Phi_im"), pd, cfg.k_max, true, false);
    int s2 = tape.spectral_linear(s1, P("Phi_re"), P("Phi_im"), pd, cfg.k_max, true, true);
    int conv = tape.crop_grid(tape.channel_matmul_t(p_node, s2), pd, gd);

    // divide by the normalized quadrature weights: K0 is symmetric in the
    // plain dot product, W^{-1} K0 is self-adjoint in the field geometry
    GridField inv_w(domain);
    double cell = 1.0;
    for (int a = 0; a < domain.ndims; ++a) cell *= domain.spacing(a);
    for (std::size_t i = 0; i < inv_w.size(); ++i)
        inv_w.values[i] = cell / quad_weight(domain, i);
    int conv_w = tape.hadamard(conv, tape.constant(field_to_tensor(inv_w)));

    return tape.add(pointwise, conv_w);
}

int qa_forward(Tape& tape, const NetParams& net, const std::string& prefix, int r,
               const std::vector<int>& xi) {
    const NetConfig& cfg = net.cfg;
    if (static_cast<int>(xi.size()) != cfg.xi_channels)
        throw std::invalid_argument("qa_forward: xi channel count mismatch");
    auto P = [&](const std::string& n) { return tape.param(prefix + "." + n, &net.store.at(prefix + "." + n)); };

    std::vector<int> in0{r, r};
    in0.insert(in0.end(), xi.begin(), xi.end());
    int v = tape.channel_matmul(P("W0"), tape.concat_channels(in0));

    std::vector<int> skip{r};
    skip.insert(skip.end(), xi.begin(), xi.end());
    for (int l = 1; l < cfg.qa_layers; ++l) {
        const std::string ls = std::to_string(l);
        std::vector<int> cat{v};
        cat.insert(cat.end(), skip.begin(), skip.end());
        v = tape.relu(tape.bias_broadcast(
            tape.channel_matmul(P("W" + ls), tape.concat_channels(cat)), P("b" + ls)));
    }
    const std::string ls = std::to_string(cfg.qa_layers);
    std::vector<int> cat{v};
    cat.insert(cat.end(), skip.begin(), skip.end());
    return tape.bias_broadcast(tape.channel_matmul(P("W" + ls), tape.concat_channels(cat)),
                               P("b" + ls));
}

ForwardTrace iuzawa_forward(Tape& tape, const NetParams& net, const SampleTensors& sample,
                            bool capture_states) {
    const NetConfig& cfg = net.cfg;
    const Domain& d = sample.domain;
    const int n = static_cast<int>(d.size());

    int y_d = tape.constant_ref(&sample.y_d);
    int f = tape.constant_ref(&sample.f);
    std::vector<int> xi;
    for (const auto& t : sample.xi) xi.push_back(tape.constant_ref(&t));

    int u = tape.constant(Tensor::zeros({1, n}));
    int p = tape.constant(Tensor::zeros({1, n}));
    ForwardTrace trace;
    if (capture_states) trace.states.emplace_back(u, p);

    for (int k = 0; k < cfg.layers; ++k) {
        const std::string pref = net.prefix(k);
        int a_out = fno_forward(tape, net, pref + ".A", p, d);
        int r = tape.sub(tape.scale(u, cfg.tau), a_out);
        u = qa_forward(tape, net, pref + ".qa", r, xi);
        int s_out = fno_forward(tape, net, pref + ".S", tape.add(u, f), d);
        int resid = tape.sub(tape.sub(s_out, p), y_d);
        p = tape.add(p, qs_forward(tape, net, pref + ".qs", resid, d));
        if (capture_states) trace.states.emplace_back(u, p);
    }
    trace.u_final = u;
    return trace;
}

GridField net_infer(const NetParams& net, const SampleTensors& sample) {
    Tape tape;
    ForwardTrace tr = iuzawa_forward(tape, net, sample, false);
    return tensor_to_field(tape.value(tr.u_final), sample.domain);
}

std::vector<SaddleState> net_trajectory(const NetParams& net, const SampleTensors& sample) {
    Tape tape;
    ForwardTrace tr = iuzawa_forward(tape, net, sample, true);
    std::vector<SaddleState> states;
    for (auto [ui, pi] : tr.states)
        states.push_back({tensor_to_field(tape.value(ui), sample.domain),
                          tensor_to_field(tape.value(pi), sample.domain)});
    return states;
}

std::vector<SaddleState> exact_operator_trajectory(const ProblemInstance& prob, double sigma,
                                                   double tau, int layers) {
    const Domain& d = prob.domain();
    MultiplierSpec step = prob.mult;
    step.tau = tau;
    GridField sf_yd = prob.op->apply(prob.f) - prob.y_d;
    std::vector<SaddleState> states;
    states.push_back({GridField(d), GridField(d)});
    for (int k = 0; k < layers; ++k) {
        const SaddleState& prev = states.back();
        GridField u = resolvent(prob.reg, step, tau * prev.u - prob.op->apply_adjoint(prev.p));
        GridField p = prev.p + (1.0 / sigma) * (prob.op->apply(u) - prev.p + sf_yd);
        states.push_back({std::move(u), std::move(p)});
    }
    return states;
}

namespace {

template <typename T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void save_checkpoint(const NetParams& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write("IUZC", 4);
    put<std::uint16_t>(os, 1);
    const NetConfig& c = net.cfg;
    for (int v : {c.layers, c.shared ? 1 : 0, c.fourier_layers, c.m_p, c.k_max, c.pad_to,
                  c.base_m, c.qa_width, c.qa_layers, c.xi_channels, c.ndims})
        put<std::int32_t>(os, v);
    put<double>(os, c.tau);
    put<double>(os, c.gamma);
    put<double>(os, c.beta);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(net.store.order.size()));
    for (const auto& name : net.store.order) {
        const Tensor& t = net.store.at(name);
        put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
        for (int s : t.shape) put<std::uint32_t>(os, static_cast<std::uint32_t>(s));
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

NetParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, "IUZC", 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    if (get<std::uint16_t>(is) != 1)
        throw std::runtime_error("load_checkpoint: unsupported version");
    NetParams net;
    NetConfig& c = net.cfg;
    c.layers = get<std::int32_t>(is);
    c.shared = get<std::int32_t>(is) != 0;
    c.fourier_layers = get<std::int32_t>(is);
    c.m_p = get<std::int32_t>(is);
    c.k_max = get<std::int32_t>(is);
    c.pad_to = get<std::int32_t>(is);
    c.base_m = get<std::int32_t>(is);
    c.qa_width = get<std::int32_t>(is);
    c.qa_layers = get<std::int32_t>(is);
    c.xi_channels = get<std::int32_t>(is);
    c.ndims = get<std::int32_t>(is);
    c.tau = get<double>(is);
    c.gamma = get<double>(is);
    c.beta = get<double>(is);
    const auto count = get<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = get<std::uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto ndim = get<std::uint32_t>(is);
        std::vector<int> shape(ndim);
        for (auto& s : shape) s = static_cast<int>(get<std::uint32_t>(is));
        Tensor t = Tensor::zeros(shape);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        net.store.add(name, std::move(t));
    }
    if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);
    return net;
}

}  // namespace iuzawa
