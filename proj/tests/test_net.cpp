#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>

#include "iuzawa/grf.hpp"
#include "iuzawa/net.hpp"
#include "iuzawa/rng.hpp"

using namespace iuzawa;
using ad::Tape;
using ad::Tensor;

namespace {

NetConfig small_cfg() {
    NetConfig c;
    c.layers = 2;
    c.shared = false;
    c.fourier_layers = 2;
    c.m_p = 4;
    c.k_max = 2;
    c.pad_to = 12;
    c.base_m = 8;
    c.qa_width = 8;
    c.qa_layers = 3;
    c.xi_channels = 2;
    return c;
}

GridField random_field(const Domain& d, RngState& rng) {
    GridField g(d);
    for (auto& v : g.values) v = rng.normal();
    return g;
}

void zero_param(NetParams& net, const std::string& name) {
    for (auto& v : net.store.at(name).data) v = 0.0;
}

}  // namespace

TEST_CASE("fno: zero projection or zero layer weights give the zero field") {
    NetConfig cfg = small_cfg();
    Domain d = Domain::square(8);
    RngState rng(3);
    GridField x = random_field(d, rng);

    NetParams net = NetParams::init(cfg, 1);
    zero_param(net, "layer0.S.Q");
    Tape t1;
    int out1 = fno_forward(t1, net, "layer0.S", t1.constant(field_to_tensor(x)), d);
    for (double v : t1.value(out1).data) CHECK(v == 0.0);

    NetParams net2 = NetParams::init(cfg, 2);
    for (int l = 0; l < cfg.fourier_layers; ++l) {
        zero_param(net2, "layer0.S.R" + std::to_string(l) + "_re");
        zero_param(net2, "layer0.S.R" + std::to_string(l) + "_im");
        zero_param(net2, "layer0.S.W" + std::to_string(l));
    }
    Tape t2;
    int out2 = fno_forward(t2, net2, "layer0.S", t2.constant(field_to_tensor(x)), d);
    for (double v : t2.value(out2).data) CHECK(v == 0.0);
}

TEST_CASE("fno discretization consistency across resolutions") {
    NetConfig cfg;
    cfg.fourier_layers = 3;
    cfg.m_p = 8;
    cfg.k_max = 4;
    cfg.pad_to = 36;
    cfg.base_m = 32;
    cfg.layers = 1;
    NetParams net = NetParams::init(cfg, 5);

    // band-limited input sampled at two resolutions
    auto sample_at = [](int m) {
        Domain d = Domain::square(m);
        GridField g(d);
        for (int iy = 0; iy < m; ++iy)
            for (int ix = 0; ix < m; ++ix) {
                const double x = ix / (m - 1.0), y = iy / (m - 1.0);
                g.values[iy * static_cast<std::size_t>(m) + ix] =
                    std::sin(std::numbers::pi * x) * std::sin(2 * std::numbers::pi * y) +
                    0.5 * std::cos(3 * std::numbers::pi * x) * std::sin(std::numbers::pi * y);
            }
        return g;
    };
    GridField x32 = sample_at(32), x64 = sample_at(64);
    Tape ta, tb;
    int o32 = fno_forward(ta, net, "layer0.S", ta.constant(field_to_tensor(x32)),
                          Domain::square(32));
    int o64 = fno_forward(tb, net, "layer0.S", tb.constant(field_to_tensor(x64)),
                          Domain::square(64));
    GridField f32 = tensor_to_field(ta.value(o32), Domain::square(32));
    GridField f64 = tensor_to_field(tb.value(o64), Domain::square(64));
    GridField up = resample(f32, Domain::square(64));
    CHECK(relative_error(up, f64, 1e-12) <= 5e-2);
}

TEST_CASE("qs realizes gamma-tilde times the identity") {
    NetConfig cfg = small_cfg();
    cfg.gamma = 1e-6;
    NetParams net = NetParams::init(cfg, 7);
    const double gamma_tilde = 2.5;
    // P = e1, V = sqrt(gamma_tilde - gamma) I, Phi = 0
    auto& P = net.store.at("layer0.qs.P");
    for (auto& v : P.data) v = 0.0;
    P.data[0] = 1.0;
    auto& V = net.store.at("layer0.qs.V");
    for (auto& v : V.data) v = 0.0;
    for (int i = 0; i < cfg.m_p; ++i)
        V.data[i * cfg.m_p + i] = std::sqrt(gamma_tilde - cfg.gamma);
    zero_param(net, "layer0.qs.Phi_re");
    zero_param(net, "layer0.qs.Phi_im");

    Domain d = Domain::square(8);
    RngState rng(9);
    GridField x = random_field(d, rng);
    Tape t;
    int out = qs_forward(t, net, "layer0.qs", t.constant(field_to_tensor(x)), d);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(t.value(out).data[i] == doctest::Approx(gamma_tilde * x.values[i]).epsilon(1e-12));
}

TEST_CASE("qs is linear, self-adjoint, and gamma-coercive for random parameters") {
    NetConfig cfg = small_cfg();
    cfg.gamma = 1e-6;
    Domain d = Domain::square(8);
    for (std::uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
        NetParams net = NetParams::init(cfg, seed);
        RngState rng(seed * 31 + 1);
        auto apply_qs = [&](const GridField& v) {
            Tape t;
            int out = qs_forward(t, net, "layer0.qs", t.constant(field_to_tensor(v)), d);
            return tensor_to_field(t.value(out), d);
        };
        for (int trial = 0; trial < 4; ++trial) {
            GridField v = random_field(d, rng), w = random_field(d, rng);
            GridField qv = apply_qs(v), qw = apply_qs(w);
            // linearity
            GridField lin = apply_qs(2.0 * v + (-0.5) * w);
            GridField ref = 2.0 * qv + (-0.5) * qw;
            CHECK(norm_l2(lin - ref) <= 1e-10 * (1.0 + norm_l2(ref)));
            // self-adjointness in the quadrature inner product
            CHECK(inner_product(qv, w) ==
                  doctest::Approx(inner_product(v, qw)).epsilon(1e-10));
            // coercivity margin
            CHECK(inner_product(qv, v) >= cfg.gamma * inner_product(v, v) - 1e-10);
        }
    }
}

TEST_CASE("qa with hand-set weights reproduces the box resolvent") {
    NetConfig cfg = small_cfg();
    cfg.qa_width = 4;
    cfg.tau = 1e-4;
    const double lam = 0.01, denom = lam + cfg.tau;
    NetParams net = NetParams::init(cfg, 21);
    const int w = cfg.qa_width;
    // W0 = 0
    zero_param(net, "layer0.qa.W0");
    // v1[0] = relu(r/denom - ua): inputs (v0[4], r, ua, ub)
    auto& W1 = net.store.at("layer0.qa.W1");
    for (auto& v : W1.data) v = 0.0;
    W1.data[0 * (w + 3) + w + 0] = 1.0 / denom;  // r
    W1.data[0 * (w + 3) + w + 1] = -1.0;         // ua
    zero_param(net, "layer0.qa.b1");
    // v2[0] = relu(ub - ua - v1[0])
    auto& W2 = net.store.at("layer0.qa.W2");
    for (auto& v : W2.data) v = 0.0;
    W2.data[0 * (w + 3) + 0] = -1.0;      // v1[0]
    W2.data[0 * (w + 3) + w + 1] = -1.0;  // ua
    W2.data[0 * (w + 3) + w + 2] = 1.0;   // ub
    zero_param(net, "layer0.qa.b2");
    // out = ub - v2[0]
    auto& W3 = net.store.at("layer0.qa.W3");
    for (auto& v : W3.data) v = 0.0;
    W3.data[0] = -1.0;
    W3.data[w + 2] = 1.0;
    zero_param(net, "layer0.qa.b3");

    Domain d = Domain::square(8);
    RngState rng(33);
    GridField r = random_field(d, rng), ua(d), ub(d);
    for (std::size_t i = 0; i < ua.size(); ++i) {
        ua.values[i] = -std::fabs(rng.normal());
        ub.values[i] = std::fabs(rng.normal());
    }
    Tape t;
    std::vector<int> xi{t.constant(field_to_tensor(ua)), t.constant(field_to_tensor(ub))};
    int out = qa_forward(t, net, "layer0.qa", t.constant(field_to_tensor(r)), xi);

    MultiplierSpec mult{lam, {}, cfg.tau};
    GridField want = resolvent(RegularizerSpec::box(ua, ub), mult, r);
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(t.value(out).data[i] == doctest::Approx(want.values[i]).epsilon(1e-12));
}

TEST_CASE("qa: zero weights give the constant bias field; outputs are pointwise") {
    NetConfig cfg = small_cfg();
    NetParams net = NetParams::init(cfg, 2);
    for (const auto& name : net.store.order)
        if (name.rfind("layer0.qa.", 0) == 0) zero_param(net, name);
    net.store.at("layer0.qa.b3").data[0] = 0.7;

    Domain d = Domain::square(8);
    RngState rng(8);
    GridField r = random_field(d, rng), ua = random_field(d, rng), ub = random_field(d, rng);
    Tape t;
    std::vector<int> xi{t.constant(field_to_tensor(ua)), t.constant(field_to_tensor(ub))};
    int out = qa_forward(t, net, "layer0.qa", t.constant(field_to_tensor(r)), xi);
    for (double v : t.value(out).data) CHECK(v == 0.7);

    // pointwise-ness: reversing the grid ordering of all inputs reverses the output
    NetParams net2 = NetParams::init(cfg, 6);
    auto run = [&](const GridField& rr, const GridField& a, const GridField& b) {
        Tape tt;
        std::vector<int> x{tt.constant(field_to_tensor(a)), tt.constant(field_to_tensor(b))};
        int o = qa_forward(tt, net2, "layer0.qa", tt.constant(field_to_tensor(rr)), x);
        return tt.value(o).data;
    };
    auto rev = [](GridField g) {
        std::reverse(g.values.begin(), g.values.end());
        return g;
    };
    auto straight = run(r, ua, ub);
    auto reversed = run(rev(r), rev(ua), rev(ub));
    for (std::size_t i = 0; i < straight.size(); ++i)
        CHECK(straight[i] == reversed[straight.size() - 1 - i]);
}

TEST_CASE("unrolled forward: zero layers return the zero control") {
    NetConfig cfg = small_cfg();
    cfg.layers = 0;
    NetParams net = NetParams::init(cfg, 4);
    Domain d = Domain::square(8);
    RngState rng(14);
    SampleTensors s = make_sample(cfg, random_field(d, rng), random_field(d, rng),
                                  random_field(d, rng), random_field(d, rng));
    GridField u = net_infer(net, s);
    for (double v : u.values) CHECK(v == 0.0);
}

TEST_CASE("shared and free nets with identical weights agree bitwise") {
    NetConfig shared_cfg = small_cfg();
    shared_cfg.shared = true;
    shared_cfg.layers = 3;
    NetParams snet = NetParams::init(shared_cfg, 17);

    NetConfig free_cfg = shared_cfg;
    free_cfg.shared = false;
    NetParams fnet = NetParams::init(free_cfg, 18);
    for (int k = 0; k < free_cfg.layers; ++k)
        for (const auto& name : snet.store.order) {
            std::string fname = "layer" + std::to_string(k) + name.substr(6);
            fnet.store.at(fname) = snet.store.at(name);
        }

    Domain d = Domain::square(8);
    RngState rng(19);
    GridField ua(d), ub(d);
    for (std::size_t i = 0; i < ua.size(); ++i) {
        ua.values[i] = -1.0 - std::fabs(rng.normal());
        ub.values[i] = 1.0 + std::fabs(rng.normal());
    }
    SampleTensors s = make_sample(shared_cfg, random_field(d, rng), random_field(d, rng), ua, ub);
    GridField us = net_infer(snet, s);
    GridField uf = net_infer(fnet, s);
    for (std::size_t i = 0; i < us.size(); ++i) CHECK(us.values[i] == uf.values[i]);
}

TEST_CASE("exact-operator wiring matches the classical uzawa iterates") {
    RngState rng(25);
    Domain d = Domain::square(17);
    auto op = std::make_shared<PdeOperator>(PdeKind::elliptic_dirichlet(), d);
    ProblemInstance prob;
    prob.op = op;
    prob.mult = MultiplierSpec{0.01, {}, 0.0};
    prob.y_d = random_field(d, rng);
    prob.f = random_field(d, rng);
    GridField ua(d), ub(d);
    for (std::size_t i = 0; i < ua.size(); ++i) {
        ua.values[i] = -0.5 - std::fabs(rng.normal());
        ub.values[i] = 0.5 + std::fabs(rng.normal());
    }
    prob.reg = RegularizerSpec::box(ua, ub);

    const double sigma = admissible_sigma(prob), tau = 1e-4;
    auto states = exact_operator_trajectory(prob, sigma, tau, 6);
    CHECK(tracking_check(prob, states, PreconditionerChoice::scalar(sigma), tau) <= 1e-8);

    // per-layer agreement against a hand-rolled uzawa loop
    MultiplierSpec step = prob.mult;
    step.tau = tau;
    GridField sf_yd = op->apply(prob.f) - prob.y_d;
    GridField u(d), p(d);
    for (int k = 1; k <= 6; ++k) {
        u = resolvent(prob.reg, step, tau * u - op->apply_adjoint(p));
        p = p + (1.0 / sigma) * (op->apply(u) - p + sf_yd);
        CHECK(norm_l2(states[k].u - u) <= 1e-10);
        CHECK(norm_l2(states[k].p - p) <= 1e-10);
    }
}

TEST_CASE("checkpoint round trip is bitwise") {
    NetConfig cfg = small_cfg();
    cfg.shared = true;
    NetParams net = NetParams::init(cfg, 99);
    save_checkpoint(net, "net_ckpt_test.bin");
    NetParams back = load_checkpoint("net_ckpt_test.bin");
    CHECK(back.cfg.layers == cfg.layers);
    CHECK(back.cfg.tau == cfg.tau);
    CHECK(back.store.order == net.store.order);
    for (const auto& name : net.store.order) {
        const auto& a = net.store.at(name);
        const auto& b = back.store.at(name);
        REQUIRE(a.shape == b.shape);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == b.data[i]);
    }
    save_checkpoint(back, "net_ckpt_test2.bin");
    std::ifstream fa("net_ckpt_test.bin", std::ios::binary), fb("net_ckpt_test2.bin", std::ios::binary);
    std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);
    std::remove("net_ckpt_test.bin");
    std::remove("net_ckpt_test2.bin");
}

TEST_CASE("gradients flow through the full unrolled net") {
    NetConfig cfg = small_cfg();
    cfg.shared = true;
    cfg.layers = 2;
    NetParams net = NetParams::init(cfg, 55);
    Domain d = Domain::square(8);
    RngState rng(56);
    GridField ua(d), ub(d);
    for (std::size_t i = 0; i < ua.size(); ++i) {
        ua.values[i] = -2.0;
        ub.values[i] = 2.0;
    }
    SampleTensors s = make_sample(cfg, random_field(d, rng), random_field(d, rng), ua, ub);
    GridField target = random_field(d, rng);
    Tensor target_t = field_to_tensor(target);

    auto loss_of = [&]() {
        Tape t;
        ForwardTrace tr = iuzawa_forward(t, net, s, false);
        int diff = t.sub(tr.u_final, t.constant_ref(&target_t));
        int loss = t.sum(t.hadamard(diff, diff));
        return std::pair<double, std::map<std::string, Tensor>>{t.value(loss).data[0],
                                                                 t.backward(loss)};
    };
    auto [l0, grads] = loss_of();
    CHECK(std::isfinite(l0));
    // finite-difference spot check on a handful of parameters
    RngState pick(57);
    int checked = 0;
    for (const auto& name : net.store.order) {
        if (pick.uniform() > 0.2 || checked >= 6) continue;
        Tensor& p = net.store.at(name);
        const std::size_t j = pick.next_u64() % p.size();
        const double h = 1e-5, orig = p.data[j];
        p.data[j] = orig + h;
        const double lp = loss_of().first;
        p.data[j] = orig - h;
        const double lm = loss_of().first;
        p.data[j] = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double an = grads.count(name) ? grads.at(name).data[j] : 0.0;
        CHECK(std::fabs(fd - an) <= 1e-5 * std::max({1.0, std::fabs(fd), std::fabs(an)}));
        ++checked;
    }
    CHECK(checked >= 3);
}
