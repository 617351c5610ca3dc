#include "iuzawa/verify.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "iuzawa/grf.hpp"
#include "iuzawa/net.hpp"
#include "iuzawa/rng.hpp"
#include "iuzawa/spectral.hpp"
#include "iuzawa/train.hpp"

namespace iuzawa {

namespace {

GridField random_field(const Domain& d, RngState& rng) {
    GridField g(d);
    for (auto& v : g.values) v = rng.normal();
    return g;
}

bool section(const char* name, bool ok) {
    std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name);
    return ok;
}

bool check_transforms() {
    bool ok = true;
    RngState rng(101);
    for (int m : {8, 16, 32}) {
        Domain d = Domain::square(m);
        GridField g = random_field(d, rng);
        GridField gc = idct(dct(g), d);
        double dev = 0;
        for (std::size_t i = 0; i < g.size(); ++i)
            dev = std::max(dev, std::fabs(gc.values[i] - g.values[i]));
        ok = ok && dev <= 1e-12;

        GridField gi(d);
        for (int iy = 1; iy < m - 1; ++iy)
            for (int ix = 1; ix < m - 1; ++ix)
                gi.values[iy * static_cast<std::size_t>(m) + ix] = rng.normal();
        GridField gs = idst(dst(gi), d);
        dev = 0;
        for (std::size_t i = 0; i < g.size(); ++i)
            dev = std::max(dev, std::fabs(gs.values[i] - gi.values[i]));
        ok = ok && dev <= 1e-12;

        GridField one(d);
        for (auto& v : one.values) v = 1.0;
        ok = ok && std::fabs(inner_product(one, one) - 1.0) <= 1e-12;
    }
    return ok;
}

bool check_adjoints() {
    bool ok = true;
    RngState rng(102);
    Domain d2 = Domain::square(16);
    for (auto kind : {PdeKind::elliptic_dirichlet(), PdeKind::elliptic_aniso_neumann(1, 100, 1)}) {
        PdeOperator op(kind, d2);
        for (int t = 0; t < 5; ++t) {
            GridField g = random_field(d2, rng), w = random_field(d2, rng);
            const double lhs = inner_product(op.apply(g), w);
            const double rhs = inner_product(g, op.apply_adjoint(w));
            ok = ok && std::fabs(lhs - rhs) <= 1e-10 * std::max(1.0, std::fabs(lhs));
        }
    }
    Domain d3 = Domain::spacetime(8, 8);
    PdeOperator heat(PdeKind::heat_dirichlet(), d3);
    for (int t = 0; t < 20; ++t) {
        GridField g = random_field(d3, rng), w = random_field(d3, rng);
        const double lhs = inner_product(heat.apply(g), w);
        const double rhs = inner_product(g, heat.apply_adjoint(w));
        ok = ok && std::fabs(lhs - rhs) <= 1e-10 * std::max(1.0, std::fabs(lhs));
    }
    return ok;
}

bool check_prox() {
    bool ok = true;
    RngState rng(103);
    Domain d = Domain::square(6);
    for (int trial = 0; trial < 50; ++trial) {
        GridField lo(d), hi(d), v(d);
        for (std::size_t i = 0; i < lo.size(); ++i) {
            const double a = 3.0 * rng.normal(), b = 3.0 * rng.normal();
            lo.values[i] = std::min(a, b);
            hi.values[i] = std::max(a, b);
            v.values[i] = 4.0 * rng.normal();
        }
        const double beta = trial % 2 ? rng.uniform(0.0, 1.0) : 0.0;
        MultiplierSpec m{rng.uniform(0.2, 3.0), {}, rng.uniform(0.0, 0.5)};
        RegularizerSpec reg =
            beta > 0 ? RegularizerSpec::l1_box(beta, lo, hi) : RegularizerSpec::box(lo, hi);
        GridField u = resolvent(reg, m, v);
        for (std::size_t i = 0; i < u.size(); ++i) {
            // 1-d grid search oracle
            double best_r = lo.values[i], best = 1e300;
            for (double r = lo.values[i] - 1.0; r <= hi.values[i] + 1.0; r += 1e-3) {
                const double rc = std::clamp(r, lo.values[i], hi.values[i]);
                const double val = 0.5 * (m.lambda + m.tau) * rc * rc - v.values[i] * rc +
                                   beta * std::fabs(rc);
                if (val < best) {
                    best = val;
                    best_r = rc;
                }
            }
            ok = ok && std::fabs(u.values[i] - best_r) <= 2e-3;
        }
    }
    MultiplierSpec m{0.8, {}, 0.2};
    GridField lo(Domain::square(16)), hi(Domain::square(16));
    RngState rng2(104);
    for (std::size_t i = 0; i < lo.size(); ++i) {
        lo.values[i] = -std::fabs(rng2.normal()) - 0.05;
        hi.values[i] = std::fabs(rng2.normal()) + 0.05;
    }
    auto rep = firm_nonexpansiveness_check(RegularizerSpec::box(lo, hi), m, Domain::square(16),
                                           100, 105);
    ok = ok && rep.violations == 0;
    return ok;
}

bool check_qs_structure() {
    bool ok = true;
    NetConfig cfg;
    cfg.fourier_layers = 2;
    cfg.m_p = 4;
    cfg.k_max = 2;
    cfg.pad_to = 12;
    cfg.base_m = 8;
    cfg.gamma = 1e-6;
    Domain d = Domain::square(8);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        NetParams net = NetParams::init(cfg, seed);
        RngState rng(200 + seed);
        auto apply_qs = [&](const GridField& v) {
            ad::Tape t;
            int out = qs_forward(t, net, net.prefix(0) + ".qs",
                                 t.constant(field_to_tensor(v)), d);
            return tensor_to_field(t.value(out), d);
        };
        for (int trial = 0; trial < 5; ++trial) {
            GridField v = random_field(d, rng), w = random_field(d, rng);
            GridField qv = apply_qs(v);
            const double sym = inner_product(qv, w) - inner_product(v, apply_qs(w));
            ok = ok && std::fabs(sym) <= 1e-10 * std::max(1.0, std::fabs(inner_product(qv, w)));
            ok = ok && inner_product(qv, v) >= cfg.gamma * inner_product(v, v) - 1e-10;
        }
    }
    return ok;
}

bool check_gradients() {
    bool ok = true;
    NetConfig cfg;
    cfg.layers = 2;
    cfg.shared = true;
    cfg.fourier_layers = 2;
    cfg.m_p = 4;
    cfg.k_max = 2;
    cfg.pad_to = 12;
    cfg.base_m = 8;
    cfg.qa_width = 8;
    NetParams net = NetParams::init(cfg, 301);
    Domain d = Domain::square(8);
    RngState rng(302);
    GridField ua(d), ub(d);
    for (std::size_t i = 0; i < ua.size(); ++i) {
        ua.values[i] = -2.0;
        ub.values[i] = 2.0;
    }
    SampleTensors s = make_sample(cfg, random_field(d, rng), random_field(d, rng), ua, ub);
    GridField target = random_field(d, rng);
    ad::Tensor tgt = field_to_tensor(target);

    auto run = [&]() {
        ad::Tape t;
        ForwardTrace tr = iuzawa_forward(t, net, s, false);
        int loss = loss_node(t, tr.u_final, &tgt, d, 1e-8, false);
        const double l = t.value(loss).data[0];
        auto g = t.backward(loss);
        return std::pair<double, std::map<std::string, ad::Tensor>>{l, std::move(g)};
    };
    auto [l0, grads] = run();
    ok = ok && std::isfinite(l0);
    RngState pick(303);
    int checked = 0;
    while (checked < 10) {
        const auto& name = net.store.order[pick.next_u64() % net.store.order.size()];
        ad::Tensor& p = net.store.at(name);
        const std::size_t j = pick.next_u64() % p.size();
        const double h = 1e-5, orig = p.data[j];
        p.data[j] = orig + h;
        const double lp = run().first;
        p.data[j] = orig - h;
        const double lm = run().first;
        p.data[j] = orig;
        const double fd = (lp - lm) / (2 * h);
        const double an = grads.count(name) ? grads.at(name).data[j] : 0.0;
        ok = ok && std::fabs(fd - an) <= 1e-5 * std::max({1.0, std::fabs(fd), std::fabs(an)});
        ++checked;
    }
    return ok;
}

bool check_tracking() {
    RngState rng(401);
    Domain d = Domain::square(17);
    auto op = std::make_shared<PdeOperator>(PdeKind::elliptic_dirichlet(), d);
    ProblemInstance prob;
    prob.op = op;
    prob.mult = MultiplierSpec{0.01, {}, 0.0};
    prob.y_d = random_field(d, rng);
    prob.f = random_field(d, rng);
    GridField lo(d), hi(d);
    for (std::size_t i = 0; i < lo.size(); ++i) {
        lo.values[i] = -1.0 - std::fabs(rng.normal());
        hi.values[i] = 1.0 + std::fabs(rng.normal());
    }
    prob.reg = RegularizerSpec::box(lo, hi);
    const double sigma = admissible_sigma(prob);
    auto states = exact_operator_trajectory(prob, sigma, 1e-4, 6);
    return tracking_check(prob, states, PreconditionerChoice::scalar(sigma), 1e-4) <= 1e-8;
}

bool check_solver_agreement(int threads) {
    Dataset ds = gen_dataset(ExperimentKind::EllipticIso, 3, 17, 17, 402, threads);
    if (ds.records.size() != 3) return false;
    auto op = make_operator(ds.kind, ds.domain);
    for (const auto& r : ds.records) {
        ProblemInstance prob = make_problem(ds.kind, r, op);
        auto [ss, rs] = ssn_solve(prob, 1e-11, 60);
        if (!rs.converged) return false;
        auto [su, ru] = uzawa_solve(prob, PreconditionerChoice::scalar(admissible_sigma(prob)),
                                    1e-4, 1e-8, 2000, ss.u);
        auto [sp, rp] = pd_solve(prob, 350.0, 1.0, 1e-8, 2000, ss.u);
        if (!ru.converged || !rp.converged) return false;
        if (relative_error(su.u, ss.u, 1e-14) > 1e-5) return false;
        if (relative_error(sp.u, ss.u, 1e-14) > 1e-5) return false;
    }
    return true;
}

bool check_sampling() {
    bool ok = true;
    Domain d = Domain::square(16);
    RngState rng(501);
    GridField g = sample_grf(GrfLaw::dirichlet(1.5), d, rng);
    for (int i = 0; i < 16; ++i) ok = ok && g.values[i] == 0.0 && g.values[15ull * 16 + i] == 0.0;
    for (int t = 0; t < 10; ++t) {
        auto [ua, ub] = sample_bounds(d, rng);
        for (std::size_t i = 0; i < ua.size(); ++i)
            ok = ok && ua.values[i] <= 0.0 && ub.values[i] >= 0.0;
    }
    RngState a(7), b(7);
    for (int i = 0; i < 100; ++i) ok = ok && a.next_u64() == b.next_u64();
    return ok;
}

}  // namespace

bool run_verification(int threads) {
    bool ok = true;
    ok &= section("quadrature and transform inverses", check_transforms());
    ok &= section("adjoint identities (3 PDE kinds)", check_adjoints());
    ok &= section("prox oracle and firm nonexpansiveness", check_prox());
    ok &= section("Q_S self-adjointness and coercivity", check_qs_structure());
    ok &= section("gradient checks through the unrolled net", check_gradients());
    ok &= section("algorithm tracking of the exact-operator net", check_tracking());
    ok &= section("cross-solver agreement (ssn/uzawa/pd)", check_solver_agreement(threads));
    ok &= section("sampling invariants and RNG determinism", check_sampling());
    return ok;
}

}  // namespace iuzawa
