#include "iuzawa/prox.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "iuzawa/rng.hpp"

namespace iuzawa {

RegularizerSpec RegularizerSpec::box(GridField u_a, GridField u_b) {
    RegularizerSpec r;
    r.variant = Variant::Box;
    r.lower = std::move(u_a);
    r.upper = std::move(u_b);
    return r;
}

RegularizerSpec RegularizerSpec::l1_box(double beta, GridField u_a, GridField u_b) {
    if (beta < 0) throw std::invalid_argument("RegularizerSpec: beta must be >= 0");
    RegularizerSpec r;
    r.variant = Variant::L1Box;
    r.beta = beta;
    r.lower = std::move(u_a);
    r.upper = std::move(u_b);
    return r;
}

double MultiplierSpec::c0() const {
    if (!lambda_field) return lambda;
    double m = lambda_field->values.empty() ? lambda : lambda_field->values[0];
    for (double v : lambda_field->values) m = std::min(m, v);
    return m;
}

GridField resolvent(const RegularizerSpec& reg, const MultiplierSpec& mult, const GridField& v) {
    if (mult.lambda_field && mult.lambda_field->domain != v.domain)
        throw std::invalid_argument("resolvent: lambda domain mismatch");
    if (mult.c0() + mult.tau <= 0.0) throw std::invalid_argument("resolvent: lambda + tau must be > 0");

    const bool bounded = reg.variant != RegularizerSpec::Variant::None;
    if (bounded) {
        if (!reg.lower || !reg.upper) throw std::invalid_argument("resolvent: bounds missing");
        if (reg.lower->domain != v.domain || reg.upper->domain != v.domain)
            throw std::invalid_argument("resolvent: bounds domain mismatch");
    }

    GridField u(v.domain);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = mult.denom_at(i);
        double x = v.values[i];
        if (reg.variant == RegularizerSpec::Variant::L1Box)
            x = (x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0)) * std::max(std::fabs(x) - reg.beta, 0.0);
        x /= d;
        if (bounded) {
            const double lo = reg.lower->values[i], hi = reg.upper->values[i];
            if (lo > hi) throw std::invalid_argument("resolvent: u_a > u_b");
            x = std::clamp(x, lo, hi);
        }
        u.values[i] = x;
    }
    return u;
}

NonexpansivenessReport firm_nonexpansiveness_check(const RegularizerSpec& reg,
                                                   const MultiplierSpec& mult,
                                                   const Domain& domain, int trials,
                                                   std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("firm_nonexpansiveness_check: trials must be >= 1");
    RngState rng(seed);
    const double coer = mult.c0() + mult.tau;
    NonexpansivenessReport rep;
    rep.trials = trials;
    rep.worst_inner_margin = 1e300;
    rep.worst_lipschitz_margin = 1e300;
    for (int t = 0; t < trials; ++t) {
        GridField v1(domain), v2(domain);
        for (std::size_t i = 0; i < v1.size(); ++i) {
            v1.values[i] = 5.0 * rng.normal();
            v2.values[i] = 5.0 * rng.normal();
        }
        GridField u1 = resolvent(reg, mult, v1), u2 = resolvent(reg, mult, v2);
        GridField du = u1 - u2, dv = v1 - v2;
        const double inner_margin = inner_product(dv, du) - coer * inner_product(du, du);
        const double lip_margin = norm_l2(dv) / coer - norm_l2(du);
        rep.worst_inner_margin = std::min(rep.worst_inner_margin, inner_margin);
        rep.worst_lipschitz_margin = std::min(rep.worst_lipschitz_margin, lip_margin);
        if (inner_margin < -1e-10 || lip_margin < -1e-10) ++rep.violations;
    }
    return rep;
}

}  // namespace iuzawa
