#include "iuzawa/classic.hpp"

#include <chrono>
#include <limits>
#include <numbers>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "iuzawa/spectral.hpp"

namespace iuzawa {

namespace {

using clock_t_ = std::chrono::steady_clock;

double seconds_since(clock_t_::time_point t0) {
    return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

GridField apply_N(const ProblemInstance& prob, const GridField& u) {
    GridField r(u.domain);
    for (std::size_t i = 0; i < u.size(); ++i)
        r.values[i] = (prob.mult.lambda_field ? prob.mult.lambda_field->values[i]
                                              : prob.mult.lambda) *
                      u.values[i];
    return r;
}

/// Apply Q_S^{-1} for the chosen preconditioner.
GridField qs_inverse(const ProblemInstance& prob, const PreconditionerChoice& qs,
                     const GridField& r) {
    if (qs.kind == PreconditionerChoice::Kind::ScalarSigma) return (1.0 / qs.sigma) * r;
    // Exact Schur: (I + (1/alpha) S S*)^{-1}, diagonal in the elliptic eigenbasis.
    const PdeOperator& op = *prob.op;
    const double alpha = prob.mult.lambda;
    switch (op.kind().variant) {
        case PdeKind::Variant::EllipticDirichlet: {
            SpectralCoeffs c = dst(r);
            const int n = op.domain().res[0] - 2;
            const double h = op.domain().spacing(0);
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    auto mu = [&](int k) {
                        const double s = std::sin(0.5 * std::numbers::pi * (k + 1) * h);
                        return 4.0 / (h * h) * s * s;
                    };
                    const double lam = mu(i) + mu(j);
                    c.values[static_cast<std::size_t>(j) * n + i] /= 1.0 + 1.0 / (alpha * lam * lam);
                }
            return idst(c, op.domain());
        }
        case PdeKind::Variant::EllipticAnisoNeumann: {
            SpectralCoeffs c = dct(r);
            const int m = op.domain().res[0];
            const double h = op.domain().spacing(0);
            for (int j = 0; j < m; ++j)
                for (int i = 0; i < m; ++i) {
                    auto mu = [&](int k) {
                        const double s = std::sin(0.5 * std::numbers::pi * k * h);
                        return 4.0 / (h * h) * s * s;
                    };
                    const double lam =
                        op.kind().a1 * mu(i) + op.kind().a2 * mu(j) + op.kind().c;
                    c.values[static_cast<std::size_t>(j) * m + i] /= 1.0 + 1.0 / (alpha * lam * lam);
                }
            return idct(c, op.domain());
        }
        default:
            throw std::invalid_argument("ExactSchur preconditioner: elliptic kinds only");
    }
}

/// <Q_S dp, dp> for the Q-seminorm (dual block).
double qs_quad(const ProblemInstance& prob, const PreconditionerChoice& qs, const GridField& dp) {
    if (qs.kind == PreconditionerChoice::Kind::ScalarSigma)
        return qs.sigma * inner_product(dp, dp);
    GridField sdp = prob.op->apply_adjoint(dp);
    return inner_product(dp, dp) + inner_product(sdp, sdp) / prob.mult.lambda;
}

struct ErrorTracker {
    bool active = false;
    GridField u_ref, p_ref;
    double prev = -1.0;

    double q_err(const ProblemInstance& prob, const PreconditionerChoice& qs, double tau,
                 const SaddleState& s) const {
        GridField du = s.u - u_ref, dp = s.p - p_ref;
        return std::sqrt(tau * inner_product(du, du) + qs_quad(prob, qs, dp));
    }
};

}  // namespace

double admissible_sigma(const ProblemInstance& prob, int iters) {
    const double est = prob.op->operator_norm_estimate(iters);
    return 1.0 + 1.05 * est * est / prob.mult.c0();
}

double kkt_residual(const ProblemInstance& prob, const SaddleState& s) {
    const PdeOperator& op = *prob.op;
    GridField Nu = apply_N(prob, s.u);
    GridField sp = op.apply_adjoint(s.p);
    GridField v = s.u - (Nu + sp);
    MultiplierSpec unit;
    unit.lambda = 1.0;
    unit.tau = 0.0;
    GridField prox_v = resolvent(prob.reg, unit, v);
    const double r1 = norm_l2(s.u - prox_v);
    GridField r2f = op.apply(s.u + prob.f) - s.p - prob.y_d;
    return r1 + norm_l2(r2f);
}

std::pair<SaddleState, SolveReport> uzawa_solve(const ProblemInstance& prob,
                                                const PreconditionerChoice& qs, double tau,
                                                double tol, int max_iter,
                                                const std::optional<GridField>& reference) {
    const auto t0 = clock_t_::now();
    const PdeOperator& op = *prob.op;
    const Domain& d = prob.domain();
    MultiplierSpec step = prob.mult;
    step.tau = tau;

    GridField sf_yd = op.apply(prob.f) - prob.y_d;
    SaddleState s{GridField(d), GridField(d)};
    SolveReport rep;

    ErrorTracker track;
    if (reference) {
        track.active = true;
        track.u_ref = *reference;
        track.p_ref = op.apply(*reference + prob.f) - prob.y_d;
        track.prev = track.q_err(prob, qs, tau, s);
    }

    for (int k = 0; k < max_iter; ++k) {
        GridField arg = tau * s.u - op.apply_adjoint(s.p);
        s.u = resolvent(prob.reg, step, arg);
        GridField resid = op.apply(s.u) - s.p + sf_yd;
        s.p = s.p + qs_inverse(prob, qs, resid);
        rep.iterations = k + 1;

        if (track.active) {
            const double e = track.q_err(prob, qs, tau, s);
            if (track.prev > 0.0) rep.contraction_estimates.push_back(e / track.prev);
            track.prev = e;
        }
        const double metric = reference
                                  ? relative_error(s.u, *reference, 1e-14)
                                  : kkt_residual(prob, s);
        rep.residual_history.push_back(metric);
        if (metric <= tol) {
            rep.converged = true;
            break;
        }
    }
    rep.wall_time = seconds_since(t0);
    return {std::move(s), std::move(rep)};
}

std::pair<SaddleState, SolveReport> pd_solve(const ProblemInstance& prob, double step_primal,
                                             double step_dual, double tol, int max_iter,
                                             const std::optional<GridField>& reference) {
    const auto t0 = clock_t_::now();
    const PdeOperator& op = *prob.op;
    const Domain& d = prob.domain();

    const double s_norm = op.operator_norm_estimate(30);
    if (step_primal * step_dual * s_norm * s_norm > 1.0)
        std::fprintf(stderr,
                     "pd_solve: step product %.3g * ||S||^2 = %.3g exceeds 1; convergence is "
                     "not guaranteed\n",
                     step_primal * step_dual, step_primal * step_dual * s_norm * s_norm);

    MultiplierSpec step = prob.mult;
    step.tau = 1.0 / step_primal;

    GridField sf_yd = op.apply(prob.f) - prob.y_d;
    SaddleState s{GridField(d), GridField(d)};
    GridField u_bar(d);
    SolveReport rep;

    for (int k = 0; k < max_iter; ++k) {
        // dual ascent with prox of 1/2||p||^2 + <p, y_d - Sf>
        GridField pr = s.p + step_dual * (op.apply(u_bar) + sf_yd);
        s.p = (1.0 / (1.0 + step_dual)) * pr;
        // primal resolvent step with metric (alpha + 1/step_primal)
        GridField arg = (1.0 / step_primal) * s.u - op.apply_adjoint(s.p);
        GridField u_new = resolvent(prob.reg, step, arg);
        u_bar = 2.0 * u_new - s.u;
        s.u = std::move(u_new);
        rep.iterations = k + 1;

        const double metric = reference
                                  ? relative_error(s.u, *reference, 1e-14)
                                  : kkt_residual(prob, s);
        rep.residual_history.push_back(metric);
        if (metric <= tol) {
            rep.converged = true;
            break;
        }
    }
    rep.wall_time = seconds_since(t0);
    return {std::move(s), std::move(rep)};
}

namespace {

/// CG for (alpha I + S* S) x = b on the inactive set, in the quadrature
/// inner product (mask entries are 1 on inactive points).
GridField cg_inactive(const ProblemInstance& prob, const std::vector<char>& inactive,
                      const GridField& b, double rel_tol, int max_iter) {
    const Domain& d = prob.domain();
    const double alpha = prob.mult.lambda;
    auto mask = [&](GridField& g) {
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!inactive[i]) g.values[i] = 0.0;
    };
    auto apply_A = [&](const GridField& v) {
        GridField av = prob.op->apply_adjoint(prob.op->apply(v));
        mask(av);
        for (std::size_t i = 0; i < av.size(); ++i) av.values[i] += alpha * v.values[i];
        return av;
    };
    GridField x(d), r = b, p = b;
    mask(r);
    p = r;
    double rs = inner_product(r, r);
    const double b_norm = std::sqrt(rs);
    if (b_norm == 0.0) return x;
    for (int it = 0; it < max_iter; ++it) {
        GridField ap = apply_A(p);
        const double alpha_cg = rs / inner_product(p, ap);
        axpy(alpha_cg, p, x);
        axpy(-alpha_cg, ap, r);
        const double rs_new = inner_product(r, r);
        if (std::sqrt(rs_new) <= rel_tol * b_norm) break;
        const double beta = rs_new / rs;
        rs = rs_new;
        GridField pn = r;
        axpy(beta, p, pn);
        p = std::move(pn);
    }
    return x;
}

}  // namespace

std::pair<SaddleState, SolveReport> ssn_solve(const ProblemInstance& prob, double tol,
                                              int max_iter) {
    const auto t0 = clock_t_::now();
    const PdeOperator& op = *prob.op;
    const Domain& d = prob.domain();
    const double alpha = prob.mult.lambda;
    const double beta = prob.reg.variant == RegularizerSpec::Variant::L1Box ? prob.reg.beta : 0.0;
    const bool bounded = prob.reg.variant != RegularizerSpec::Variant::None;
    const std::size_t n = d.size();

    GridField z = op.apply(prob.f) - prob.y_d;  // Sf - y_d
    GridField ssz = op.apply_adjoint(z);        // S*(Sf - y_d)

    SaddleState s{GridField(d), GridField(d)};
    SolveReport rep;
    std::set<std::size_t> seen_partitions;
    GridField u_prev(d);
    bool damped = false;

    for (int outer = 0; outer < max_iter; ++outer) {
        GridField p = op.apply(s.u) + z;
        GridField q = -1.0 * op.apply_adjoint(p);

        // frozen partition: -1 lower active, +1 upper active, 2 dead zone, 0 inactive
        std::vector<signed char> part(n, 0);
        std::vector<double> sign_l1(n, 0.0);
        if (bounded || beta > 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                double qi = q.values[i];
                double soft = qi;
                if (beta > 0.0) {
                    if (std::fabs(qi) <= beta) {
                        part[i] = 2;
                        continue;
                    }
                    soft = qi > 0 ? qi - beta : qi + beta;
                    sign_l1[i] = qi > 0 ? 1.0 : -1.0;
                }
                const double cand = soft / alpha;
                if (bounded) {
                    if (cand <= prob.reg.lower->values[i])
                        part[i] = -1;
                    else if (cand >= prob.reg.upper->values[i])
                        part[i] = +1;
                }
            }
        }

        // cycling guard: hash the partition, damp on repeats
        std::size_t h = 1469598103934665603ULL;
        for (std::size_t i = 0; i < n; ++i) h = (h ^ static_cast<std::size_t>(part[i] + 2)) * 1099511628211ULL;
        if (!seen_partitions.insert(h).second && outer > 0) damped = true;

        GridField u_active(d);
        std::vector<char> inactive(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (part[i] == -1)
                u_active.values[i] = prob.reg.lower->values[i];
            else if (part[i] == +1)
                u_active.values[i] = prob.reg.upper->values[i];
            else if (part[i] == 2)
                u_active.values[i] = 0.0;
            else
                inactive[i] = 1;
        }

        // (alpha I + S*S) u_I = -S*(Sf - y_d) - S*S u_A - beta*sign  on the inactive set
        GridField rhs = -1.0 * ssz;
        GridField ssa = op.apply_adjoint(op.apply(u_active));
        for (std::size_t i = 0; i < n; ++i) {
            rhs.values[i] -= ssa.values[i] + beta * sign_l1[i];
            if (!inactive[i]) rhs.values[i] = 0.0;
        }
        GridField u_in = cg_inactive(prob, inactive, rhs, 1e-12, 500);

        GridField u_new = u_active;
        for (std::size_t i = 0; i < n; ++i)
            if (inactive[i]) u_new.values[i] = u_in.values[i];
        if (damped) {
            u_new = 0.5 * (u_new + u_prev);
            damped = false;
        }
        u_prev = s.u;
        s.u = std::move(u_new);
        s.p = op.apply(s.u) + z;
        rep.iterations = outer + 1;
        const double res = kkt_residual(prob, s);
        rep.residual_history.push_back(res);
        if (res <= tol) {
            rep.converged = true;
            break;
        }
    }
    rep.wall_time = seconds_since(t0);
    return {std::move(s), std::move(rep)};
}

double objective(const ProblemInstance& prob, const GridField& u) {
    if (prob.reg.variant != RegularizerSpec::Variant::None) {
        for (std::size_t i = 0; i < u.size(); ++i)
            if (u.values[i] < prob.reg.lower->values[i] - 1e-12 ||
                u.values[i] > prob.reg.upper->values[i] + 1e-12)
                return std::numeric_limits<double>::infinity();
    }
    GridField y = prob.op->apply(u + prob.f);
    GridField dy = y - prob.y_d;
    double j = 0.5 * inner_product(dy, dy) + 0.5 * inner_product(u, apply_N(prob, u));
    if (prob.reg.variant == RegularizerSpec::Variant::L1Box && prob.reg.beta > 0.0) {
        double l1 = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i)
            l1 += quad_weight(u.domain, i) * std::fabs(u.values[i]);
        j += prob.reg.beta * l1;
    }
    return j;
}

double tracking_check(const ProblemInstance& prob, const std::vector<SaddleState>& states,
                      const PreconditionerChoice& qs, double tau) {
    if (states.size() < 2) return 0.0;
    const PdeOperator& op = *prob.op;
    MultiplierSpec step = prob.mult;
    step.tau = tau;
    GridField sf_yd = op.apply(prob.f) - prob.y_d;

    double delta = 0.0;
    for (std::size_t k = 0; k + 1 < states.size(); ++k) {
        GridField u_bar =
            resolvent(prob.reg, step, tau * states[k].u - op.apply_adjoint(states[k].p));
        GridField p_bar =
            states[k].p + qs_inverse(prob, qs, op.apply(u_bar) - states[k].p + sf_yd);
        delta = std::max(delta, norm_l2(states[k + 1].u - u_bar));
        delta = std::max(delta, norm_l2(states[k + 1].p - p_bar));
    }
    return delta;
}

}  // namespace iuzawa
