#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "iuzawa/field.hpp"
#include "iuzawa/pde.hpp"
#include "iuzawa/rng.hpp"
#include "oracles.hpp"

using namespace iuzawa;

namespace {

GridField random_field(const Domain& d, RngState& rng) {
    GridField g(d);
    for (auto& v : g.values) v = rng.normal();
    return g;
}

GridField sine_mode(const Domain& d, int j, int k) {
    GridField g(d);
    const int m = d.res[0];
    for (int iy = 0; iy < m; ++iy)
        for (int ix = 0; ix < m; ++ix)
            g.values[iy * static_cast<std::size_t>(m) + ix] =
                std::sin(std::numbers::pi * j * ix / (m - 1.0)) *
                std::sin(std::numbers::pi * k * iy / (m - 1.0));
    return g;
}

}  // namespace

TEST_CASE("EllipticDirichlet inverts the 5-point eigenpair exactly") {
    const int m = 33;
    Domain d = Domain::square(m);
    PdeOperator op(PdeKind::elliptic_dirichlet(), d);
    GridField g = sine_mode(d, 1, 1);
    const double h = d.spacing(0);
    const double lam = 2.0 * (4.0 / (h * h)) * std::pow(std::sin(0.5 * std::numbers::pi * h), 2);
    GridField y = op.apply(g);
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(y.values[i] == doctest::Approx(g.values[i] / lam).epsilon(1e-11));
}

TEST_CASE("EllipticAnisoNeumann maps constants to constants/c") {
    Domain d = Domain::square(17);
    PdeOperator op(PdeKind::elliptic_aniso_neumann(1.0, 100.0, 1.0), d);
    GridField one(d);
    for (auto& v : one.values) v = 1.0;
    GridField y = op.apply(one);
    for (double v : y.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("S is linear and positive (elliptic)") {
    Domain d = Domain::square(16);
    RngState rng(4);
    for (auto kind : {PdeKind::elliptic_dirichlet(), PdeKind::elliptic_aniso_neumann(1, 100, 1)}) {
        PdeOperator op(kind, d);
        GridField g1 = random_field(d, rng), g2 = random_field(d, rng);
        GridField lin = op.apply(2.0 * g1 + (-3.0) * g2);
        GridField ref = 2.0 * op.apply(g1) + (-3.0) * op.apply(g2);
        for (std::size_t i = 0; i < lin.size(); ++i)
            CHECK(lin.values[i] == doctest::Approx(ref.values[i]).epsilon(1e-11));
        GridField g = random_field(d, rng);
        CHECK(inner_product(op.apply(g), g) > 0.0);
    }
}

TEST_CASE("elliptic apply_adjoint is bitwise apply") {
    Domain d = Domain::square(12);
    RngState rng(5);
    PdeOperator op(PdeKind::elliptic_dirichlet(), d);
    GridField g = random_field(d, rng);
    GridField a = op.apply(g), b = op.apply_adjoint(g);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.values[i] == b.values[i]);
}

TEST_CASE("heat march matches the scalar eigen-recurrence") {
    const int m = 9, mt = 7;
    Domain d = Domain::spacetime(m, mt);
    PdeOperator op(PdeKind::heat_dirichlet(), d);
    // g(x, t) = phi(x) with phi the (1,1) sine eigenvector
    Domain sp = Domain::square(m);
    GridField phi2 = sine_mode(sp, 1, 1);
    GridField g(d);
    const std::size_t sn = static_cast<std::size_t>(m) * m;
    for (int k = 0; k < mt; ++k)
        for (std::size_t i = 0; i < sn; ++i) g.values[k * sn + i] = phi2.values[i];
    GridField y = op.apply(g);

    const double h = d.spacing(0), dt = d.spacing(2);
    const double lam = 2.0 * (4.0 / (h * h)) * std::pow(std::sin(0.5 * std::numbers::pi * h), 2);
    double coef = 0.0;  // per-step scalar recurrence in the eigencoefficient
    for (int k = 1; k < mt; ++k) {
        coef = (coef + dt) / (1.0 + dt * lam);
        for (std::size_t i = 0; i < sn; ++i)
            CHECK(y.values[k * sn + i] ==
                  doctest::Approx(coef * phi2.values[i]).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("adjoint identity for all three kinds; heat against the dense transpose") {
    RngState rng(11);
    // elliptic kinds at m = 16
    Domain d2 = Domain::square(16);
    for (auto kind : {PdeKind::elliptic_dirichlet(), PdeKind::elliptic_aniso_neumann(1, 100, 1)}) {
        PdeOperator op(kind, d2);
        for (int t = 0; t < 5; ++t) {
            GridField g = random_field(d2, rng), w = random_field(d2, rng);
            double lhs = inner_product(op.apply(g), w);
            double rhs = inner_product(g, op.apply_adjoint(w));
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
        }
    }

    // heat at m = mt = 8, 20 random pairs + dense transpose oracle
    Domain d3 = Domain::spacetime(8, 8);
    PdeOperator heat(PdeKind::heat_dirichlet(), d3);
    for (int t = 0; t < 20; ++t) {
        GridField g = random_field(d3, rng), w = random_field(d3, rng);
        double lhs = inner_product(heat.apply(g), w);
        double rhs = inner_product(g, heat.apply_adjoint(w));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
    // dense: S* equals W^{-1} S^T W entry-wise
    auto smat = oracle::dense_matrix(d3, [&](const GridField& e) { return heat.apply(e); });
    auto stmat = oracle::dense_matrix(d3, [&](const GridField& e) { return heat.apply_adjoint(e); });
    const std::size_t n = d3.size();
    for (std::size_t i = 0; i < n; i += 37) {
        for (std::size_t j = 0; j < n; j += 23) {
            const double wi = quad_weight(d3, i), wj = quad_weight(d3, j);
            CHECK(stmat[i][j] == doctest::Approx(smat[j][i] * wj / wi).epsilon(1e-9).scale(1.0));
        }
    }
}

TEST_CASE("heat with nonnegative source stays nonnegative") {
    Domain d = Domain::spacetime(10, 6);
    RngState rng(2);
    PdeOperator op(PdeKind::heat_dirichlet(), d);
    GridField g(d);
    for (auto& v : g.values) v = std::fabs(rng.normal());
    GridField y = op.apply(g);
    for (double v : y.values) CHECK(v >= -1e-12);
    GridField z = op.apply_adjoint(GridField(d));
    for (double v : z.values) CHECK(v == 0.0);
}

TEST_CASE("operator norm estimate: closed forms and monotonicity") {
    Domain d = Domain::square(33);
    PdeOperator op(PdeKind::elliptic_dirichlet(), d);
    const double h = d.spacing(0);
    const double lam_min =
        2.0 * (4.0 / (h * h)) * std::pow(std::sin(0.5 * std::numbers::pi * h), 2);
    const double est = op.operator_norm_estimate(40);
    CHECK(est == doctest::Approx(1.0 / lam_min).epsilon(0.01));

    PdeOperator nop(PdeKind::elliptic_aniso_neumann(1, 100, 1), Domain::square(17));
    CHECK(nop.operator_norm_estimate(40) == doctest::Approx(1.0).epsilon(0.01));

    double prev = 0.0;
    for (int iters : {10, 15, 20, 30, 40}) {
        double e = op.operator_norm_estimate(iters, 7);
        CHECK(e >= prev - 1e-13);
        prev = e;
    }
}
