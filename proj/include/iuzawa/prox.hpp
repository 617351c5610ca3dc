#pragma once

#include <cstdint>
#include <optional>

#include "iuzawa/field.hpp"

namespace iuzawa {

/// Regularizer theta: none, a box constraint, or beta*||.||_L1 plus a box.
struct RegularizerSpec {
    enum class Variant { None, Box, L1Box };
    Variant variant = Variant::None;
    double beta = 0.0;
    std::optional<GridField> lower, upper;  // u_a, u_b (required for Box/L1Box)

    static RegularizerSpec none() { return {}; }
    static RegularizerSpec box(GridField u_a, GridField u_b);
    static RegularizerSpec l1_box(double beta, GridField u_a, GridField u_b);
};

/// The multiplier lambda(x) of N (scalar or a field) plus the tau shift of
/// Q_A = N + tau*I. c0 is the essential infimum of lambda.
struct MultiplierSpec {
    double lambda = 1.0;
    std::optional<GridField> lambda_field;
    double tau = 0.0;

    double c0() const;
    double denom_at(std::size_t i) const {
        return (lambda_field ? lambda_field->values[i] : lambda) + tau;
    }
};

/// Pointwise resolvent (N + tau I + d theta)^{-1} applied to v.
GridField resolvent(const RegularizerSpec& reg, const MultiplierSpec& mult, const GridField& v);

struct NonexpansivenessReport {
    int trials = 0;
    int violations = 0;
    double worst_inner_margin = 0.0;  // min of <dv,du> - (c0+tau)||du||^2
    double worst_lipschitz_margin = 0.0;  // min of (c0+tau)^{-1}||dv|| - ||du||
};

/// Monte-Carlo check of the resolvent's firm nonexpansiveness and Lipschitz
/// bound with the augmented constant c0 + tau. Failures are reported.
NonexpansivenessReport firm_nonexpansiveness_check(const RegularizerSpec& reg,
                                                   const MultiplierSpec& mult,
                                                   const Domain& domain, int trials,
                                                   std::uint64_t seed);

}  // namespace iuzawa
