#pragma once

#include <cstdint>
#include <vector>

#include "iuzawa/field.hpp"

namespace iuzawa {

/// The three PDE families: -Delta y = g with y = 0 on the boundary;
/// -div(a grad y) + c y = g with homogeneous Neumann data and a = diag(a1, a2);
/// heat equation dy/dt - Delta y = g with zero initial and lateral data.
struct PdeKind {
    enum class Variant { EllipticDirichlet, EllipticAnisoNeumann, HeatDirichlet };
    Variant variant = Variant::EllipticDirichlet;
    double a1 = 1.0, a2 = 1.0, c = 0.0;

    static PdeKind elliptic_dirichlet() { return {}; }
    static PdeKind elliptic_aniso_neumann(double a1, double a2, double c) {
        return {Variant::EllipticAnisoNeumann, a1, a2, c};
    }
    static PdeKind heat_dirichlet() { return {Variant::HeatDirichlet, 1.0, 1.0, 0.0}; }
};

/// Discrete solution operator for one PDE family on one grid. Elliptic solves
/// are spectral in the matching eigenbasis (exact for the 5-point system);
/// the heat equation marches implicit-Euler steps, and its adjoint is the
/// matrix transpose of the march taken in the quadrature-weighted geometry.
class PdeOperator {
  public:
    PdeOperator(const PdeKind& kind, const Domain& domain);

    const Domain& domain() const { return domain_; }
    const PdeKind& kind() const { return kind_; }

    GridField apply(const GridField& g) const;
    GridField apply_adjoint(const GridField& w) const;

    /// Power-iteration estimate of ||S|| in the discrete L2 geometry;
    /// nondecreasing in iters for a fixed seed.
    double operator_norm_estimate(int iters, std::uint64_t seed = 0) const;

  private:
    GridField heat_forward(const GridField& g) const;
    GridField heat_adjoint(const GridField& w) const;

    PdeKind kind_;
    Domain domain_;
    std::vector<double> eig_;      // flattened spatial symbol (interior for Dirichlet)
    std::vector<double> heat_fac_; // 1/(1 + dt*lambda) per spatial mode
};

inline GridField apply_S(const PdeOperator& op, const GridField& g) { return op.apply(g); }
inline GridField apply_S_adjoint(const PdeOperator& op, const GridField& w) {
    return op.apply_adjoint(w);
}
inline double operator_norm_estimate(const PdeOperator& op, int iters) {
    return op.operator_norm_estimate(iters);
}

}  // namespace iuzawa
