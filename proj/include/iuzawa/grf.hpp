#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iuzawa/classic.hpp"
#include "iuzawa/field.hpp"
#include "iuzawa/rng.hpp"

namespace iuzawa {

/// Matern-type Gaussian random field law: coefficient variance in the
/// orthonormal discrete-Laplacian eigenbasis is
///   amplitude^2 * (lambda_k + shift)^(-exponent).
/// The amplitude prefactor (default 9, the shift) calibrates the field scale
/// so that the generated controls reproduce the benchmark active-set
/// statistics. Mixed laws average independent Dirichlet and Neumann draws
/// with weight scale = 1/sqrt(2) each.
struct GrfLaw {
    enum class Bc { Dirichlet, Neumann, Mixed };
    Bc bc = Bc::Dirichlet;
    double exponent = 1.5;
    double shift = 9.0;
    double scale = 1.0;  // per-component mixing weight (1/sqrt(2) for Mixed)
    double amplitude = 9.0;

    static GrfLaw dirichlet(double exponent) { return {Bc::Dirichlet, exponent, 9.0, 1.0, 9.0}; }
    static GrfLaw neumann(double exponent) { return {Bc::Neumann, exponent, 9.0, 1.0, 9.0}; }
    static GrfLaw mixed(double exponent);
};

GridField sample_grf(const GrfLaw& law, const Domain& domain, RngState& rng);

/// u_a = min(a + v, 0), u_b = max(b + w, 0) with a ~ U(-10,-1), b ~ U(1,10)
/// and v, w drawn from the mixed exponent-2 law.
std::pair<GridField, GridField> sample_bounds(const Domain& domain, RngState& rng);

enum class ExperimentKind : std::uint8_t { EllipticIso = 0, EllipticAniso = 1, Parabolic = 2 };

ExperimentKind experiment_from_name(const std::string& name);
const char* experiment_name(ExperimentKind kind);

struct DatasetRecord {
    GridField y_d, f, u_a, u_b, u_star;
    double residual = 0.0;  // reference-solve KKT residual
};

struct Dataset {
    ExperimentKind kind = ExperimentKind::EllipticIso;
    Domain domain;
    std::vector<DatasetRecord> records;
};

/// Problem constants of the three experiments (alpha = 0.01 everywhere,
/// beta = 0.01 for the parabolic L1 term).
ProblemInstance make_problem(ExperimentKind kind, const DatasetRecord& rec,
                             std::shared_ptr<const PdeOperator> op);
std::shared_ptr<const PdeOperator> make_operator(ExperimentKind kind, const Domain& domain);
Domain experiment_domain(ExperimentKind kind, int m, int mt);

/// Draw n instances with per-instance split RNG streams and SSN reference
/// controls. Deterministic in (kind, n, m, mt, seed) for any thread count;
/// non-convergent references are skipped and logged.
Dataset gen_dataset(ExperimentKind kind, int n, int m, int mt, std::uint64_t seed,
                    int threads = 1);

void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

struct ActiveStats {
    int n_records = 0;
    int n_active = 0;
    double mean_active_ratio = 0.0;  // quadrature measure ratio among active records
};
ActiveStats active_stats(const Dataset& ds, double tol = 1e-9);

}  // namespace iuzawa
