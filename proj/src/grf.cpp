#include "iuzawa/grf.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <thread>

#include "iuzawa/spectral.hpp"

namespace iuzawa {

GrfLaw GrfLaw::mixed(double exponent) {
    GrfLaw l;
    l.bc = Bc::Mixed;
    l.exponent = exponent;
    l.scale = 1.0 / std::sqrt(2.0);
    return l;
}

namespace {

double axis_eig(int j, double h) {
    const double s = std::sin(0.5 * std::numbers::pi * j * h);
    return 4.0 / (h * h) * s * s;
}

/// One Dirichlet or Neumann component: iid normals per eigenmode, scaled so
/// the orthonormal-basis coefficient has SD amplitude*(lambda+shift)^(-e/2).
GridField sample_component(const GrfLaw& law, bool dirichlet, const Domain& d, RngState& rng) {
    std::array<int, 3> nmodes{1, 1, 1};
    for (int a = 0; a < d.ndims; ++a) nmodes[a] = dirichlet ? d.res[a] - 2 : d.res[a];

    SpectralCoeffs c;
    c.kind = dirichlet ? SpectralCoeffs::Kind::Sine : SpectralCoeffs::Kind::Cosine;
    c.ndims = d.ndims;
    for (int a = 0; a < d.ndims; ++a) c.shape[a] = nmodes[a];
    c.values.resize(c.size());

    const int n1 = nmodes[0], n2 = d.ndims >= 2 ? nmodes[1] : 1, n3 = d.ndims == 3 ? nmodes[2] : 1;
    std::size_t o = 0;
    for (int k3 = 0; k3 < n3; ++k3)
        for (int k2 = 0; k2 < n2; ++k2)
            for (int k1 = 0; k1 < n1; ++k1, ++o) {
                const int ks[3] = {k1, k2, k3};
                double lam = 0.0, basis_scale = 1.0;
                for (int a = 0; a < d.ndims; ++a) {
                    const int m = d.res[a];
                    const double h = d.spacing(a), ext = d.extent[a];
                    const int j = dirichlet ? ks[a] + 1 : ks[a];
                    lam += axis_eig(j, h);
                    // inverse-transform factor mapping orthonormal-basis
                    // coefficients to dst/dct coefficient arrays
                    const bool endpoint = !dirichlet && (j == 0 || j == m - 1);
                    basis_scale *= endpoint ? (m - 1) / std::sqrt(ext)
                                            : (m - 1) / std::sqrt(2.0 * ext);
                }
                const double sd =
                    law.amplitude * std::pow(lam + law.shift, -0.5 * law.exponent);
                c.values[o] = cplx(rng.normal() * sd * basis_scale, 0.0);
            }
    return dirichlet ? idst(c, d) : idct(c, d);
}

}  // namespace

GridField sample_grf(const GrfLaw& law, const Domain& domain, RngState& rng) {
    switch (law.bc) {
        case GrfLaw::Bc::Dirichlet:
            return law.scale * sample_component(law, true, domain, rng);
        case GrfLaw::Bc::Neumann:
            return law.scale * sample_component(law, false, domain, rng);
        case GrfLaw::Bc::Mixed: {
            GridField xd = sample_component(law, true, domain, rng);
            GridField xn = sample_component(law, false, domain, rng);
            return law.scale * (xd + xn);
        }
    }
    throw std::logic_error("unreachable");
}

std::pair<GridField, GridField> sample_bounds(const Domain& domain, RngState& rng) {
    const double a = rng.uniform(-10.0, -1.0);
    const double b = rng.uniform(1.0, 10.0);
    GrfLaw law = GrfLaw::mixed(2.0);
    GridField v = sample_grf(law, domain, rng);
    GridField w = sample_grf(law, domain, rng);
    GridField u_a(domain), u_b(domain);
    for (std::size_t i = 0; i < u_a.size(); ++i) {
        u_a.values[i] = std::min(a + v.values[i], 0.0);
        u_b.values[i] = std::max(b + w.values[i], 0.0);
    }
    return {std::move(u_a), std::move(u_b)};
}

ExperimentKind experiment_from_name(const std::string& name) {
    if (name == "elliptic-iso") return ExperimentKind::EllipticIso;
    if (name == "elliptic-aniso") return ExperimentKind::EllipticAniso;
    if (name == "parabolic") return ExperimentKind::Parabolic;
    throw std::invalid_argument("unknown experiment kind: " + name);
}

const char* experiment_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::EllipticIso: return "elliptic-iso";
        case ExperimentKind::EllipticAniso: return "elliptic-aniso";
        case ExperimentKind::Parabolic: return "parabolic";
    }
    return "?";
}

Domain experiment_domain(ExperimentKind kind, int m, int mt) {
    return kind == ExperimentKind::Parabolic ? Domain::spacetime(m, mt) : Domain::square(m);
}

std::shared_ptr<const PdeOperator> make_operator(ExperimentKind kind, const Domain& domain) {
    switch (kind) {
        case ExperimentKind::EllipticIso:
            return std::make_shared<PdeOperator>(PdeKind::elliptic_dirichlet(), domain);
        case ExperimentKind::EllipticAniso:
            return std::make_shared<PdeOperator>(PdeKind::elliptic_aniso_neumann(1.0, 100.0, 1.0),
                                                 domain);
        case ExperimentKind::Parabolic:
            return std::make_shared<PdeOperator>(PdeKind::heat_dirichlet(), domain);
    }
    throw std::logic_error("unreachable");
}

ProblemInstance make_problem(ExperimentKind kind, const DatasetRecord& rec,
                             std::shared_ptr<const PdeOperator> op) {
    ProblemInstance prob;
    prob.op = std::move(op);
    prob.mult = MultiplierSpec{0.01, {}, 0.0};
    prob.y_d = rec.y_d;
    prob.f = rec.f;
    prob.reg = kind == ExperimentKind::Parabolic
                   ? RegularizerSpec::l1_box(0.01, rec.u_a, rec.u_b)
                   : RegularizerSpec::box(rec.u_a, rec.u_b);
    return prob;
}

namespace {

/// Instance draw for one index; the stream order (y_d, f, bounds) is part of
/// the determinism contract.
DatasetRecord draw_instance(ExperimentKind kind, const Domain& d, RngState rng) {
    DatasetRecord rec;
    switch (kind) {
        case ExperimentKind::EllipticIso:
            rec.y_d = sample_grf(GrfLaw::dirichlet(1.5), d, rng);
            rec.f = sample_grf(GrfLaw::mixed(1.5), d, rng);
            std::tie(rec.u_a, rec.u_b) = sample_bounds(d, rng);
            break;
        case ExperimentKind::EllipticAniso:
            rec.y_d = sample_grf(GrfLaw::mixed(1.5), d, rng);
            rec.f = sample_grf(GrfLaw::mixed(1.5), d, rng);
            std::tie(rec.u_a, rec.u_b) = sample_bounds(d, rng);
            break;
        case ExperimentKind::Parabolic: {
            rec.y_d = sample_grf(GrfLaw::mixed(1.5), d, rng);
            rec.f = sample_grf(GrfLaw::mixed(1.5), d, rng);
            rec.u_a = GridField(d);
            rec.u_b = GridField(d);
            for (std::size_t i = 0; i < rec.u_a.size(); ++i) {
                rec.u_a.values[i] = -6.0;
                rec.u_b.values[i] = 6.0;
            }
            break;
        }
    }
    return rec;
}

}  // namespace

Dataset gen_dataset(ExperimentKind kind, int n, int m, int mt, std::uint64_t seed, int threads) {
    if (n < 1) throw std::invalid_argument("gen_dataset: n must be >= 1");
    Domain d = experiment_domain(kind, m, mt);
    auto op = make_operator(kind, d);

    RngState root(seed);
    std::vector<std::optional<DatasetRecord>> slots(n);
    std::atomic<int> next{0};

    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            DatasetRecord rec = draw_instance(kind, d, root.split(static_cast<std::uint64_t>(i)));
            ProblemInstance prob = make_problem(kind, rec, op);
            auto [s, rep] = ssn_solve(prob, 1e-10, 100);
            if (!rep.converged) {
                std::fprintf(stderr, "gen_dataset: instance %d reference solve did not converge "
                                     "(residual %.3e), skipped\n",
                             i, rep.residual_history.empty() ? -1.0 : rep.residual_history.back());
                continue;
            }
            rec.u_star = std::move(s.u);
            rec.residual = rep.residual_history.back();
            slots[i] = std::move(rec);
        }
    };

    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    Dataset ds;
    ds.kind = kind;
    ds.domain = d;
    for (auto& s : slots)
        if (s) ds.records.push_back(std::move(*s));
    return ds;
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

void put_field(std::ofstream& os, const GridField& g) {
    os.write(reinterpret_cast<const char*>(g.values.data()),
             static_cast<std::streamsize>(g.values.size() * sizeof(double)));
}

GridField get_field(std::ifstream& is, const Domain& d) {
    GridField g(d);
    is.read(reinterpret_cast<char*>(g.values.data()),
            static_cast<std::streamsize>(g.values.size() * sizeof(double)));
    return g;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_dataset: cannot open " + path);
    os.write("IUZW", 4);
    put<std::uint16_t>(os, 1);
    put<std::uint8_t>(os, static_cast<std::uint8_t>(ds.kind));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(ds.domain.ndims));
    for (int a = 0; a < ds.domain.ndims; ++a)
        put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.domain.res[a]));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.records.size()));
    for (const auto& r : ds.records) {
        put_field(os, r.y_d);
        put_field(os, r.f);
        put_field(os, r.u_a);
        put_field(os, r.u_b);
        put_field(os, r.u_star);
        put<double>(os, r.residual);
    }
    if (!os) throw std::runtime_error("write_dataset: write failed for " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_dataset: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, "IUZW", 4) != 0)
        throw std::runtime_error("read_dataset: bad magic in " + path);
    if (get<std::uint16_t>(is) != 1) throw std::runtime_error("read_dataset: unsupported version");
    Dataset ds;
    ds.kind = static_cast<ExperimentKind>(get<std::uint8_t>(is));
    const int ndims = get<std::uint8_t>(is);
    std::array<int, 3> res{1, 1, 1};
    for (int a = 0; a < ndims; ++a) res[a] = static_cast<int>(get<std::uint32_t>(is));
    ds.domain = ndims == 3 ? Domain::spacetime(res[0], res[2]) : Domain::square(res[0]);
    if (ds.domain.res[1] != res[1]) throw std::runtime_error("read_dataset: non-square grid");
    const auto count = get<std::uint32_t>(is);
    ds.records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        DatasetRecord r;
        r.y_d = get_field(is, ds.domain);
        r.f = get_field(is, ds.domain);
        r.u_a = get_field(is, ds.domain);
        r.u_b = get_field(is, ds.domain);
        r.u_star = get_field(is, ds.domain);
        r.residual = get<double>(is);
        ds.records.push_back(std::move(r));
    }
    if (!is) throw std::runtime_error("read_dataset: truncated file " + path);
    return ds;
}

ActiveStats active_stats(const Dataset& ds, double tol) {
    ActiveStats st;
    st.n_records = static_cast<int>(ds.records.size());
    double ratio_sum = 0.0;
    for (const auto& r : ds.records) {
        double active_measure = 0.0, total = 0.0;
        for (std::size_t i = 0; i < r.u_star.size(); ++i) {
            const double w = quad_weight(ds.domain, i);
            total += w;
            if (std::fabs(r.u_star.values[i] - r.u_a.values[i]) <= tol ||
                std::fabs(r.u_star.values[i] - r.u_b.values[i]) <= tol)
                active_measure += w;
        }
        if (active_measure > 0.0) {
            ++st.n_active;
            ratio_sum += active_measure / total;
        }
    }
    st.mean_active_ratio = st.n_active ? ratio_sum / st.n_active : 0.0;
    return st;
}

}  // namespace iuzawa
