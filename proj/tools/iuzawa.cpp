// Command-line front end: datagen -> train -> eval -> bench plus one-off
// solves and the verification suite. Exit codes: 0 ok, 1 usage error,
// 2 verification failure, 3 solver non-convergence.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "iuzawa/grf.hpp"
#include "iuzawa/net.hpp"
#include "iuzawa/train.hpp"
#include "iuzawa/verify.hpp"

using namespace iuzawa;

namespace {

int default_threads() {
    if (const char* env = std::getenv("IUZAWA_THREADS")) {
        const int t = std::atoi(env);
        if (t >= 1) return t;
    }
    return 1;
}

// ---------------------------------------------------------------------------
// key=value configuration with dotted keys; unknown keys are errors
// ---------------------------------------------------------------------------

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "problem",        "data",           "test_data",        "out",
        "threads",        "net.layers",     "net.shared",       "net.fourier_layers",
        "net.m_p",        "net.k_max",      "net.pad_to",       "net.base_m",
        "net.qa_width",   "net.qa_layers",  "net.tau",          "net.gamma",
        "net.seed",       "train.epochs",   "train.batch_size", "train.base_lr",
        "train.decay",    "train.decay_every", "train.eps_floor", "train.weight_decay",
        "train.seed",     "train.squared_l2_loss", "train.checkpoint_every",
        "train.holdout_fraction", "train.verbose"};
    return keys;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw CLI::ValidationError("config", "cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("config", "line " + std::to_string(lineno) +
                                                     ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (!known_keys().count(key))
            throw CLI::ValidationError("config", "unknown key '" + key + "'");
        kv[key] = val;
    }
    return kv;
}

double to_f(const std::map<std::string, std::string>& kv, const std::string& k, double dflt) {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : std::stod(it->second);
}
int to_i(const std::map<std::string, std::string>& kv, const std::string& k, int dflt) {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : std::stoi(it->second);
}
bool to_b(const std::map<std::string, std::string>& kv, const std::string& k, bool dflt) {
    auto it = kv.find(k);
    if (it == kv.end()) return dflt;
    return it->second == "1" || it->second == "true" || it->second == "yes";
}
std::string to_s(const std::map<std::string, std::string>& kv, const std::string& k,
                 const std::string& dflt) {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : it->second;
}

// ---------------------------------------------------------------------------

int cmd_datagen(const std::string& problem, int m, int mt, int n, std::uint64_t seed,
                const std::string& out, int threads) {
    ExperimentKind kind = experiment_from_name(problem);
    Dataset ds = gen_dataset(kind, n, m, mt, seed, threads);
    write_dataset(ds, out);
    ActiveStats st = active_stats(ds);
    std::printf("wrote %zu records to %s\n", ds.records.size(), out.c_str());
    std::printf("%-12s %-10s %-12s %-18s\n", "m", "records", "active u*", "mean |A|/|Omega|");
    std::printf("%-12d %-10d %-12d %-18.4f\n", m, st.n_records, st.n_active,
                st.mean_active_ratio);
    return 0;
}

std::pair<double, double> pd_steps_for(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::EllipticAniso: return {2.0, 0.4};
        default: return {350.0, 1.0};
    }
}

int cmd_solve(const std::string& method, const std::string& data, int index, double rtol,
              bool use_reference) {
    Dataset ds = read_dataset(data);
    if (index < 0 || index >= static_cast<int>(ds.records.size()))
        throw CLI::ValidationError("--index", "out of range");
    const DatasetRecord& rec = ds.records[index];
    auto op = make_operator(ds.kind, ds.domain);
    ProblemInstance prob = make_problem(ds.kind, rec, op);
    std::optional<GridField> ref;
    if (use_reference) ref = rec.u_star;

    SaddleState state{GridField(ds.domain), GridField(ds.domain)};
    SolveReport rep;
    if (method == "ssn") {
        std::tie(state, rep) = ssn_solve(prob, rtol, 100);
    } else if (method == "uzawa") {
        std::tie(state, rep) = uzawa_solve(
            prob, PreconditionerChoice::scalar(admissible_sigma(prob)), 1e-4, rtol, 20000, ref);
    } else if (method == "pd") {
        auto [sp, sd] = pd_steps_for(ds.kind);
        std::tie(state, rep) = pd_solve(prob, sp, sd, rtol, 20000, ref);
    } else {
        throw CLI::ValidationError("--method", "unknown method " + method);
    }

    const double erel = relative_error(state.u, rec.u_star, 1e-14);
    std::printf("method=%s index=%d iterations=%d converged=%d\n", method.c_str(), index,
                rep.iterations, rep.converged ? 1 : 0);
    std::printf("final_metric=%.6e eps_rel_vs_reference=%.6e wall_time_s=%.4f\n",
                rep.residual_history.empty() ? -1.0 : rep.residual_history.back(), erel,
                rep.wall_time);
    return rep.converged ? 0 : 3;
}

int cmd_train(const std::map<std::string, std::string>& kv, int threads) {
    const std::string data_path = to_s(kv, "data", "");
    if (data_path.empty()) throw CLI::ValidationError("config", "missing key 'data'");
    Dataset ds = read_dataset(data_path);

    NetConfig nc;
    nc.ndims = ds.domain.ndims;
    nc.base_m = ds.domain.res[0];
    const bool parabolic = ds.kind == ExperimentKind::Parabolic;
    nc.layers = to_i(kv, "net.layers", parabolic ? 5 : 6);
    nc.shared = to_b(kv, "net.shared", false);
    nc.fourier_layers = to_i(kv, "net.fourier_layers", parabolic ? 3 : 4);
    nc.m_p = to_i(kv, "net.m_p", 8);
    nc.k_max = to_i(kv, "net.k_max", 8);
    nc.pad_to = to_i(kv, "net.pad_to",
                     std::max(ds.domain.res[0] + 2, ds.domain.res[0] * 9 / 8));
    nc.base_m = to_i(kv, "net.base_m", ds.domain.res[0]);
    nc.qa_width = to_i(kv, "net.qa_width", 64);
    nc.qa_layers = to_i(kv, "net.qa_layers", 3);
    nc.tau = to_f(kv, "net.tau", 1e-4);
    nc.gamma = to_f(kv, "net.gamma", 1e-6);
    nc.xi_channels = parabolic ? 3 : 2;
    nc.beta = parabolic ? 0.01 : 0.0;

    TrainConfig tc;
    tc.epochs = to_i(kv, "train.epochs", 300);
    tc.batch_size = to_i(kv, "train.batch_size", 64);
    tc.base_lr = to_f(kv, "train.base_lr", 1e-3);
    tc.decay = to_f(kv, "train.decay", 0.6);
    tc.decay_every = to_i(kv, "train.decay_every", 30);
    tc.eps_floor = to_f(kv, "train.eps_floor", 1e-8);
    tc.weight_decay = to_f(kv, "train.weight_decay", 1e-4);
    tc.seed = static_cast<std::uint64_t>(to_i(kv, "train.seed", 0));
    tc.squared_l2_loss = to_b(kv, "train.squared_l2_loss", false);
    tc.checkpoint_every = to_i(kv, "train.checkpoint_every", 0);
    tc.checkpoint_path = to_s(kv, "out", "checkpoint.bin");
    tc.holdout_fraction = to_f(kv, "train.holdout_fraction", 0.125);
    tc.verbose = to_b(kv, "train.verbose", true);
    tc.threads = threads;

    // held-out split: a separate test file, else the last fraction
    Dataset holdout;
    const std::string test_path = to_s(kv, "test_data", "");
    Dataset train_ds;
    train_ds.kind = ds.kind;
    train_ds.domain = ds.domain;
    if (!test_path.empty()) {
        holdout = read_dataset(test_path);
        train_ds.records = std::move(ds.records);
    } else {
        const std::size_t n_hold =
            static_cast<std::size_t>(ds.records.size() * tc.holdout_fraction);
        const std::size_t n_train = ds.records.size() - n_hold;
        holdout.kind = ds.kind;
        holdout.domain = ds.domain;
        for (std::size_t i = 0; i < ds.records.size(); ++i)
            (i < n_train ? train_ds : holdout).records.push_back(std::move(ds.records[i]));
    }

    NetParams net = NetParams::init(nc, static_cast<std::uint64_t>(to_i(kv, "net.seed", 1)));
    std::printf("training %s: %zu train / %zu held-out records, %zu parameters\n",
                experiment_name(train_ds.kind), train_ds.records.size(),
                holdout.records.size(), net.store.total_parameters());
    TrainResult res = train(tc, net, train_ds, holdout.records.empty() ? nullptr : &holdout);
    if (!res.train_loss.empty())
        std::printf("final train loss %.6f\n", res.train_loss.back());
    if (!res.holdout_loss.empty())
        std::printf("final held-out loss %.6f\n", res.holdout_loss.back());
    std::printf("checkpoint written to %s\n", tc.checkpoint_path.c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, int resample_to,
             const std::string& report) {
    NetParams net = load_checkpoint(ckpt);
    Dataset ds = read_dataset(data);
    EvalRow row = evaluate(net, ds, resample_to, 1e-8);
    row.method = net.cfg.shared ? "iuzawa-net-s" : "iuzawa-net-f";
    if (!report.empty()) write_metrics_csv(report, {row});
    std::printf("method=%s m=%d eps_rel mean=%.6e sd=%.6e eps_abs mean=%.6e sd=%.6e n=%d\n",
                row.method.c_str(), row.m, row.eps_rel_mean, row.eps_rel_sd, row.eps_abs_mean,
                row.eps_abs_sd, row.n_records);
    return 0;
}

int cmd_bench(const std::string& data, const std::string& methods_csv, double rtol,
              const std::string& report) {
    Dataset ds = read_dataset(data);
    auto op = make_operator(ds.kind, ds.domain);
    std::vector<std::string> methods;
    std::stringstream ss(methods_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) methods.push_back(tok);

    std::ofstream os;
    if (!report.empty()) {
        os.open(report, std::ios::trunc);
        os << "method,m,mean_time_s,mean_iters\n";
    }
    bool all_converged = true;
    for (const auto& method : methods) {
        double time_sum = 0.0, iter_sum = 0.0;
        int n_ok = 0;
        for (const auto& rec : ds.records) {
            ProblemInstance prob = make_problem(ds.kind, rec, op);
            SolveReport rep;
            SaddleState st{GridField(ds.domain), GridField(ds.domain)};
            if (method == "ssn") {
                std::tie(st, rep) = ssn_solve(prob, rtol, 100);
            } else if (method == "uzawa") {
                std::tie(st, rep) =
                    uzawa_solve(prob, PreconditionerChoice::scalar(admissible_sigma(prob)),
                                1e-4, rtol, 20000, rec.u_star);
            } else if (method == "pd") {
                auto [sp, sd] = pd_steps_for(ds.kind);
                std::tie(st, rep) = pd_solve(prob, sp, sd, rtol, 20000, rec.u_star);
            } else {
                throw CLI::ValidationError("--methods", "unknown method " + method);
            }
            time_sum += rep.wall_time;
            iter_sum += rep.iterations;
            if (rep.converged)
                ++n_ok;
            else
                all_converged = false;
        }
        const double n = static_cast<double>(ds.records.size());
        std::printf("%-8s m=%d mean_time_s=%.5f mean_iters=%.2f converged=%d/%d\n",
                    method.c_str(), ds.domain.res[0], time_sum / n, iter_sum / n, n_ok,
                    static_cast<int>(n));
        if (os.is_open()) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g\n", method.c_str(),
                          ds.domain.res[0], time_sum / n, iter_sum / n);
            os << buf;
        }
    }
    return all_converged ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nonsmooth optimal control of linear PDEs: classical saddle-point solvers "
                 "and the unrolled trainable counterpart"};
    app.require_subcommand(1);
    int threads = default_threads();
    app.add_option("--threads", threads, "worker thread cap (or IUZAWA_THREADS)");

    // datagen
    auto* dg = app.add_subcommand("datagen", "generate a dataset with SSN reference controls");
    std::string dg_problem = "elliptic-iso", dg_out = "dataset.bin";
    int dg_m = 64, dg_mt = -1, dg_n = 16;
    std::uint64_t dg_seed = 0;
    dg->add_option("--problem", dg_problem)->required();
    dg->add_option("--m", dg_m)->required();
    dg->add_option("--mt", dg_mt, "time resolution (default m)");
    dg->add_option("--n", dg_n)->required();
    dg->add_option("--seed", dg_seed)->required();
    dg->add_option("--out", dg_out)->required();

    // solve
    auto* sv = app.add_subcommand("solve", "run one classical solver on one record");
    std::string sv_method, sv_data;
    int sv_index = 0;
    double sv_rtol = 2e-3;
    bool sv_ref = false;
    sv->add_option("--method", sv_method)->required();
    sv->add_option("--data", sv_data)->required();
    sv->add_option("--index", sv_index)->required();
    sv->add_option("--rtol", sv_rtol)->required();
    sv->add_flag("--reference", sv_ref, "stop on eps_rel vs the stored reference");

    // train
    auto* tr = app.add_subcommand("train", "train an unrolled network from a config file");
    std::string tr_config;
    tr->add_option("--config", tr_config)->required();
    std::map<std::string, std::string> overrides;
    for (const auto& key : known_keys()) {
        tr->add_option_function<std::string>(
            "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; },
            "override config key " + key);
    }

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string ev_ckpt, ev_data, ev_report;
    int ev_resample = 0;
    ev->add_option("--ckpt", ev_ckpt)->required();
    ev->add_option("--data", ev_data)->required();
    ev->add_option("--resample", ev_resample, "zero-shot evaluation resolution");
    ev->add_option("--report", ev_report, "CSV output path");

    // bench
    auto* bn = app.add_subcommand("bench", "benchmark classical solvers on a dataset");
    std::string bn_data, bn_methods = "ssn,uzawa,pd", bn_report;
    double bn_rtol = 2e-3;
    bn->add_option("--data", bn_data)->required();
    bn->add_option("--methods", bn_methods);
    bn->add_option("--rtol", bn_rtol);
    bn->add_option("--report", bn_report);

    // verify
    auto* vf = app.add_subcommand("verify", "run the full property suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (dg->parsed())
            return cmd_datagen(dg_problem, dg_m, dg_mt > 0 ? dg_mt : dg_m, dg_n, dg_seed, dg_out,
                               threads);
        if (sv->parsed()) return cmd_solve(sv_method, sv_data, sv_index, sv_rtol, sv_ref);
        if (tr->parsed()) {
            auto kv = parse_config_file(tr_config);
            for (const auto& [k, v] : overrides) kv[k] = v;
            return cmd_train(kv, threads);
        }
        if (ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_resample, ev_report);
        if (bn->parsed()) return cmd_bench(bn_data, bn_methods, bn_rtol, bn_report);
        if (vf->parsed()) return run_verification(threads) ? 0 : 2;
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
