#include "iuzawa/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "iuzawa/rng.hpp"

namespace iuzawa {

using ad::Tape;
using ad::Tensor;

int loss_node(Tape& tape, int pred, const Tensor* target, const Domain& domain, double eps_floor,
              bool squared_l2) {
    int tgt = tape.constant_ref(target);
    int diff = tape.sub(pred, tgt);
    if (!squared_l2) {
        int num = tape.sum(tape.abs(diff));
        int den = tape.max_scalar(tape.sum(tape.abs(tgt)), eps_floor);
        return tape.divide(num, den);
    }
    Tensor w = Tensor::zeros({1, static_cast<int>(domain.size())});
    for (std::size_t i = 0; i < domain.size(); ++i) w.data[i] = quad_weight(domain, i);
    int wnode = tape.constant(std::move(w));
    int num = tape.sum(tape.hadamard(tape.hadamard(diff, diff), wnode));
    int den = tape.max_scalar(tape.sum(tape.hadamard(tape.hadamard(tgt, tgt), wnode)), eps_floor);
    return tape.divide(num, den);
}

namespace {

struct SampleGrad {
    double loss = 0.0;
    std::map<std::string, Tensor> grads;
};

SampleGrad sample_pass(const NetParams& net, const SampleTensors& sample, const Tensor& target,
                       const TrainConfig& cfg) {
    Tape tape;
    ForwardTrace tr = iuzawa_forward(tape, net, sample, false);
    int loss = loss_node(tape, tr.u_final, &target, sample.domain, cfg.eps_floor,
                         cfg.squared_l2_loss);
    SampleGrad out;
    out.loss = tape.value(loss).data[0];
    out.grads = tape.backward(loss);
    return out;
}

double holdout_mean_loss(const NetParams& net, const Dataset& ds, const TrainConfig& cfg) {
    double s = 0.0;
    for (const auto& r : ds.records) {
        SampleTensors sample = make_sample(net.cfg, r.y_d, r.f, r.u_a, r.u_b);
        Tensor target = field_to_tensor(r.u_star);
        Tape tape;
        ForwardTrace tr = iuzawa_forward(tape, net, sample, false);
        int loss = loss_node(tape, tr.u_final, &target, sample.domain, cfg.eps_floor,
                             cfg.squared_l2_loss);
        s += tape.value(loss).data[0];
    }
    return s / static_cast<double>(ds.records.size());
}

}  // namespace

TrainResult train(const TrainConfig& cfg, NetParams& net, const Dataset& data,
                  const Dataset* holdout) {
    if (data.records.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.batch_size < 1 || cfg.epochs < 0) throw std::invalid_argument("train: bad config");

    const int n = static_cast<int>(data.records.size());
    std::vector<SampleTensors> samples;
    std::vector<Tensor> targets;
    samples.reserve(n);
    targets.reserve(n);
    for (const auto& r : data.records) {
        samples.push_back(make_sample(net.cfg, r.y_d, r.f, r.u_a, r.u_b));
        targets.push_back(field_to_tensor(r.u_star));
    }

    TrainResult result;
    RngState shuffle_rng(cfg.seed);
    std::vector<int> order(n);
    const int block = std::max(1, cfg.threads);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = 0; i < n; ++i) order[i] = i;
        for (int i = n - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.next_u64() % (i + 1)]);

        const double lr = ad::lr_schedule(epoch, cfg.base_lr, cfg.decay, cfg.decay_every);
        double epoch_loss = 0.0;
        int n_batches = 0;

        for (int b0 = 0; b0 < n; b0 += cfg.batch_size) {
            const int bsz = std::min(cfg.batch_size, n - b0);
            std::map<std::string, Tensor> acc;
            double batch_loss = 0.0;

            for (int w0 = 0; w0 < bsz; w0 += block) {
                const int cnt = std::min(block, bsz - w0);
                std::vector<SampleGrad> slot(cnt);
                if (cnt == 1) {
                    slot[0] = sample_pass(net, samples[order[b0 + w0]],
                                          targets[order[b0 + w0]], cfg);
                } else {
                    std::vector<std::thread> pool;
                    for (int t = 0; t < cnt; ++t)
                        pool.emplace_back([&, t]() {
                            slot[t] = sample_pass(net, samples[order[b0 + w0 + t]],
                                                  targets[order[b0 + w0 + t]], cfg);
                        });
                    for (auto& th : pool) th.join();
                }
                // reduction strictly in sample-index order
                for (int t = 0; t < cnt; ++t) {
                    batch_loss += slot[t].loss;
                    for (auto& [name, g] : slot[t].grads) {
                        auto it = acc.find(name);
                        if (it == acc.end()) {
                            acc.emplace(name, std::move(g));
                        } else {
                            for (std::size_t i = 0; i < g.size(); ++i)
                                it->second.data[i] += g.data[i];
                        }
                    }
                }
            }
            batch_loss /= bsz;
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train: non-finite loss in epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(b0 / cfg.batch_size));
            for (auto& [name, g] : acc)
                for (auto& v : g.data) v /= bsz;
            adamw_step(net.store, acc, lr, 0.9, 0.999, 1e-8, cfg.weight_decay);
            epoch_loss += batch_loss;
            ++n_batches;
        }

        result.train_loss.push_back(epoch_loss / std::max(1, n_batches));
        if (holdout && !holdout->records.empty())
            result.holdout_loss.push_back(holdout_mean_loss(net, *holdout, cfg));
        if (cfg.verbose) {
            std::fprintf(stderr, "epoch %3d  lr %.2e  train %.6f", epoch, lr,
                         result.train_loss.back());
            if (!result.holdout_loss.empty())
                std::fprintf(stderr, "  holdout %.6f", result.holdout_loss.back());
            std::fprintf(stderr, "\n");
        }
        if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
            (epoch + 1) % cfg.checkpoint_every == 0)
            save_checkpoint(net, cfg.checkpoint_path + ".ep" + std::to_string(epoch + 1));
    }
    if (!cfg.checkpoint_path.empty()) save_checkpoint(net, cfg.checkpoint_path);
    return result;
}

EvalRow evaluate_fields(const std::vector<GridField>& preds, const Dataset& ds,
                        double eps_floor) {
    if (preds.size() != ds.records.size())
        throw std::invalid_argument("evaluate_fields: size mismatch");
    EvalRow row;
    row.n_records = static_cast<int>(preds.size());
    row.m = ds.domain.res[0];
    std::vector<double> rels, abss;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double ea = norm_l2(preds[i] - ds.records[i].u_star);
        const double er = ea / std::max(norm_l2(ds.records[i].u_star), eps_floor);
        rels.push_back(er);
        abss.push_back(ea);
    }
    auto mean_sd = [](const std::vector<double>& v) {
        double m = 0;
        for (double x : v) m += x;
        m /= v.size();
        double s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return std::pair<double, double>{m, std::sqrt(s / v.size())};  // population SD
    };
    std::tie(row.eps_rel_mean, row.eps_rel_sd) = mean_sd(rels);
    std::tie(row.eps_abs_mean, row.eps_abs_sd) = mean_sd(abss);
    return row;
}

EvalRow evaluate(const NetParams& net, const Dataset& ds, int resample_to, double eps_floor) {
    const Dataset* use = &ds;
    Dataset resampled;
    if (resample_to > 0 && resample_to != ds.domain.res[0]) {
        resampled.kind = ds.kind;
        resampled.domain = ds.domain.ndims == 3 ? Domain::spacetime(resample_to, resample_to)
                                                : Domain::square(resample_to);
        for (const auto& r : ds.records) {
            DatasetRecord rr;
            rr.y_d = resample(r.y_d, resampled.domain);
            rr.f = resample(r.f, resampled.domain);
            rr.u_a = resample(r.u_a, resampled.domain);
            rr.u_b = resample(r.u_b, resampled.domain);
            rr.u_star = resample(r.u_star, resampled.domain);
            rr.residual = r.residual;
            resampled.records.push_back(std::move(rr));
        }
        use = &resampled;
    }
    std::vector<GridField> preds;
    preds.reserve(use->records.size());
    for (const auto& r : use->records) {
        SampleTensors sample = make_sample(net.cfg, r.y_d, r.f, r.u_a, r.u_b);
        preds.push_back(net_infer(net, sample));
    }
    return evaluate_fields(preds, *use, eps_floor);
}

void write_metrics_csv(const std::string& path, const std::vector<EvalRow>& rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    os << "method,m,eps_rel_mean,eps_rel_sd,eps_abs_mean,eps_abs_sd,n_records\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g,%.9g,%.9g,%d\n", r.method.c_str(), r.m,
                      r.eps_rel_mean, r.eps_rel_sd, r.eps_abs_mean, r.eps_abs_sd, r.n_records);
        os << buf;
    }
}

}  // namespace iuzawa
