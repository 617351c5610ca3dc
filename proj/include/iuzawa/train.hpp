#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iuzawa/grf.hpp"
#include "iuzawa/net.hpp"

namespace iuzawa {

struct TrainConfig {
    int epochs = 300;
    int batch_size = 64;
    double base_lr = 1e-3;
    double decay = 0.6;
    int decay_every = 30;
    double eps_floor = 1e-8;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
    int threads = 1;
    bool squared_l2_loss = false;    // default: the empirical sum-of-abs ratio
    int checkpoint_every = 0;        // epochs between checkpoints (0: final only)
    std::string checkpoint_path;     // empty: no checkpoints written
    double holdout_fraction = 0.125; // split when no separate test set is given
    bool verbose = false;
};

/// Differentiable per-sample loss: sum|pred - target| / max(sum|target|, eps)
/// or, behind the flag, the quadrature-weighted squared relative L2 form.
int loss_node(ad::Tape& tape, int pred, const ad::Tensor* target, const Domain& domain,
              double eps_floor, bool squared_l2);

struct TrainResult {
    std::vector<double> train_loss;    // per-epoch mean batch loss
    std::vector<double> holdout_loss;  // per-epoch held-out mean loss (may be empty)
};

/// Deterministic in (seed, dataset): fixed shuffle order per epoch and
/// sample-index-ordered gradient reduction, so results are independent of the
/// thread count. Throws on a non-finite batch loss.
TrainResult train(const TrainConfig& cfg, NetParams& net, const Dataset& data,
                  const Dataset* holdout = nullptr);

struct EvalRow {
    std::string method;
    int m = 0;
    double eps_rel_mean = 0, eps_rel_sd = 0, eps_abs_mean = 0, eps_abs_sd = 0;
    int n_records = 0;
};

/// Metrics of precomputed predictions (population SD).
EvalRow evaluate_fields(const std::vector<GridField>& preds, const Dataset& ds,
                        double eps_floor);

/// Forward-pass evaluation; resample_to > 0 resamples every input (and the
/// reference) to the target resolution first, the zero-shot protocol.
EvalRow evaluate(const NetParams& net, const Dataset& ds, int resample_to, double eps_floor);

void write_metrics_csv(const std::string& path, const std::vector<EvalRow>& rows);

}  // namespace iuzawa
