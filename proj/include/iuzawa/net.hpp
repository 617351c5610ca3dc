#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iuzawa/autodiff.hpp"
#include "iuzawa/classic.hpp"
#include "iuzawa/field.hpp"

namespace iuzawa {

/// Architecture of one unrolled network. pad_to/base_m fix the padding ratio:
/// an input at resolution m is zero-extended to round(pad_to*m/base_m) per
/// axis, so evaluation at unseen resolutions scales the torus box with the
/// grid while k_max stays fixed.
struct NetConfig {
    int layers = 6;
    bool shared = false;
    double tau = 1e-4;
    int fourier_layers = 4;
    int m_p = 8;
    int k_max = 8;
    int pad_to = 72;
    int base_m = 64;
    int qa_width = 64;
    int qa_layers = 3;  // qa_layers - 1 ReLU hidden layers
    int xi_channels = 2;  // 2 for box bounds, 3 when the L1 weight is an input
    int ndims = 2;
    double gamma = 1e-6;
    double beta = 0.0;  // fed as the third xi channel when xi_channels == 3

    int qa_skip_channels() const { return 1 + xi_channels; }
    int padded_res(int m) const;
};

/// All learnable weights plus their AdamW state, keyed by
/// "layer<k>.<module>.<tensor>" (or "shared.<module>.<tensor>").
struct NetParams {
    NetConfig cfg;
    ad::ParamStore store;

    static NetParams init(const NetConfig& cfg, std::uint64_t seed);
    std::string prefix(int layer) const {
        return cfg.shared ? std::string("shared") : "layer" + std::to_string(layer);
    }
};

/// Input fields of one sample lifted to tensors ({1, n} each; xi holds the
/// bound channels and, for L1 problems, the constant beta channel).
struct SampleTensors {
    Domain domain;
    ad::Tensor y_d, f;
    std::vector<ad::Tensor> xi;
};
SampleTensors make_sample(const NetConfig& cfg, const GridField& y_d, const GridField& f,
                          const GridField& u_a, const GridField& u_b);

struct ForwardTrace {
    int u_final = -1;                       // tape node of u^L
    std::vector<std::pair<int, int>> states;  // (u^k, p^k) nodes when captured
};

// Module forwards (tape nodes in, tape node out).
int fno_forward(ad::Tape& tape, const NetParams& net, const std::string& prefix, int field,
                const Domain& domain);
int qs_forward(ad::Tape& tape, const NetParams& net, const std::string& prefix, int field,
               const Domain& domain);
int qa_forward(ad::Tape& tape, const NetParams& net, const std::string& prefix, int r,
               const std::vector<int>& xi);

/// Full unrolled forward from (0, 0).
ForwardTrace iuzawa_forward(ad::Tape& tape, const NetParams& net, const SampleTensors& sample,
                            bool capture_states = false);

/// Non-differentiable convenience wrappers.
GridField net_infer(const NetParams& net, const SampleTensors& sample);
std::vector<SaddleState> net_trajectory(const NetParams& net, const SampleTensors& sample);

/// Blueprint iterates with the exact operators substituted for the learned
/// modules (S, S*, the closed-form resolvent, and Q_S = sigma I); the
/// trajectory an algorithm-tracking network is measured against.
std::vector<SaddleState> exact_operator_trajectory(const ProblemInstance& prob, double sigma,
                                                   double tau, int layers);

void save_checkpoint(const NetParams& net, const std::string& path);
NetParams load_checkpoint(const std::string& path);

GridField tensor_to_field(const ad::Tensor& t, const Domain& d);
ad::Tensor field_to_tensor(const GridField& g);

}  // namespace iuzawa
