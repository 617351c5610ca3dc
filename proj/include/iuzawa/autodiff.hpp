#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace iuzawa::ad {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {}
    static Tensor zeros(std::vector<int> shape);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    std::size_t size() const { return data.size(); }
};

/// Grid geometry attached to channel-by-grid tensors ({C, n} with n the
/// flattened grid, axis 0 fastest).
struct GridDims {
    std::array<int, 3> dims{1, 1, 1};
    int ndims = 2;
    int total() const {
        int n = 1;
        for (int a = 0; a < ndims; ++a) n *= dims[a];
        return n;
    }
};

/// Define-by-run reverse-mode tape over dense f64 tensors. Leaves either own
/// their value or reference external storage; trainable leaves carry a name,
/// and gradients of identically named leaves accumulate (weight tying).
class Tape {
  public:
    int constant(Tensor v);
    int constant_ref(const Tensor* v);
    int param(const std::string& name, const Tensor* v);

    const Tensor& value(int id) const;
    std::size_t node_count() const { return nodes_.size(); }

    /// Reverse sweep from a scalar loss; returns name -> gradient. Parameters
    /// never touched by the sweep are absent (treated as zero by the caller).
    std::map<std::string, Tensor> backward(int loss);

    // -- primitives ---------------------------------------------------------
    int add(int a, int b);
    int sub(int a, int b);
    int scale(int a, double s);
    int hadamard(int a, int b);
    /// w: {out, in}, x: {in, n} -> {out, n}
    int channel_matmul(int w, int x);
    /// w: {out, in}, x: {out, n} -> {in, n} (applies w transposed)
    int channel_matmul_t(int w, int x);
    /// x: {c, n}, bias: {c} -> {c, n}
    int bias_broadcast(int x, int bias);
    int relu(int a);
    int gelu(int a);
    /// Fused FFT -> per-mode complex matrix -> inverse FFT (real part).
    /// Weights: {modes, A, B} as separate re/im tensors. With
    /// hermitian_half the weights live on the nonnegative orthant
    /// (modes = (k_max+1)^ndims) and mirror to the opposite orthant by
    /// conjugation; otherwise they cover the centered band
    /// (modes = (2 k_max+1)^ndims). adjoint applies the per-mode Hermitian
    /// transpose (maps A-channels to B-channels).
    int spectral_linear(int x, int w_re, int w_im, const GridDims& g, int k_max,
                        bool hermitian_half, bool adjoint);
    int pad_grid(int x, const GridDims& from, const GridDims& to);
    int crop_grid(int x, const GridDims& from, const GridDims& to);
    int concat_channels(const std::vector<int>& xs);
    int sum(int a);
    int mean(int a);
    int abs(int a);
    int max_scalar(int a, double c);
    int divide(int a, int b);  // scalar / scalar

  private:
    struct Node {
        Tensor owned;
        const Tensor* ext = nullptr;
        std::string pname;
        std::function<void(Tape&, const Tensor&)> back;
    };
    int push(Tensor v, std::function<void(Tape&, const Tensor&)> back);
    void accumulate(int id, const double* g, std::size_t n);
    /// Zero-initialized gradient buffer of node id, for in-place accumulation.
    double* gbuf(int id);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

/// Named parameter tensors with AdamW moment buffers.
struct ParamStore {
    std::vector<std::string> order;
    std::map<std::string, Tensor> params, m1, m2;
    long step = 0;

    Tensor& add(const std::string& name, Tensor init);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    std::size_t total_parameters() const;
};

/// Decoupled-weight-decay update: bias-corrected moments, then
/// p -= lr*wd*p + lr*m_hat/(sqrt(v_hat)+eps). Missing gradients count as zero.
void adamw_step(ParamStore& store, const std::map<std::string, Tensor>& grads, double lr,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                double weight_decay = 0.0);

/// base_lr * decay^floor(epoch/every)
double lr_schedule(int epoch, double base_lr, double decay = 0.6, int every = 30);

}  // namespace iuzawa::ad
