#pragma once

#include <array>
#include <complex>
#include <vector>

#include "iuzawa/field.hpp"

namespace iuzawa {

using cplx = std::complex<double>;

/// Coefficients of one of the four discrete transforms. `shape` gives the
/// per-axis retained mode counts; layout matches GridField (axis 0 fastest).
/// Periodic-truncated coefficients are stored on the centered band, index
/// k + k_max per axis for k in [-k_max, k_max].
struct SpectralCoeffs {
    enum class Kind { Sine, Cosine, PeriodicFull, PeriodicTruncated };
    Kind kind = Kind::Sine;
    int ndims = 2;
    std::array<int, 3> shape{0, 0, 0};
    std::vector<cplx> values;

    std::size_t size() const;
};

// Sine expansion on interior points (homogeneous Dirichlet eigenbasis).
// Forward is the unnormalized sum; idst carries the 2/(m-1) factors.
SpectralCoeffs dst(const GridField& a);
GridField idst(const SpectralCoeffs& c, const Domain& target);

// Cosine expansion (discrete Neumann eigenbasis), trapezoid-weighted sums.
SpectralCoeffs dct(const GridField& a);
GridField idct(const SpectralCoeffs& c, const Domain& target);

// Periodic transform truncated to |k_i| <= k_max per axis; errors if
// k_max >= resolution/2. ifft_trunc of the untruncated transform of a real
// field reproduces it; with truncation it drops the removed modes.
SpectralCoeffs fft_trunc(const GridField& a, int k_max);
GridField ifft_trunc(const SpectralCoeffs& c, const Domain& target);

// Zero-padding on the high side of every axis; crop is its left inverse.
GridField pad_extend(const GridField& a, int target_res);
GridField crop(const GridField& a, const Domain& orig);

namespace fft {

/// Cached mixed-radix plan (any n >= 1): iterative decimation-in-time with a
/// precomputed digit-reversal permutation and per-stage twiddle tables.
/// Radix 2/3/4 butterflies are unrolled; larger prime factors fall back to an
/// O(r^2) kernel, so smooth sizes are fast and odd primes still work.
class Plan {
  public:
    explicit Plan(int n);
    int size() const { return n_; }
    /// In-place transform; sign = -1 forward (unnormalized), +1 inverse
    /// (unnormalized; caller divides by n for the inverse convention).
    void execute(cplx* x, int sign) const;
    /// Transform along an axis whose consecutive entries are `stride` apart;
    /// the stride adjacent lanes are carried simultaneously (contiguous inner
    /// loops), covering n*stride complexes starting at base.
    void execute_strided(cplx* base, std::size_t stride, int sign) const;

  private:
    struct Stage {
        int radix, m, block;            // block = radix * m, sub-transform size
        std::vector<cplx> tw_fwd, tw_inv;  // (radix-1) x m twiddles
        std::vector<cplx> wr_fwd, wr_inv;  // radix x radix DFT kernel (generic path)
    };
    int n_;
    std::vector<int> perm_;
    std::vector<Stage> stages_;  // innermost (smallest block) first
};

const Plan& plan(int n);

/// d-dimensional in-place FFT over a dense array with the given per-axis
/// lengths (axis 0 fastest). sign as in Plan::execute; inverse is unnormalized.
void fft_nd(cplx* data, const std::array<int, 3>& dims, int ndims, int sign);

// Real sequence transforms built on the complex engine.
void dst1(const double* in, double* out, int n);            // S_k = sum x_j sin(pi j k/(n+1))
void dct1(const double* in, double* out, int n);            // half-weighted endpoint sums
}  // namespace fft

}  // namespace iuzawa
