#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace iuzawa {

/// SplitMix64 stream (Steele/Lea/Flood splittable generator). Counter-based:
/// the i-th output depends only on (state, i), so identical seeds give
/// bitwise-identical streams on any platform, and split() derives an
/// independent child stream for parallel instance generation.
class RngState {
  public:
    explicit RngState(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Independent child stream; deterministic in (parent state, key).
    RngState split(std::uint64_t key) const {
        RngState child(state_ ^ (0x9e3779b97f4a7c15ULL * (key + 0x632be59bd9b4e019ULL)));
        child.next_u64();
        return child;
    }

    double uniform() {  // [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Box-Muller; consumes two uniforms per pair, caches the second.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace iuzawa
