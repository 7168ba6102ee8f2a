#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace pofbm {

// Counter-addressable RNG streams.
//
// Stream identity is the tuple (master seed, purpose, level, chain, iter,
// time step, particle). The tuple is folded through splitmix64 into a
// xoshiro256++ state, so any unit of work can derive its own stream without
// coordination and results are independent of worker count. Uniform u64
// output is covered by a golden regression test; normals go through a plain
// Box-Muller pair.

namespace stream_purpose {
inline constexpr std::uint64_t kBlockDraw = 1;
inline constexpr std::uint64_t kResample = 2;
inline constexpr std::uint64_t kTrajectoryDraw = 3;
inline constexpr std::uint64_t kProposal = 4;
inline constexpr std::uint64_t kPriorInit = 5;
inline constexpr std::uint64_t kAccept = 6;
inline constexpr std::uint64_t kSynthNoise = 7;
inline constexpr std::uint64_t kSynthObs = 8;
inline constexpr std::uint64_t kGeneric = 9;
}  // namespace stream_purpose

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct StreamKey {
    std::uint64_t seed = 0;
    std::uint64_t purpose = 0;
    std::uint64_t level = 0;
    std::uint64_t chain = 0;
    std::uint64_t iter = 0;
    std::uint64_t t = 0;
    std::uint64_t particle = 0;
};

class RngStream {
public:
    explicit RngStream(const StreamKey& key) {
        std::uint64_t acc = key.seed;
        for (std::uint64_t w : {key.purpose, key.level, key.chain, key.iter, key.t, key.particle}) {
            acc = splitmix64(acc) ^ (w + 0x9e3779b97f4a7c15ULL);
        }
        for (auto& s : state_) s = splitmix64(acc);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on (0,1); never returns 0 so log() is safe.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double gamma(double shape, double scale) {
        // Marsaglia-Tsang for shape >= 1, boosting for shape < 1.
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = uniform();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
                return d * v * scale;
            }
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace pofbm
