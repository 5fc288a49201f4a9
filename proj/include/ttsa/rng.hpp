#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace ttsa {

/// splitmix64 finalizer. Fixed constants (Vigna 2015); every seed-derived
/// quantity in this library goes through this function so that sample
/// streams are reproducible bit-for-bit across platforms.
inline std::uint64_t splitmix64_finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Child-stream seed derivation, documented bit-exactly:
///   mix64(base, i) = finalize(base + (i+1) * 0x9E3779B97F4A7C15)
/// which equals the (i+1)-th output of a splitmix64 generator seeded with
/// `base`. Replication i of a run seeded with s uses seed mix64(s, i).
inline std::uint64_t mix64(std::uint64_t base, std::uint64_t i) {
    return splitmix64_finalize(base + (i + 1) * 0x9E3779B97F4A7C15ULL);
}

/// Deterministic generator state: xoshiro256++ seeded from a 64-bit value by
/// four successive splitmix64 outputs. Single-owner; copyable for forking a
/// stream at a known point.
class RngState {
public:
    explicit RngState(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) {
            sm += 0x9E3779B97F4A7C15ULL;
            w = splitmix64_finalize(sm);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in (0, 1]; cannot return 0, so log() below is always finite.
    double next_unit_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    /// Uniform in [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Box-Muller pair; consumes exactly two raw draws per call.
    std::pair<double, double> next_normal_pair() {
        const double u1 = next_unit_pos();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(t), r * std::sin(t)};
    }

    std::array<std::uint64_t, 4> state() const { return s_; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> s_{};
};

/// Fills `out` with i.i.d. standard normals. Draws are consumed in pairs; for
/// odd lengths the second member of the final pair is discarded, so the number
/// of raw draws depends only on out.size().
inline void fill_standard_normals(RngState& rng, Eigen::Ref<Eigen::VectorXd> out) {
    const auto n = out.size();
    for (Eigen::Index i = 0; i + 1 < n; i += 2) {
        const auto [z0, z1] = rng.next_normal_pair();
        out[i] = z0;
        out[i + 1] = z1;
    }
    if (n % 2 == 1) out[n - 1] = rng.next_normal_pair().first;
}

}  // namespace ttsa
