#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ctgest {

// one splitmix64 step from state x
inline std::uint64_t mix64(std::uint64_t x) {
    std::uint64_t z = x + 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

// Deterministic random stream: xoshiro256++ seeded by chained splitmix64
// over (seed, stream_id). Identical (seed, stream_id) gives bit-identical
// u64/uniform draws on any platform. Normals use Box-Muller with both
// uniforms consumed and no cached second variate, so replaying a stream
// stays aligned draw-for-draw regardless of what was drawn before.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_(stream_id) {
        std::uint64_t u = mix64(seed_);
        std::uint64_t v = mix64(u ^ stream_);
        s_[0] = mix64(v);
        s_[1] = mix64(s_[0]);
        s_[2] = mix64(s_[1]);
        s_[3] = mix64(s_[2]);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl64(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl64(s_[3], 45);
        return result;
    }

    // uniform on [0, 1), 53-bit mantissa
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double next_normal() {
        const double u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    double next_normal(double mean, double sd) { return mean + sd * next_normal(); }

    // Exp(rate); rate == 0 is the caller's job to avoid (gives +inf)
    double next_exponential(double rate) {
        return -std::log1p(-next_double()) / rate;
    }

    // Independent child stream derived from this stream's identity (not its
    // position): the same (parent, key) always names the same substream.
    RngStream substream(std::uint64_t key) const {
        return RngStream(mix64(seed_ ^ mix64(key ^ 0xA0761D6478BD642Full)),
                         mix64(stream_ ^ mix64(key ^ 0xE7037ED1A0B428DBull)));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }

private:
    std::uint64_t seed_, stream_;
    std::uint64_t s_[4];
};

}  // namespace ctgest
