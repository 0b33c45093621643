#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "escrowsim/bytes.hpp"
#include "escrowsim/digest.hpp"

namespace escrowsim {

/// Deterministic PRNG stream. The engine is std::mt19937_64 (bit-exact per
/// the standard); the distribution transforms are written out explicitly so
/// draws do not depend on the standard library's unspecified algorithms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Exponential with the given mean; strictly positive.
    double exponential(double mean) {
        double u = uniform01();          // [0,1)
        return -mean * std::log1p(-u);   // log1p(-u) in (-inf, 0]
    }

    bool bernoulli(double p) { return uniform01() < p; }

    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : eng_() % n; }

    Hash32 bytes32() {
        Hash32 out{};
        for (int w = 0; w < 4; ++w) {
            std::uint64_t v = eng_();
            for (int i = 0; i < 8; ++i)
                out[static_cast<std::size_t>(w * 8 + i)] =
                    static_cast<std::uint8_t>(v >> (8 * (7 - i)));
        }
        return out;
    }

private:
    std::mt19937_64 eng_;
};

/// Derives an independent substream seed from a root seed and a label, so
/// draws in one subsystem never perturb another.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
    ByteWriter w;
    w.u64be(root);
    Bytes root_bytes = w.take();
    Hash32 h = tagged_digest("seed", {as_span(root_bytes), as_span(label)});
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out = (out << 8) | h[static_cast<std::size_t>(i)];
    return out;
}

}  // namespace escrowsim
