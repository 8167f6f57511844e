#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pssim/quant.hpp"

namespace pssim {

// Deterministic pseudo-random tensor: each word is zero with probability
// zero_fraction, otherwise uniform over the nonzero range of the width.
inline QTensor synth_tensor(std::vector<std::uint32_t> dims, int bits,
                            double zero_fraction, std::uint64_t seed,
                            int exponent = 0) {
    if (bits < 1 || bits > 16)
        throw RangeError("synth_tensor: bits out of [1,16]");
    if (zero_fraction < 0.0 || zero_fraction > 1.0)
        throw RangeError("synth_tensor: zero_fraction out of [0,1]");

    QTensor t;
    t.dims = std::move(dims);
    t.bits = static_cast<std::uint8_t>(bits);
    t.exponent = static_cast<std::int8_t>(exponent);
    t.data.resize(t.size());

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    // draw over [lo, hi-1] and skip 0 by mapping the collision to hi
    const int lo = min_raw(bits), hi = max_raw(bits);
    std::uniform_int_distribution<int> value(lo, hi - 1);
    for (auto& v : t.data) {
        if (coin(rng) < zero_fraction) {
            v = 0;
        } else if (bits == 1) {
            v = 1;
        } else {
            const int draw = value(rng);
            v = (draw == 0) ? hi : draw;
        }
    }
    return t;
}

inline double zero_fraction_of(const QTensor& t) {
    if (t.data.empty()) return 0.0;
    std::size_t z = 0;
    for (auto v : t.data)
        if (v == 0) ++z;
    return static_cast<double>(z) / static_cast<double>(t.data.size());
}

} // namespace pssim
