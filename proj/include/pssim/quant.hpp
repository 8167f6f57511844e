#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "pssim/errors.hpp"

namespace pssim {

// Accumulators are 48-bit registers; anything at or beyond +/-2^47 is a
// hard overflow, never a silent wrap.
inline constexpr std::int64_t kAccLimit = std::int64_t{1} << 47;

// Word widths 2..16 are signed two's complement. Width 1 is the unsigned
// {0,1} mode used for binary images.
inline constexpr int min_raw(int bits) {
    return bits == 1 ? 0 : -(1 << (bits - 1));
}

inline constexpr int max_raw(int bits) {
    return bits == 1 ? 1 : (1 << (bits - 1)) - 1;
}

// One fixed-point word: value = raw * 2^exponent.
struct QValue {
    std::int32_t raw = 0;
    std::uint8_t bits = 16;
    std::int8_t exponent = 0;
};

struct Accumulator {
    std::int64_t value = 0;
};

// Quantized tensor, row-major. Convolution tensors use either
// (channels, height, width) or (filters, channels, kh, kw).
struct QTensor {
    std::vector<std::uint32_t> dims;
    std::uint8_t bits = 16;
    std::int8_t exponent = 0;
    std::vector<std::int32_t> data;

    std::size_t size() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

inline void validate(const QTensor& t) {
    if (t.bits < 1 || t.bits > 16)
        throw RangeError("tensor bits out of [1,16]: " + std::to_string(int(t.bits)));
    if (t.data.size() != t.size())
        throw ShapeError("tensor data length does not match dims");
    const int lo = min_raw(t.bits), hi = max_raw(t.bits);
    for (auto v : t.data)
        if (v < lo || v > hi)
            throw RangeError("tensor word out of range for declared width");
}

namespace detail {
// round-half-away-from-zero to the nearest integer
inline std::int64_t round_half_away(double x) {
    return std::llround(x); // llround rounds halfway cases away from zero
}

inline std::int32_t saturate(std::int64_t v, int bits) {
    const std::int64_t lo = min_raw(bits), hi = max_raw(bits);
    if (v < lo) return static_cast<std::int32_t>(lo);
    if (v > hi) return static_cast<std::int32_t>(hi);
    return static_cast<std::int32_t>(v);
}

// Arithmetic right shift by k with round-half-away-from-zero.
inline std::int64_t shift_round_half_away(std::int64_t v, int k) {
    if (k == 0) return v;
    if (k >= 49) return 0; // |v| < 2^47, so the rounded result is zero

    const bool neg = v < 0;
    const std::uint64_t mag = neg ? static_cast<std::uint64_t>(-v) : static_cast<std::uint64_t>(v);
    const std::uint64_t r = (mag + (std::uint64_t{1} << (k - 1))) >> k;
    return neg ? -static_cast<std::int64_t>(r) : static_cast<std::int64_t>(r);
}
} // namespace detail

// Quantize a real to a fixed-point word. Saturates, never fails.
inline QValue quantize(double x, int bits, int exponent) {
    if (bits < 1 || bits > 16)
        throw RangeError("quantize: bits out of [1,16]");
    const std::int64_t raw = detail::round_half_away(std::ldexp(x, -exponent));
    return QValue{detail::saturate(raw, bits),
                  static_cast<std::uint8_t>(bits),
                  static_cast<std::int8_t>(exponent)};
}

inline double dequantize(const QValue& q) {
    return std::ldexp(static_cast<double>(q.raw), q.exponent);
}

// Single-cycle multiply-accumulate into the 48-bit register.
inline Accumulator mac(Accumulator acc, const QValue& w, const QValue& p) {
    const std::int64_t r = acc.value + std::int64_t(w.raw) * std::int64_t(p.raw);
    if (r >= kAccLimit || r <= -kAccLimit)
        throw AccumulatorOverflow("48-bit accumulator overflow: " + std::to_string(r));
    return Accumulator{r};
}

inline QTensor relu_vec(const QTensor& t) {
    QTensor out = t;
    for (auto& v : out.data)
        if (v < 0) v = 0;
    return out;
}

// Per-channel spatial max pooling over (channels, height, width).
inline QTensor maxpool(const QTensor& t, int window_h, int window_w,
                       int stride_y, int stride_x) {
    if (t.dims.size() != 3)
        throw ShapeError("maxpool expects a (channels, height, width) tensor");
    const int c = static_cast<int>(t.dims[0]);
    const int h = static_cast<int>(t.dims[1]);
    const int w = static_cast<int>(t.dims[2]);
    if (window_h <= 0 || window_w <= 0 || stride_y <= 0 || stride_x <= 0)
        throw ShapeError("maxpool window and stride must be positive");
    if (window_h > h || window_w > w)
        throw ShapeError("maxpool window exceeds input extent");
    const int oh = (h - window_h) / stride_y + 1;
    const int ow = (w - window_w) / stride_x + 1;

    QTensor out;
    out.dims = {static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(oh),
                static_cast<std::uint32_t>(ow)};
    out.bits = t.bits;
    out.exponent = t.exponent;
    out.data.resize(out.size());
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                std::int32_t m = t.data[(std::size_t(ci) * h + y * stride_y) * w + x * stride_x];
                for (int ky = 0; ky < window_h; ++ky)
                    for (int kx = 0; kx < window_w; ++kx) {
                        const std::int32_t v =
                            t.data[(std::size_t(ci) * h + y * stride_y + ky) * w + x * stride_x + kx];
                        if (v > m) m = v;
                    }
                out.data[(std::size_t(ci) * oh + y) * ow + x] = m;
            }
    return out;
}

// Scale a 48-bit accumulation down to the next layer's word width.
// The accumulator is in units of 2^in_exponent_sum; only right shifts
// are allowed.
inline QValue requantize(const Accumulator& acc, int out_bits, int out_exponent,
                         int in_exponent_sum) {
    if (out_bits < 1 || out_bits > 16)
        throw RangeError("requantize: out_bits out of [1,16]");
    const int shift = out_exponent - in_exponent_sum;
    if (shift < 0)
        throw ExponentError("requantize: out_exponent below input exponent sum (left shift)");
    const std::int64_t shifted = detail::shift_round_half_away(acc.value, shift);
    return QValue{detail::saturate(shifted, out_bits),
                  static_cast<std::uint8_t>(out_bits),
                  static_cast<std::int8_t>(out_exponent)};
}

} // namespace pssim
