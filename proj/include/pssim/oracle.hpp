#pragma once

// Brute-force references used only for verification. This header must not
// depend on the mapper or datapath; independence is the point.

#include <cmath>
#include <cstdint>
#include <map>

#include "pssim/errors.hpp"
#include "pssim/layer.hpp"
#include "pssim/quant.hpp"

namespace pssim::oracle {

// Six-nested-loop integer convolution with 48-bit-checked accumulation and
// the same requantize convention as the datapath output path.
inline QTensor reference_conv(const LayerSpec& spec, const QTensor& weights,
                              const QTensor& image) {
    validate(spec);
    const int C = spec.in_channels, H = spec.in_height, W = spec.in_width;
    const int F = spec.num_filters, Kh = spec.kernel_h, Kw = spec.kernel_w;
    const int h_out = spec.out_height();
    const int w_out = spec.out_width();
    if (h_out <= 0 || w_out <= 0)
        throw ShapeError("reference_conv: non-positive output dims");

    QTensor out;
    out.dims = {std::uint32_t(F), std::uint32_t(h_out), std::uint32_t(w_out)};
    out.bits = static_cast<std::uint8_t>(spec.out_bits);
    out.exponent = static_cast<std::int8_t>(spec.out_exponent);
    out.data.resize(out.size());

    const int in_exp_sum = spec.weight_exponent + spec.image_exponent;
    for (int f = 0; f < F; ++f)
        for (int y = 0; y < h_out; ++y)
            for (int x = 0; x < w_out; ++x) {
                std::int64_t acc = 0;
                for (int c = 0; c < C; ++c)
                    for (int kr = 0; kr < Kh; ++kr)
                        for (int kc = 0; kc < Kw; ++kc) {
                            const std::int64_t wv =
                                weights.data[((std::uint64_t(f) * C + c) * Kh + kr) * Kw + kc];
                            const std::int64_t pv =
                                image.data[(std::uint64_t(c) * H + y * spec.stride_v + kr) * W +
                                           x * spec.stride_h + kc];
                            acc += wv * pv;
                            if (acc >= kAccLimit || acc <= -kAccLimit)
                                throw AccumulatorOverflow("reference_conv: 48-bit overflow");
                        }
                const QValue q = requantize(Accumulator{acc}, spec.out_bits,
                                            spec.out_exponent, in_exp_sum);
                out.data[(std::uint64_t(f) * h_out + y) * w_out + x] = q.raw;
            }
    return out;
}

// 1D-SIMD baseline: two operand words fetched per MAC issue slot, no reuse.
inline std::uint64_t naive_fetch_count(const LayerSpec& spec) {
    if (spec.kind != LayerKind::conv)
        throw ShapeError("naive_fetch_count expects a conv layer");
    const std::uint64_t col_spans = (spec.out_width() + 15) / 16;
    const std::uint64_t filter_spans = (std::uint64_t(spec.num_filters) + 15) / 16;
    const std::uint64_t tiles =
        col_spans * spec.out_height() * filter_spans * spec.in_channels;
    const std::uint64_t slots =
        tiles * spec.kernel_h * spec.kernel_w * 256;
    return 2 * slots;
}

// Shannon entropy of the empirical symbol distribution, in bits/symbol.
inline double empirical_entropy(const std::vector<std::int32_t>& words, int bits) {
    if (words.empty()) return 0.0;
    const std::uint32_t mask = (bits == 32) ? ~0u : ((1u << bits) - 1);
    std::map<std::uint32_t, std::uint64_t> counts;
    for (auto w : words) ++counts[std::uint32_t(w) & mask];
    const double n = static_cast<double>(words.size());
    double h = 0.0;
    for (const auto& [sym, c] : counts) {
        const double p = c / n;
        h -= p * std::log2(p);
    }
    return h;
}

} // namespace pssim::oracle
