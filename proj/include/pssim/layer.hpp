#pragma once

#include <cstdint>
#include <string>

#include "pssim/errors.hpp"

namespace pssim {

enum class LayerKind { conv, maxpool, relu };

// One network layer as the scheduler sees it. For conv layers the kernel
// walks a (C, H, W) input with F filters of size (C, K_h, K_w); maxpool
// reuses kernel_h/w as the pooling window.
struct LayerSpec {
    LayerKind kind = LayerKind::conv;
    int in_channels = 1;   // C
    int in_height = 1;     // H
    int in_width = 1;      // W
    int num_filters = 1;   // F
    int kernel_h = 1;
    int kernel_w = 1;
    int stride_h = 1;      // horizontal, hardware supports 1-4
    int stride_v = 1;      // vertical, unbounded
    int weight_bits = 16;
    int image_bits = 16;
    int weight_exponent = 0;
    int image_exponent = 0;
    int out_bits = 16;
    int out_exponent = 0;
    bool guarding = false;
    double voltage = 1.1;       // volts, scalable domain
    double frequency = 204e6;   // hertz

    int out_height() const {
        return (in_height - kernel_h) / stride_v + 1;
    }
    int out_width() const {
        return (in_width - kernel_w) / stride_h + 1;
    }
};

inline void validate(const LayerSpec& s) {
    if (s.in_channels <= 0 || s.in_height <= 0 || s.in_width <= 0)
        throw ShapeError("layer input dims must be positive");
    if (s.kind == LayerKind::conv) {
        if (s.num_filters <= 0 || s.kernel_h <= 0 || s.kernel_w <= 0)
            throw ShapeError("conv layer filters/kernel must be positive");
        if (s.stride_h < 1 || s.stride_h > 4)
            throw ShapeError("horizontal stride must be in [1,4]");
        if (s.stride_v < 1)
            throw ShapeError("vertical stride must be at least 1");
        if (s.weight_bits < 1 || s.weight_bits > 16 ||
            s.image_bits < 1 || s.image_bits > 16 ||
            s.out_bits < 1 || s.out_bits > 16)
            throw RangeError("layer word widths must be in [1,16]");
        if (s.out_height() <= 0 || s.out_width() <= 0)
            throw ShapeError("conv layer has non-positive output dims");
    }
    if (s.kind == LayerKind::maxpool) {
        if (s.kernel_h <= 0 || s.kernel_w <= 0 || s.stride_h < 1 || s.stride_v < 1)
            throw ShapeError("pool window/stride must be positive");
        if (s.kernel_h > s.in_height || s.kernel_w > s.in_width)
            throw ShapeError("pool window exceeds input extent");
    }
}

} // namespace pssim
