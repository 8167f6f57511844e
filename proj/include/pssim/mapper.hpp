#pragma once

#include <cstdint>
#include <vector>

#include "pssim/errors.hpp"
#include "pssim/layer.hpp"
#include "pssim/stats.hpp"

namespace pssim {

// Array geometry: 16 output pixels x 16 filters per cycle.
inline constexpr int kArrayPixels = 16;
inline constexpr int kArrayFilters = 16;
inline constexpr int kArraySlots = kArrayPixels * kArrayFilters;

// One tile: a (row, 16-wide output-column span, 16-wide filter span)
// block for a single input channel. All channels of a block are scheduled
// back to back so partial sums stay resident in the accumulator grid.
struct Tile {
    int out_row = 0;
    int col0 = 0;
    int ncols = 0;     // <= 16, edge tiles shorter
    int f0 = 0;
    int nfilters = 0;  // <= 16
    int channel = 0;
    bool block_start = false; // first channel: clear accumulators
    bool block_end = false;   // last channel: write outputs back
};

struct TileMap {
    std::vector<Tile> tiles;
};

// One array cycle. Pixel register values for output i live at
// pix_base + i*pix_step; charged fetch addresses are the consecutive
// n-word segment at pix_base on a row start, or the single newest word
// (pix_base + (n-1)*pix_step) on a shift cycle. Weight word j lives at
// wt_base + j*wt_step.
struct CycleEvent {
    std::uint32_t pix_base = 0;
    std::uint32_t wt_base = 0;
    std::uint32_t wt_step = 0;
    std::uint16_t pix_step = 1;
    std::uint8_t n_pix = 0;  // active output pixels this cycle
    std::uint8_t n_flt = 0;  // active filters this cycle
    bool shift = false;      // false: row-start 16-word fetch; true: 1-word shift

    int charged_pixel_words() const { return shift ? 1 : n_pix; }
    std::uint32_t charged_pixel_base() const {
        return shift ? pix_base + std::uint32_t(n_pix - 1) * pix_step : pix_base;
    }
};

struct Schedule {
    std::vector<CycleEvent> events;
};

struct LayerSchedule {
    TileMap tilemap;
    Schedule schedule;  // events for all tiles, kernel_h*kernel_w per tile
    SimStats predicted;
};

// Worst-case accumulation magnitude must stay inside the 48-bit register:
// C * K_h * K_w * 2^(wb-1) * 2^(ib-1) < 2^47.
inline void check_accumulator_budget(const LayerSpec& spec) {
    const unsigned __int128 terms =
        (unsigned __int128)spec.in_channels * spec.kernel_h * spec.kernel_w;
    const unsigned __int128 bound =
        terms << ((spec.weight_bits - 1) + (spec.image_bits - 1));
    if (bound >= ((unsigned __int128)1 << 47)) {
        throw AccumulatorBudgetError(
            "accumulation bound 2^" + std::to_string(spec.weight_bits + spec.image_bits - 2) +
            " x " + std::to_string(std::uint64_t(terms)) + " terms reaches the 48-bit limit");
    }
}

inline TileMap tile_layer(const LayerSpec& spec) {
    if (spec.kind != LayerKind::conv)
        throw ShapeError("tile_layer expects a conv layer");
    validate(spec);

    const int w_out = spec.out_width();
    const int h_out = spec.out_height();
    const int col_spans = (w_out + kArrayPixels - 1) / kArrayPixels;
    const int filter_spans = (spec.num_filters + kArrayFilters - 1) / kArrayFilters;

    TileMap map;
    map.tiles.reserve(std::size_t(col_spans) * h_out * filter_spans * spec.in_channels);
    for (int fs = 0; fs < filter_spans; ++fs) {
        const int f0 = fs * kArrayFilters;
        const int m = std::min(kArrayFilters, spec.num_filters - f0);
        for (int r = 0; r < h_out; ++r) {
            for (int cs = 0; cs < col_spans; ++cs) {
                const int col0 = cs * kArrayPixels;
                const int n = std::min(kArrayPixels, w_out - col0);
                for (int c = 0; c < spec.in_channels; ++c) {
                    Tile t;
                    t.out_row = r;
                    t.col0 = col0;
                    t.ncols = n;
                    t.f0 = f0;
                    t.nfilters = m;
                    t.channel = c;
                    t.block_start = (c == 0);
                    t.block_end = (c == spec.in_channels - 1);
                    map.tiles.push_back(t);
                }
            }
        }
    }
    return map;
}

// K_h kernel rows, each one 16-pixel row-start cycle plus K_w-1
// single-pixel shift cycles; 16 filter words arrive every cycle.
inline Schedule schedule_tile(const LayerSpec& spec, const Tile& tile) {
    Schedule s;
    s.events.reserve(std::size_t(spec.kernel_h) * spec.kernel_w);
    const std::uint64_t wt_step = std::uint64_t(spec.in_channels) * spec.kernel_h * spec.kernel_w;
    for (int kr = 0; kr < spec.kernel_h; ++kr) {
        const int y = tile.out_row * spec.stride_v + kr;
        const std::uint64_t row_base =
            (std::uint64_t(tile.channel) * spec.in_height + y) * spec.in_width;
        const std::uint64_t wt_row =
            (std::uint64_t(tile.f0) * spec.in_channels + tile.channel) *
                (std::uint64_t(spec.kernel_h) * spec.kernel_w) +
            std::uint64_t(kr) * spec.kernel_w;
        for (int kc = 0; kc < spec.kernel_w; ++kc) {
            CycleEvent e;
            e.pix_base = static_cast<std::uint32_t>(row_base + std::uint64_t(tile.col0) * spec.stride_h + kc);
            e.pix_step = static_cast<std::uint16_t>(spec.stride_h);
            e.n_pix = static_cast<std::uint8_t>(tile.ncols);
            e.n_flt = static_cast<std::uint8_t>(tile.nfilters);
            e.wt_base = static_cast<std::uint32_t>(wt_row + kc);
            e.wt_step = static_cast<std::uint32_t>(wt_step);
            e.shift = (kc != 0);
            s.events.push_back(e);
        }
    }
    return s;
}

namespace detail {

inline void add_predicted_tile(SimStats& st, const LayerSpec& spec, const Tile& t) {
    const std::uint64_t cyc = std::uint64_t(spec.kernel_h) * spec.kernel_w;
    st.cycles += cyc;
    st.mac_slots_issued += cyc * kArraySlots;
    st.macs_active += cyc * std::uint64_t(t.ncols) * t.nfilters;
    st.pixel_fetches += std::uint64_t(spec.kernel_h) * (std::uint64_t(t.ncols) + (spec.kernel_w - 1));
    st.weight_fetches += cyc * t.nfilters;
}

} // namespace detail

// Closed-form per-layer counts; exact for any geometry.
inline SimStats predict_layer_stats(const LayerSpec& spec, const TileMap& map) {
    SimStats st;
    for (const auto& t : map.tiles) detail::add_predicted_tile(st, spec, t);
    st.useful_macs = std::uint64_t(spec.out_height()) * spec.out_width() *
                     spec.num_filters * spec.in_channels * spec.kernel_h * spec.kernel_w;
    return st;
}

inline LayerSchedule schedule_layer(const LayerSpec& spec) {
    check_accumulator_budget(spec);
    LayerSchedule ls;
    ls.tilemap = tile_layer(spec);
    ls.predicted = predict_layer_stats(spec, ls.tilemap);
    ls.schedule.events.reserve(ls.predicted.cycles);
    for (const auto& t : ls.tilemap.tiles) {
        Schedule ts = schedule_tile(spec, t);
        ls.schedule.events.insert(ls.schedule.events.end(), ts.events.begin(), ts.events.end());
    }
    return ls;
}

// Operand-fetch reduction against a 1D-SIMD baseline that refetches both
// operands for every MAC issue slot.
struct FetchReduction {
    double combined = 0.0;
    double pixels_only = 0.0;
    double weights_only = 0.0;
};

inline FetchReduction fetch_reduction_vs_1d(const LayerSpec& spec) {
    const TileMap map = tile_layer(spec);
    const SimStats st = predict_layer_stats(spec, map);
    const double naive_each = static_cast<double>(st.mac_slots_issued);
    FetchReduction r;
    r.pixels_only = naive_each / static_cast<double>(st.pixel_fetches);
    r.weights_only = naive_each / static_cast<double>(st.weight_fetches);
    r.combined = 2.0 * naive_each /
                 static_cast<double>(st.pixel_fetches + st.weight_fetches);
    return r;
}

} // namespace pssim
