#pragma once

#include <array>
#include <cstdint>

#include "pssim/errors.hpp"
#include "pssim/guard.hpp"
#include "pssim/layer.hpp"
#include "pssim/mapper.hpp"
#include "pssim/memsys.hpp"
#include "pssim/quant.hpp"
#include "pssim/stats.hpp"

namespace pssim {

// Register file of the 16x16 MAC array. pixel_regs[0] holds the newest
// pixel; a shift moves pixel_regs[i] to pixel_regs[i+1]. Guard flag
// registers travel with the operand registers.
struct ArrayState {
    std::array<QValue, kArrayPixels> pixel_regs{};
    std::array<QValue, kArrayFilters> weight_regs{};
    std::array<std::array<Accumulator, kArrayFilters>, kArrayPixels> acc_grid{};
    std::array<bool, kArrayPixels> pixel_flags{};
    std::array<bool, kArrayFilters> weight_flags{};

    void clear_accumulators() {
        for (auto& row : acc_grid)
            for (auto& a : row) a.value = 0;
    }
};

struct CycleStats {
    std::uint32_t macs_executed = 0;
    std::uint32_t macs_guarded = 0;
    std::uint32_t pixel_words = 0;
    std::uint32_t weight_words = 0;
    std::uint32_t pixel_suppressed = 0;
    std::uint32_t weight_suppressed = 0;
    std::uint32_t flag_bits = 0;
};

// Operand tensors and their guard flags for one layer run.
struct StepContext {
    const QTensor& image;
    const QTensor& weights;
    const GuardFlags& pixel_flags;
    const GuardFlags& weight_flags;
};

// Execute one schedule event: load or shift operand registers, then fire
// the active MAC grid. With guarding enabled, a zero flag on either
// operand skips the MAC and zero-flagged word fetches are suppressed.
// Suppression saves accesses and switching, never cycles.
inline CycleStats step(ArrayState& state, const CycleEvent& e, bool guarding,
                       const StepContext& ctx) {
    CycleStats cs;
    const int n = e.n_pix;
    const int m = e.n_flt;

    // weight registers reload every cycle
    for (int j = 0; j < m; ++j) {
        const std::uint64_t addr = e.wt_base + std::uint64_t(j) * e.wt_step;
        state.weight_regs[j] = QValue{ctx.weights.data[addr], ctx.weights.bits,
                                      ctx.weights.exponent};
        state.weight_flags[j] = state.weight_regs[j].raw != 0;
    }
    cs.weight_words = m;

    // pixel registers: newest value sits at index 0, output i reads
    // index n-1-i
    const auto pixel_at = [&](int i) {
        return ctx.image.data[e.pix_base + std::uint64_t(i) * e.pix_step];
    };
    if (!e.shift) {
        for (int k = 0; k < n; ++k) {
            state.pixel_regs[k] = QValue{pixel_at(n - 1 - k), ctx.image.bits,
                                         ctx.image.exponent};
            state.pixel_flags[k] = state.pixel_regs[k].raw != 0;
        }
    } else {
        for (int k = kArrayPixels - 1; k > 0; --k) {
            state.pixel_regs[k] = state.pixel_regs[k - 1];
            state.pixel_flags[k] = state.pixel_flags[k - 1];
        }
        state.pixel_regs[0] = QValue{pixel_at(n - 1), ctx.image.bits,
                                     ctx.image.exponent};
        state.pixel_flags[0] = state.pixel_regs[0].raw != 0;
        if (e.pix_step > 1) {
            // strided addressing detail: middle registers restage from the
            // strided window while the fetch charge stays one word
            for (int k = 1; k < n; ++k) {
                state.pixel_regs[k] = QValue{pixel_at(n - 1 - k), ctx.image.bits,
                                             ctx.image.exponent};
                state.pixel_flags[k] = state.pixel_regs[k].raw != 0;
            }
        }
    }

    // charged word fetches and their guard suppression
    const int charged = e.charged_pixel_words();
    cs.pixel_words = charged;
    if (guarding) {
        const std::uint32_t pbase = e.charged_pixel_base();
        for (int k = 0; k < charged; ++k)
            if (!ctx.pixel_flags.test(pbase + k)) ++cs.pixel_suppressed;
        for (int j = 0; j < m; ++j)
            if (!ctx.weight_flags.test(e.wt_base + std::uint64_t(j) * e.wt_step))
                ++cs.weight_suppressed;
        cs.flag_bits = kArrayPixels + kArrayFilters;
    }

    for (int i = 0; i < n; ++i) {
        const QValue& px = state.pixel_regs[n - 1 - i];
        const bool px_live = state.pixel_flags[n - 1 - i];
        auto& acc_row = state.acc_grid[i];
        for (int j = 0; j < m; ++j) {
            if (guarding && (!px_live || !state.weight_flags[j])) {
                ++cs.macs_guarded;
                continue;
            }
            acc_row[j] = mac(acc_row[j], state.weight_regs[j], px);
            ++cs.macs_executed;
        }
    }
    return cs;
}

struct LayerResult {
    QTensor output;
    SimStats stats;
};

// Run one conv layer cycle by cycle. Output is bit-exact against the
// six-loop reference convolution; stats count every event the schedule
// charges, plus arbitration stalls.
inline LayerResult run_layer(const LayerSpec& spec, const QTensor& weights,
                             const QTensor& image, int image_block = 0,
                             int weight_block = 1, int dma_block = 2) {
    validate(spec);
    if (spec.kind != LayerKind::conv)
        throw ShapeError("run_layer expects a conv layer");
    if (image.dims.size() != 3 ||
        int(image.dims[0]) != spec.in_channels ||
        int(image.dims[1]) != spec.in_height ||
        int(image.dims[2]) != spec.in_width)
        throw ShapeError("image dims do not match layer spec");
    if (weights.dims.size() != 4 ||
        int(weights.dims[0]) != spec.num_filters ||
        int(weights.dims[1]) != spec.in_channels ||
        int(weights.dims[2]) != spec.kernel_h ||
        int(weights.dims[3]) != spec.kernel_w)
        throw ShapeError("weight dims do not match layer spec");
    if (image.bits != spec.image_bits || weights.bits != spec.weight_bits)
        throw RangeError("tensor widths do not match layer spec");
    check_accumulator_budget(spec);

    const int h_out = spec.out_height();
    const int w_out = spec.out_width();
    LayerResult res;
    res.output.dims = {std::uint32_t(spec.num_filters), std::uint32_t(h_out),
                       std::uint32_t(w_out)};
    res.output.bits = static_cast<std::uint8_t>(spec.out_bits);
    res.output.exponent = static_cast<std::int8_t>(spec.out_exponent);
    res.output.data.assign(res.output.size(), 0);

    const GuardFlags pixel_flags = spec.guarding ? compute_guard_flags(image) : GuardFlags{};
    const GuardFlags weight_flags = spec.guarding ? compute_guard_flags(weights) : GuardFlags{};
    const StepContext ctx{image, weights, pixel_flags, weight_flags};

    const TileMap tilemap = tile_layer(spec);
    const int in_exp_sum = spec.weight_exponent + spec.image_exponent;

    ArrayState state;
    SimStats& st = res.stats;
    std::uint64_t pending_writes = 0;
    std::uint64_t write_words = 0;

    std::vector<AccessRequest> reqs;
    reqs.reserve(kArrayPixels + kArrayFilters + 1);

    for (const auto& tile : tilemap.tiles) {
        if (tile.block_start) state.clear_accumulators();
        const Schedule ts = schedule_tile(spec, tile);
        for (const auto& e : ts.events) {
            const CycleStats cs = step(state, e, spec.guarding, ctx);
            st.cycles += 1;
            st.mac_slots_issued += kArraySlots;
            st.macs_active += std::uint64_t(e.n_pix) * e.n_flt;
            st.macs_executed += cs.macs_executed;
            st.macs_guarded += cs.macs_guarded;
            st.pixel_fetches += cs.pixel_words;
            st.weight_fetches += cs.weight_words;
            st.pixel_fetches_suppressed += cs.pixel_suppressed;
            st.weight_fetches_suppressed += cs.weight_suppressed;
            st.flag_bits_read += cs.flag_bits;

            // port arbitration for this cycle
            reqs.clear();
            const std::uint32_t pbase = e.charged_pixel_base();
            for (int k = 0; k < e.charged_pixel_words(); ++k) {
                if (spec.guarding && !pixel_flags.test(pbase + k)) continue;
                reqs.push_back({Requester::processor_a,
                                std::uint8_t(image_block),
                                std::uint8_t((pbase + k) % MemoryConfig::banks_per_block),
                                false});
            }
            for (int j = 0; j < e.n_flt; ++j) {
                if (spec.guarding &&
                    !weight_flags.test(e.wt_base + std::uint64_t(j) * e.wt_step))
                    continue;
                reqs.push_back({Requester::processor_b,
                                std::uint8_t(weight_block),
                                std::uint8_t(j % MemoryConfig::banks_per_block),
                                false});
            }
            if (pending_writes > 0) {
                reqs.push_back({Requester::dma, std::uint8_t(dma_block),
                                std::uint8_t(write_words % MemoryConfig::banks_per_block),
                                true});
                --pending_writes;
                ++write_words;
            }
            st.stall_cycles += arbitrate(reqs).stall_cycles;
        }
        if (tile.block_end) {
            const int y = tile.out_row;
            for (int i = 0; i < tile.ncols; ++i)
                for (int j = 0; j < tile.nfilters; ++j) {
                    const QValue q = requantize(state.acc_grid[i][j], spec.out_bits,
                                                spec.out_exponent, in_exp_sum);
                    res.output.data[(std::uint64_t(tile.f0 + j) * h_out + y) * w_out +
                                    tile.col0 + i] = q.raw;
                }
            const std::uint64_t words = std::uint64_t(tile.ncols) * tile.nfilters;
            st.sram_writes += words;
            pending_writes += words;
        }
    }
    st.sram_reads = st.pixel_fetches + st.weight_fetches -
                    st.pixel_fetches_suppressed - st.weight_fetches_suppressed;
    if (spec.guarding) st.flag_bits_written = res.output.data.size();
    st.useful_macs = std::uint64_t(h_out) * w_out * spec.num_filters *
                     spec.in_channels * spec.kernel_h * spec.kernel_w;
    return res;
}

} // namespace pssim
