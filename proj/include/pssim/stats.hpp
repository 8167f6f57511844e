#pragma once

#include <cstdint>

namespace pssim {

// Counters accumulated over a simulated layer (or network). All counts are
// exact; fetch counters are "charged" schedule events, with suppressed
// counts tracking guarded-away word fetches inside them.
struct SimStats {
    std::uint64_t cycles = 0;
    std::uint64_t stall_cycles = 0;
    std::uint64_t mac_slots_issued = 0;   // 256 per array cycle
    std::uint64_t macs_active = 0;        // slots with a mapped (pixel, filter)
    std::uint64_t macs_executed = 0;
    std::uint64_t macs_guarded = 0;
    std::uint64_t useful_macs = 0;        // dense layer MACs

    std::uint64_t pixel_fetches = 0;      // charged pixel words
    std::uint64_t weight_fetches = 0;     // charged weight words
    std::uint64_t pixel_fetches_suppressed = 0;
    std::uint64_t weight_fetches_suppressed = 0;

    std::uint64_t sram_reads = 0;         // word reads actually performed
    std::uint64_t sram_writes = 0;        // output words written back
    std::uint64_t flag_bits_read = 0;
    std::uint64_t flag_bits_written = 0;

    std::uint64_t dma_bytes_raw = 0;
    std::uint64_t dma_bytes_compressed = 0;

    double mac_efficiency() const {
        return mac_slots_issued ? static_cast<double>(useful_macs) /
                                      static_cast<double>(mac_slots_issued)
                                : 0.0;
    }

    SimStats& operator+=(const SimStats& o) {
        cycles += o.cycles;
        stall_cycles += o.stall_cycles;
        mac_slots_issued += o.mac_slots_issued;
        macs_active += o.macs_active;
        macs_executed += o.macs_executed;
        macs_guarded += o.macs_guarded;
        useful_macs += o.useful_macs;
        pixel_fetches += o.pixel_fetches;
        weight_fetches += o.weight_fetches;
        pixel_fetches_suppressed += o.pixel_fetches_suppressed;
        weight_fetches_suppressed += o.weight_fetches_suppressed;
        sram_reads += o.sram_reads;
        sram_writes += o.sram_writes;
        flag_bits_read += o.flag_bits_read;
        flag_bits_written += o.flag_bits_written;
        dma_bytes_raw += o.dma_bytes_raw;
        dma_bytes_compressed += o.dma_bytes_compressed;
        return *this;
    }
};

} // namespace pssim
