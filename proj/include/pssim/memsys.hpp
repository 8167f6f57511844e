#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "pssim/errors.hpp"
#include "pssim/guard.hpp"
#include "pssim/layer.hpp"
#include "pssim/mapper.hpp"

namespace pssim {

// 64 x 2kB single-port SRAM macros arranged as 4 blocks of 16 banks.
struct MemoryConfig {
    static constexpr int banks_per_block = 16;
    static constexpr int blocks = 4;
    static constexpr int bank_bytes = 2048;
    static constexpr int word_bytes = 2;

    static constexpr int bank_words() { return bank_bytes / word_bytes; }
    static constexpr int block_bytes() { return banks_per_block * bank_bytes; }
    static constexpr int block_words() { return block_bytes() / word_bytes; }
    static constexpr int total_bytes() { return blocks * block_bytes(); }
    // guard memory holds 1 bit per data word
    static constexpr int guard_mem_bits() { return total_bytes() / word_bytes; }
};

enum class Requester : std::uint8_t { processor_a, processor_b, dma };

struct AccessRequest {
    Requester requester = Requester::processor_a;
    std::uint8_t block = 0;
    std::uint8_t bank = 0;
    bool write = false;
};

struct BankAddress {
    int block = 0;
    int bank = 0;
    std::uint64_t offset = 0; // word offset within the bank
};

// Per-layer placement of tensor streams onto memory blocks. Tensors larger
// than a block are registered as streaming windows that wrap; strict
// placements enforce block capacity. Transposed placements model the
// on-chip weight arrangement where the 16 filters of a fetch group sit in
// consecutive words.
class MemLayout {
public:
    void place(int tensor_id, std::uint64_t words, int block) {
        place_impl(tensor_id, words, block, /*strict=*/true, 0, 0);
    }

    void place_stream(int tensor_id, std::uint64_t words, int block) {
        place_impl(tensor_id, words, block, /*strict=*/false, 0, 0);
    }

    // Logical index f*taps + t maps to physical t*filters + f.
    void place_transposed_stream(int tensor_id, std::uint64_t filters,
                                 std::uint64_t taps, int block) {
        place_impl(tensor_id, filters * taps, block, /*strict=*/false, filters, taps);
    }

    BankAddress map(int tensor_id, std::uint64_t word_index) const {
        const auto it = entries_.find(tensor_id);
        if (it == entries_.end())
            throw CapacityError("tensor not placed: " + std::to_string(tensor_id));
        const Entry& e = it->second;
        if (word_index >= e.words)
            throw CapacityError("word index beyond tensor extent");
        std::uint64_t phys = word_index;
        if (e.filters) {
            const std::uint64_t f = word_index / e.taps;
            const std::uint64_t t = word_index % e.taps;
            phys = t * e.filters + f;
        }
        BankAddress a;
        a.block = e.block;
        a.bank = static_cast<int>(phys % MemoryConfig::banks_per_block);
        a.offset = (phys / MemoryConfig::banks_per_block) % MemoryConfig::bank_words();
        return a;
    }

    int block_of(int tensor_id) const {
        const auto it = entries_.find(tensor_id);
        if (it == entries_.end())
            throw CapacityError("tensor not placed: " + std::to_string(tensor_id));
        return it->second.block;
    }

private:
    struct Entry {
        std::uint64_t words = 0;
        int block = 0;
        std::uint64_t filters = 0; // nonzero: transposed layout
        std::uint64_t taps = 0;
    };

    void place_impl(int tensor_id, std::uint64_t words, int block, bool strict,
                    std::uint64_t filters, std::uint64_t taps) {
        if (block < 0 || block >= MemoryConfig::blocks)
            throw CapacityError("block index out of range");
        const std::uint64_t bytes = words * MemoryConfig::word_bytes;
        if (strict) {
            if (used_bytes_[block] + bytes > MemoryConfig::block_bytes())
                throw CapacityError("block " + std::to_string(block) +
                                    " over capacity: " +
                                    std::to_string(used_bytes_[block] + bytes) + " bytes");
            used_bytes_[block] += bytes;
        }
        entries_[tensor_id] = Entry{words, block, filters, taps};
    }

    std::map<int, Entry> entries_;
    std::array<std::uint64_t, MemoryConfig::blocks> used_bytes_{};
};

inline BankAddress map_address(int tensor_id, std::uint64_t word_index,
                               const MemLayout& layout) {
    return layout.map(tensor_id, word_index);
}

// Port arbitration for one cycle. The processor may touch two distinct
// blocks, the DMA a third; every bank is single-port. Conflicting requests
// serialize oldest-first, each extra round costing one stall cycle.
struct ArbitrationResult {
    std::vector<int> round_of; // round index per request, in input order
    std::uint32_t stall_cycles = 0;
};

inline ArbitrationResult arbitrate(const std::vector<AccessRequest>& requests) {
    ArbitrationResult res;
    res.round_of.assign(requests.size(), -1);
    std::size_t remaining = requests.size();
    int round = 0;
    while (remaining > 0) {
        std::uint32_t bank_used[MemoryConfig::blocks] = {0, 0, 0, 0};
        int proc_blocks[2] = {-1, -1};
        int dma_block = -1;
        for (std::size_t i = 0; i < requests.size(); ++i) {
            if (res.round_of[i] >= 0) continue;
            const AccessRequest& r = requests[i];
            if (bank_used[r.block] & (1u << r.bank)) continue;
            if (r.requester == Requester::dma) {
                if (dma_block >= 0 && dma_block != r.block) continue;
                if (r.block == proc_blocks[0] || r.block == proc_blocks[1]) continue;
                dma_block = r.block;
            } else {
                if (r.block == dma_block) continue;
                if (r.block != proc_blocks[0] && r.block != proc_blocks[1]) {
                    if (proc_blocks[0] < 0)
                        proc_blocks[0] = r.block;
                    else if (proc_blocks[1] < 0)
                        proc_blocks[1] = r.block;
                    else
                        continue; // processor already holds two blocks
                }
            }
            bank_used[r.block] |= 1u << r.bank;
            res.round_of[i] = round;
            --remaining;
        }
        ++round;
        if (round > static_cast<int>(requests.size()) + 1)
            throw SimError("arbiter failed to make progress");
    }
    res.stall_cycles = requests.empty() ? 0 : static_cast<std::uint32_t>(round - 1);
    return res;
}

// Access counts for a schedule walked against guard flags. Weight-word
// flag indices are the logical (filter-major) word addresses used by the
// schedule events.
struct MemStats {
    std::uint64_t sram_reads = 0;
    std::uint64_t reads_suppressed = 0;
    std::uint64_t guard_bits_read = 0;
    std::uint64_t stall_cycles = 0;
};

inline MemStats account_accesses(const Schedule& schedule, bool guarding,
                                 const GuardFlags& pixel_flags,
                                 const GuardFlags& weight_flags,
                                 int image_block = 0, int weight_block = 1) {
    MemStats ms;
    std::vector<AccessRequest> reqs;
    reqs.reserve(kArrayPixels + kArrayFilters);
    for (const auto& e : schedule.events) {
        reqs.clear();
        const int npx = e.charged_pixel_words();
        const std::uint32_t pbase = e.charged_pixel_base();
        for (int k = 0; k < npx; ++k) {
            if (guarding && !pixel_flags.test(pbase + k)) {
                ++ms.reads_suppressed;
                continue;
            }
            ++ms.sram_reads;
            reqs.push_back({Requester::processor_a,
                            static_cast<std::uint8_t>(image_block),
                            static_cast<std::uint8_t>((pbase + k) % MemoryConfig::banks_per_block),
                            false});
        }
        for (int j = 0; j < e.n_flt; ++j) {
            const std::uint64_t addr = e.wt_base + std::uint64_t(j) * e.wt_step;
            if (guarding && !weight_flags.test(addr)) {
                ++ms.reads_suppressed;
                continue;
            }
            ++ms.sram_reads;
            // transposed on-chip arrangement: group words sit in
            // consecutive banks
            reqs.push_back({Requester::processor_b,
                            static_cast<std::uint8_t>(weight_block),
                            static_cast<std::uint8_t>(j % MemoryConfig::banks_per_block),
                            false});
        }
        if (guarding)
            ms.guard_bits_read += kArrayPixels + kArrayFilters;
        ms.stall_cycles += arbitrate(reqs).stall_cycles;
    }
    return ms;
}

} // namespace pssim
