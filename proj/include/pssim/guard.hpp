#pragma once

#include <cstdint>
#include <vector>

#include "pssim/quant.hpp"

namespace pssim {

// One bit per tensor word, set when the word is nonzero. Populated when a
// layer's data is produced and read back to suppress fetches and MACs.
class GuardFlags {
public:
    GuardFlags() = default;
    explicit GuardFlags(std::size_t n) : size_(n), bits_((n + 63) / 64, 0) {}

    std::size_t size() const { return size_; }

    bool test(std::size_t i) const {
        return (bits_[i >> 6] >> (i & 63)) & 1;
    }

    void set(std::size_t i, bool nonzero) {
        if (nonzero)
            bits_[i >> 6] |= std::uint64_t{1} << (i & 63);
        else
            bits_[i >> 6] &= ~(std::uint64_t{1} << (i & 63));
    }

    std::size_t nonzero_count() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < size_; ++i) n += test(i);
        return n;
    }

    double zero_fraction() const {
        if (size_ == 0) return 0.0;
        return 1.0 - static_cast<double>(nonzero_count()) / static_cast<double>(size_);
    }

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> bits_;
};

inline GuardFlags compute_guard_flags(const QTensor& t) {
    GuardFlags f(t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i)
        f.set(i, t.data[i] != 0);
    return f;
}

} // namespace pssim
