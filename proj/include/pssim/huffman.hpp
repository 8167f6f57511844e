#pragma once

// Canonical Huffman coding of tensor IO streams. One code table per
// transfer, carried in the stream header. Streams that would not shrink
// are emitted as stored (raw packed) payloads with an empty table.
//
// On-disk layout, little-endian:
//   magic "HUF1", u8 bits, u32 symbol count, u16 table-entry count,
//   (u16 symbol, u8 length) pairs, byte-aligned payload, MSB-first bits.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "pssim/errors.hpp"

namespace pssim {

struct HuffStream {
    std::uint8_t bits = 16;
    std::uint32_t count = 0; // symbols in the payload
    std::vector<std::pair<std::uint16_t, std::uint8_t>> table; // (symbol, code length)
    std::vector<std::uint8_t> payload;

    bool stored() const { return table.empty() && count > 0; }

    std::uint64_t header_bytes() const { return 11 + 3 * table.size(); }
    std::uint64_t compressed_bytes() const { return header_bytes() + payload.size(); }

    // payload bits actually used (excludes byte padding)
    std::uint64_t payload_bits = 0;
};

namespace huffdetail {

class BitWriter {
public:
    explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    void put(std::uint64_t code, int nbits) {
        for (int i = nbits - 1; i >= 0; --i) {
            cur_ = static_cast<std::uint8_t>((cur_ << 1) | ((code >> i) & 1));
            if (++fill_ == 8) {
                out_.push_back(cur_);
                cur_ = 0;
                fill_ = 0;
            }
        }
        bits_ += nbits;
    }

    void flush() {
        if (fill_ > 0) {
            out_.push_back(static_cast<std::uint8_t>(cur_ << (8 - fill_)));
            cur_ = 0;
            fill_ = 0;
        }
    }

    std::uint64_t bits_written() const { return bits_; }

private:
    std::vector<std::uint8_t>& out_;
    std::uint8_t cur_ = 0;
    int fill_ = 0;
    std::uint64_t bits_ = 0;
};

class BitReader {
public:
    BitReader(const std::uint8_t* data, std::size_t nbytes)
        : data_(data), nbytes_(nbytes) {}

    int next() {
        const std::size_t byte = pos_ >> 3;
        if (byte >= nbytes_) return -1;
        const int bit = (data_[byte] >> (7 - (pos_ & 7))) & 1;
        ++pos_;
        return bit;
    }

private:
    const std::uint8_t* data_;
    std::size_t nbytes_;
    std::size_t pos_ = 0;
};

// Huffman code lengths from symbol counts (two-queue method).
inline std::vector<int> code_lengths(const std::vector<std::uint64_t>& counts) {
    struct Node {
        std::uint64_t weight;
        int left, right; // -1 for leaves
        int symbol;
    };
    std::vector<int> order; // leaf node ids sorted by count
    std::vector<Node> nodes;
    for (std::size_t s = 0; s < counts.size(); ++s)
        if (counts[s] > 0) {
            order.push_back(static_cast<int>(nodes.size()));
            nodes.push_back({counts[s], -1, -1, static_cast<int>(s)});
        }
    std::vector<int> lengths(counts.size(), 0);
    if (nodes.empty()) return lengths;
    if (nodes.size() == 1) {
        lengths[nodes[0].symbol] = 1;
        return lengths;
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return nodes[a].weight < nodes[b].weight;
    });
    std::vector<int> merged;
    std::size_t li = 0, mi = 0;
    const auto take = [&]() {
        if (mi >= merged.size()) return order[li++];
        if (li >= order.size()) return merged[mi++];
        return nodes[order[li]].weight <= nodes[merged[mi]].weight ? order[li++]
                                                                   : merged[mi++];
    };
    while (order.size() - li + merged.size() - mi > 1) {
        const int a = take();
        const int b = take();
        merged.push_back(static_cast<int>(nodes.size()));
        nodes.push_back({nodes[a].weight + nodes[b].weight, a, b, -1});
    }
    // depth-first depth assignment, iterative to handle skewed trees
    std::vector<std::pair<int, int>> stack{{take(), 0}};
    while (!stack.empty()) {
        const auto [id, depth] = stack.back();
        stack.pop_back();
        const Node& nd = nodes[id];
        if (nd.left < 0) {
            lengths[nd.symbol] = depth;
        } else {
            stack.push_back({nd.left, depth + 1});
            stack.push_back({nd.right, depth + 1});
        }
    }
    return lengths;
}

struct CanonicalCode {
    // parallel arrays sorted by (length, symbol)
    std::vector<std::uint16_t> symbols;
    std::vector<std::uint8_t> lengths;
    std::vector<std::uint64_t> codes;
    int max_len = 0;
};

inline CanonicalCode canonicalize(
    const std::vector<std::pair<std::uint16_t, std::uint8_t>>& table) {
    CanonicalCode cc;
    std::vector<std::pair<std::uint16_t, std::uint8_t>> sorted = table;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    std::uint64_t code = 0;
    int prev_len = 0;
    for (const auto& [sym, len] : sorted) {
        if (len == 0 || len > 63)
            throw CorruptStream("invalid code length in table");
        code <<= (len - prev_len);
        cc.symbols.push_back(sym);
        cc.lengths.push_back(len);
        cc.codes.push_back(code);
        if (code >> len)
            throw CorruptStream("code table over-subscribed (Kraft violation)");
        ++code;
        prev_len = len;
    }
    cc.max_len = prev_len;
    return cc;
}

} // namespace huffdetail

inline std::int32_t sign_extend_word(std::uint32_t pattern, int bits) {
    if (bits == 1 || bits >= 32) return static_cast<std::int32_t>(pattern);
    const std::uint32_t sign = 1u << (bits - 1);
    return static_cast<std::int32_t>((pattern ^ sign)) - static_cast<std::int32_t>(sign);
}

inline std::uint64_t packed_raw_bytes(std::uint64_t nwords, int bits) {
    return (nwords * bits + 7) / 8;
}

inline HuffStream huff_encode(const std::vector<std::int32_t>& words, int bits) {
    if (bits < 1 || bits > 16)
        throw RangeError("huff_encode: bits out of [1,16]");
    const std::uint32_t mask = (1u << bits) - 1;

    HuffStream hs;
    hs.bits = static_cast<std::uint8_t>(bits);
    hs.count = static_cast<std::uint32_t>(words.size());
    if (words.empty()) return hs;

    std::vector<std::uint64_t> counts(std::size_t(1) << bits, 0);
    for (auto w : words) ++counts[std::uint32_t(w) & mask];

    const std::vector<int> lengths = huffdetail::code_lengths(counts);
    for (std::size_t s = 0; s < lengths.size(); ++s)
        if (lengths[s] > 0)
            hs.table.push_back({static_cast<std::uint16_t>(s),
                                static_cast<std::uint8_t>(lengths[s])});

    const huffdetail::CanonicalCode cc = huffdetail::canonicalize(hs.table);
    std::unordered_map<std::uint32_t, std::pair<std::uint64_t, int>> codebook;
    for (std::size_t i = 0; i < cc.symbols.size(); ++i)
        codebook[cc.symbols[i]] = {cc.codes[i], cc.lengths[i]};

    huffdetail::BitWriter bw(hs.payload);
    for (auto w : words) {
        const auto& [code, len] = codebook[std::uint32_t(w) & mask];
        bw.put(code, len);
    }
    bw.flush();
    hs.payload_bits = bw.bits_written();

    // fall back to a stored payload when coding does not pay (or when the
    // table would overflow its u16 entry count)
    const std::uint64_t stored_total = 11 + packed_raw_bytes(words.size(), bits);
    if (hs.compressed_bytes() >= stored_total || hs.table.size() > 0xFFFF) {
        hs.table.clear();
        hs.payload.clear();
        huffdetail::BitWriter raw(hs.payload);
        for (auto w : words) raw.put(std::uint32_t(w) & mask, bits);
        raw.flush();
        hs.payload_bits = raw.bits_written();
    }
    return hs;
}

inline std::vector<std::int32_t> huff_decode(const HuffStream& hs) {
    std::vector<std::int32_t> out;
    if (hs.count == 0) return out;
    if (hs.bits < 1 || hs.bits > 16)
        throw CorruptStream("huff_decode: bad word width");
    // every symbol costs at least one payload bit (hs.bits when stored)
    const std::uint64_t min_bits =
        std::uint64_t(hs.count) * (hs.stored() ? hs.bits : 1);
    if (min_bits > std::uint64_t(hs.payload.size()) * 8)
        throw CorruptStream("payload too short for the declared symbol count");
    out.reserve(hs.count);

    huffdetail::BitReader br(hs.payload.data(), hs.payload.size());
    if (hs.stored()) {
        for (std::uint32_t i = 0; i < hs.count; ++i) {
            std::uint32_t pattern = 0;
            for (int b = 0; b < hs.bits; ++b) {
                const int bit = br.next();
                if (bit < 0) throw CorruptStream("stored payload truncated");
                pattern = (pattern << 1) | std::uint32_t(bit);
            }
            out.push_back(sign_extend_word(pattern, hs.bits));
        }
        return out;
    }

    const huffdetail::CanonicalCode cc = huffdetail::canonicalize(hs.table);
    // Kraft sum must not exceed 1
    unsigned __int128 kraft = 0; // in units of 2^-63
    for (auto len : cc.lengths) kraft += std::uint64_t(1) << (63 - len);
    if (kraft > ((unsigned __int128)1 << 63))
        throw CorruptStream("code table violates the Kraft inequality");

    // first code and symbol offset per length
    std::vector<std::uint64_t> first(cc.max_len + 1, 0);
    std::vector<std::uint32_t> offset(cc.max_len + 1, 0);
    std::vector<std::uint32_t> num(cc.max_len + 1, 0);
    for (std::size_t i = 0; i < cc.lengths.size(); ++i) {
        if (num[cc.lengths[i]] == 0) {
            first[cc.lengths[i]] = cc.codes[i];
            offset[cc.lengths[i]] = static_cast<std::uint32_t>(i);
        }
        ++num[cc.lengths[i]];
    }

    for (std::uint32_t i = 0; i < hs.count; ++i) {
        std::uint64_t code = 0;
        int len = 0;
        for (;;) {
            const int bit = br.next();
            if (bit < 0) throw CorruptStream("payload truncated mid-symbol");
            code = (code << 1) | std::uint64_t(bit);
            ++len;
            if (len > cc.max_len)
                throw CorruptStream("invalid prefix in payload");
            if (num[len] && code >= first[len] &&
                code < first[len] + num[len]) {
                out.push_back(sign_extend_word(
                    cc.symbols[offset[len] + std::uint32_t(code - first[len])], hs.bits));
                break;
            }
        }
    }
    return out;
}

struct CompressionReport {
    std::vector<double> per_stream;
    double overall = 0.0;
};

// Ratios on total bytes including headers.
inline CompressionReport compression_report(const std::vector<std::uint64_t>& raw_bytes,
                                            const std::vector<HuffStream>& streams) {
    if (raw_bytes.size() != streams.size())
        throw RangeError("compression_report: stream count mismatch");
    CompressionReport rep;
    std::uint64_t raw_total = 0, comp_total = 0;
    for (std::size_t i = 0; i < streams.size(); ++i) {
        const std::uint64_t c = streams[i].compressed_bytes();
        rep.per_stream.push_back(c ? double(raw_bytes[i]) / double(c) : 0.0);
        raw_total += raw_bytes[i];
        comp_total += c;
    }
    rep.overall = comp_total ? double(raw_total) / double(comp_total) : 0.0;
    return rep;
}

inline void write_huf(std::ostream& os, const HuffStream& hs) {
    os.write("HUF1", 4);
    os.put(char(hs.bits));
    const std::uint32_t n = hs.count;
    const char nb[4] = {char(n & 0xff), char((n >> 8) & 0xff),
                        char((n >> 16) & 0xff), char((n >> 24) & 0xff)};
    os.write(nb, 4);
    const std::uint16_t tn = static_cast<std::uint16_t>(hs.table.size());
    const char tb[2] = {char(tn & 0xff), char((tn >> 8) & 0xff)};
    os.write(tb, 2);
    for (const auto& [sym, len] : hs.table) {
        const char sb[3] = {char(sym & 0xff), char((sym >> 8) & 0xff), char(len)};
        os.write(sb, 3);
    }
    os.write(reinterpret_cast<const char*>(hs.payload.data()),
             static_cast<std::streamsize>(hs.payload.size()));
}

inline void write_huf(const std::string& path, const HuffStream& hs) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    write_huf(os, hs);
    if (!os) throw IoError("write failed: " + path);
}

inline HuffStream read_huf(std::istream& is) {
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "HUF1")
        throw CorruptStream("not a HUF1 stream");
    HuffStream hs;
    hs.bits = static_cast<std::uint8_t>(is.get());
    unsigned char nb[4];
    is.read(reinterpret_cast<char*>(nb), 4);
    hs.count = std::uint32_t(nb[0]) | (std::uint32_t(nb[1]) << 8) |
               (std::uint32_t(nb[2]) << 16) | (std::uint32_t(nb[3]) << 24);
    unsigned char tb[2];
    is.read(reinterpret_cast<char*>(tb), 2);
    if (!is) throw CorruptStream("truncated HUF1 header");
    const std::uint16_t tn = static_cast<std::uint16_t>(tb[0] | (tb[1] << 8));
    hs.table.resize(tn);
    for (auto& [sym, len] : hs.table) {
        unsigned char sb[3];
        is.read(reinterpret_cast<char*>(sb), 3);
        if (!is) throw CorruptStream("truncated HUF1 table");
        sym = static_cast<std::uint16_t>(sb[0] | (sb[1] << 8));
        len = sb[2];
    }
    hs.payload.assign(std::istreambuf_iterator<char>(is),
                      std::istreambuf_iterator<char>());
    return hs;
}

inline HuffStream read_huf(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    return read_huf(is);
}

} // namespace pssim
