#pragma once

// QTSR binary tensor file format, little-endian:
//   magic "QTSR", version u16, bits u8, exponent i8, ndims u8, dims u32 each,
//   payload: one i16 word per element regardless of declared width.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "pssim/errors.hpp"
#include "pssim/quant.hpp"

namespace pssim {

namespace detail {

inline void put_u16(std::ostream& os, std::uint16_t v) {
    const char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
    os.write(b, 2);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
    const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff),
                       char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    os.write(b, 4);
}

inline std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

} // namespace detail

inline constexpr std::uint16_t kQtsrVersion = 1;

inline void write_qtsr(std::ostream& os, const QTensor& t) {
    validate(t);
    os.write("QTSR", 4);
    detail::put_u16(os, kQtsrVersion);
    os.put(char(t.bits));
    os.put(char(t.exponent));
    os.put(char(t.dims.size()));
    for (auto d : t.dims) detail::put_u32(os, d);
    for (auto v : t.data) detail::put_u16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
}

inline void write_qtsr(const std::string& path, const QTensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    write_qtsr(os, t);
    if (!os) throw IoError("write failed: " + path);
}

inline QTensor read_qtsr(std::istream& is) {
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "QTSR")
        throw ParseError("not a QTSR tensor file");
    const std::uint16_t version = detail::get_u16(is);
    if (version != kQtsrVersion)
        throw ParseError("unsupported QTSR version " + std::to_string(version));
    QTensor t;
    t.bits = static_cast<std::uint8_t>(is.get());
    t.exponent = static_cast<std::int8_t>(static_cast<char>(is.get()));
    const int ndims = is.get();
    if (!is || ndims <= 0 || ndims > 8)
        throw ParseError("bad QTSR dimension count");
    t.dims.resize(ndims);
    for (auto& d : t.dims) d = detail::get_u32(is);
    t.data.resize(t.size());
    for (auto& v : t.data)
        v = static_cast<std::int16_t>(detail::get_u16(is));
    if (!is) throw ParseError("truncated QTSR payload");
    validate(t);
    return t;
}

inline QTensor read_qtsr(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    return read_qtsr(is);
}

} // namespace pssim
