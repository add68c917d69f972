#pragma once

// Binary particle message format, used on every hop of the simulated
// network (including in-process ones) so serialization is always exercised.
//
//   magic "FWBA" | version u16 | round u32 | client_id u32 | n u32 | m u32
//   payload: n*m little-endian f32, row-major
//   trailer: u64 FNV-1a checksum of the payload bytes
//
// 32-bit floats on the wire, widened to 64-bit internally. Server
// broadcasts carry client_id 0xFFFFFFFF.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedwba/numerics.hpp"

namespace fedwba {

inline constexpr std::uint16_t kWireVersion = 1;
inline constexpr std::uint32_t kBroadcastClientId = 0xFFFFFFFFu;
inline constexpr std::size_t kWireHeaderBytes = 4 + 2 + 4 + 4 + 4 + 4;

struct ParticleMsg {
    std::uint32_t round = 0;
    std::uint32_t client_id = kBroadcastClientId;
    Matrix particles;
};

inline std::size_t message_size(std::size_t n, std::size_t m) {
    return kWireHeaderBytes + 4 * n * m + 8;
}

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint16_t>(b[off] | (std::uint16_t(b[off + 1]) << 8));
}
inline std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[off + std::size_t(i)]) << (8 * i);
    return v;
}
inline std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t off) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[off + std::size_t(i)]) << (8 * i);
    return v;
}

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint32_t f32_bits(float f) {
    std::uint32_t u;
    static_assert(sizeof(float) == 4);
    __builtin_memcpy(&u, &f, 4);
    return u;
}
inline float bits_f32(std::uint32_t u) {
    float f;
    __builtin_memcpy(&f, &u, 4);
    return f;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_message(const ParticleMsg& msg) {
    std::vector<std::uint8_t> out;
    out.reserve(message_size(msg.particles.rows, msg.particles.cols));
    out.push_back('F');
    out.push_back('W');
    out.push_back('B');
    out.push_back('A');
    detail::put_u16(out, kWireVersion);
    detail::put_u32(out, msg.round);
    detail::put_u32(out, msg.client_id);
    detail::put_u32(out, static_cast<std::uint32_t>(msg.particles.rows));
    detail::put_u32(out, static_cast<std::uint32_t>(msg.particles.cols));
    const std::size_t payload_start = out.size();
    for (double v : msg.particles.data)
        detail::put_u32(out, detail::f32_bits(static_cast<float>(v)));
    const std::uint64_t sum = detail::fnv1a64(
        std::span<const std::uint8_t>(out.data() + payload_start, out.size() - payload_start));
    detail::put_u64(out, sum);
    return out;
}

inline ParticleMsg decode_message(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kWireHeaderBytes + 8)
        throw std::runtime_error("decode_message: message truncated (" +
                                 std::to_string(bytes.size()) + " bytes)");
    if (!(bytes[0] == 'F' && bytes[1] == 'W' && bytes[2] == 'B' && bytes[3] == 'A'))
        throw std::runtime_error("decode_message: bad magic at offset 0");
    const std::uint16_t version = detail::get_u16(bytes, 4);
    if (version != kWireVersion)
        throw std::runtime_error("decode_message: unsupported version " +
                                 std::to_string(version));
    ParticleMsg msg;
    msg.round = detail::get_u32(bytes, 6);
    msg.client_id = detail::get_u32(bytes, 10);
    const std::uint32_t n = detail::get_u32(bytes, 14);
    const std::uint32_t m = detail::get_u32(bytes, 18);
    if (bytes.size() != message_size(n, m))
        throw std::runtime_error("decode_message: size mismatch, expected " +
                                 std::to_string(message_size(n, m)) + " got " +
                                 std::to_string(bytes.size()));
    const std::size_t payload = kWireHeaderBytes;
    const std::size_t payload_len = 4 * std::size_t(n) * m;
    const std::uint64_t stored = detail::get_u64(bytes, payload + payload_len);
    const std::uint64_t actual = detail::fnv1a64(bytes.subspan(payload, payload_len));
    if (stored != actual)
        throw std::runtime_error("decode_message: checksum mismatch at offset " +
                                 std::to_string(payload + payload_len));
    msg.particles = Matrix(n, m);
    for (std::size_t t = 0; t < std::size_t(n) * m; ++t)
        msg.particles.data[t] =
            static_cast<double>(detail::bits_f32(detail::get_u32(bytes, payload + 4 * t)));
    return msg;
}

inline void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary);
    require(static_cast<bool>(f), "write_bytes: cannot open " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    require(static_cast<bool>(f), "read_bytes: cannot open " + path);
    const auto size = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(size));
    f.read(reinterpret_cast<char*>(out.data()), size);
    return out;
}

}  // namespace fedwba
