#pragma once

// Raw tensor files (weights, dataset inputs, labels).
//
// Layout: a 16-byte little-endian header followed by one byte per element.
//
//   offset  size  field
//   0       4     magic "SPKT"
//   4       2     format version (1)
//   6       1     element type (0 = int8, 1 = uint8)
//   7       1     rank of the logical tensor (shape lives in the descriptor)
//   8       4     element count
//   12      4     reserved, must be zero

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "spikesim/error.hpp"

namespace spikesim {

enum class ElementType : std::uint8_t
{
    int8 = 0,
    uint8 = 1,
};

inline constexpr std::array<char, 4> tensor_magic{'S', 'P', 'K', 'T'};
inline constexpr std::uint16_t tensor_version = 1;
inline constexpr std::size_t tensor_header_size = 16;

struct RawTensor
{
    ElementType type = ElementType::int8;
    std::uint8_t rank = 1;
    std::vector<std::uint8_t> bytes;
};

namespace detail {

inline std::uint64_t get_le(const unsigned char *p, int n)
{
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
    {
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    }
    return v;
}

} // namespace detail

inline std::vector<char> encode_tensor(const RawTensor &t)
{
    if (t.bytes.size() > 0xffffffffULL)
    {
        throw Error("tensor too large for 32-bit element count");
    }
    std::vector<char> out(tensor_header_size + t.bytes.size());
    auto put = [&out](std::size_t at, std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i)
        {
            out[at + static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xffU);
        }
    };
    std::copy(tensor_magic.begin(), tensor_magic.end(), out.begin());
    put(4, tensor_version, 2);
    put(6, static_cast<std::uint8_t>(t.type), 1);
    put(7, t.rank, 1);
    put(8, t.bytes.size(), 4);
    put(12, 0, 4);
    std::copy(t.bytes.begin(), t.bytes.end(), out.begin() + tensor_header_size);
    return out;
}

inline void write_tensor(const std::filesystem::path &path, const RawTensor &t)
{
    const auto data = encode_tensor(t);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
    {
        throw Error("cannot write " + path.string());
    }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

inline RawTensor read_tensor(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw Error("cannot open " + path.string());
    }
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)),
            std::istreambuf_iterator<char>());
    if (data.size() < tensor_header_size)
    {
        throw Error("truncated tensor header in " + path.string());
    }
    for (std::size_t i = 0; i < tensor_magic.size(); ++i)
    {
        if (data[i] != static_cast<unsigned char>(tensor_magic[i]))
        {
            throw Error("bad tensor magic in " + path.string());
        }
    }
    if (detail::get_le(&data[4], 2) != tensor_version)
    {
        throw Error("unsupported tensor version in " + path.string());
    }
    const auto type = data[6];
    if (type > 1)
    {
        throw Error("unknown element type in " + path.string());
    }
    const auto count = detail::get_le(&data[8], 4);
    if (detail::get_le(&data[12], 4) != 0)
    {
        throw Error("nonzero reserved header field in " + path.string());
    }
    if (data.size() - tensor_header_size != count)
    {
        throw Error("element count mismatch in " + path.string());
    }
    RawTensor t;
    t.type = static_cast<ElementType>(type);
    t.rank = data[7];
    t.bytes.assign(data.begin() + tensor_header_size, data.end());
    return t;
}

inline RawTensor make_int8_tensor(std::span<const std::int8_t> values,
        std::uint8_t rank)
{
    RawTensor t{ElementType::int8, rank, {}};
    t.bytes.reserve(values.size());
    for (const auto v : values)
    {
        t.bytes.push_back(static_cast<std::uint8_t>(v));
    }
    return t;
}

inline std::vector<std::int8_t> as_int8(const RawTensor &t)
{
    std::vector<std::int8_t> out;
    out.reserve(t.bytes.size());
    for (const auto b : t.bytes)
    {
        out.push_back(static_cast<std::int8_t>(b));
    }
    return out;
}

} // namespace spikesim
