#pragma once

// Non-ideality-aware weight encoding.
//
// Negative weights are stored as w + 2^p, positives unchanged, and a sign bit
// per weight lets the DIFF stage subtract N_tot * 2^p after the crossbar read.
// With p = k the scheme degenerates to ordinary two's complement.

#include <cstdint>
#include <span>
#include <vector>

#include "spikesim/hardware_config.hpp"

namespace spikesim {

struct EncodingInfo
{
    int p = 0;
    /// Zero bit-slices gained over two's complement at the same cell width.
    std::int64_t zero_count_gain = 0;
};

struct EncodedWeights
{
    std::vector<std::uint8_t> values; // unsigned, < 2^k
    std::vector<std::uint8_t> signs;  // 1 where the original weight is negative
    EncodingInfo info;
};

/// Smallest p with 2^p >= max |negative weight|, capped at k - 1.
/// A layer without negative weights gets p = 0.
inline int ni_aware_shift(std::span<const std::int8_t> weights, int k)
{
    int max_neg = 0;
    for (const auto w : weights)
    {
        if (w < 0)
        {
            max_neg = std::max(max_neg, -static_cast<int>(w));
        }
    }
    int p = 0;
    while ((1 << p) < max_neg)
    {
        ++p;
    }
    return std::min(p, k - 1);
}

/// Number of zero-valued b-bit slices over all cells of a k-bit tensor.
inline std::int64_t count_zero_slices(std::span<const std::uint8_t> values,
        int k, int bits_per_cell)
{
    const int slices = (k + bits_per_cell - 1) / bits_per_cell;
    const unsigned mask = (1U << bits_per_cell) - 1U;
    std::int64_t zeros = 0;
    for (const auto v : values)
    {
        for (int s = 0; s < slices; ++s)
        {
            zeros += ((v >> (s * bits_per_cell)) & mask) == 0 ? 1 : 0;
        }
    }
    return zeros;
}

inline std::uint8_t encode_weight(std::int8_t w, int p)
{
    return static_cast<std::uint8_t>(w < 0 ? w + (1 << p) : w);
}

inline int decode_weight(std::uint8_t value, std::uint8_t sign, int p)
{
    return sign != 0 ? static_cast<int>(value) - (1 << p) : static_cast<int>(value);
}

inline EncodedWeights encode_layer(std::span<const std::int8_t> weights, int k,
        WeightEncoding mode = WeightEncoding::ni_aware, int bits_per_cell = 1)
{
    EncodedWeights out;
    out.info.p = mode == WeightEncoding::ni_aware ? ni_aware_shift(weights, k) : k;
    out.values.reserve(weights.size());
    out.signs.reserve(weights.size());
    std::vector<std::uint8_t> twos;
    twos.reserve(weights.size());
    for (const auto w : weights)
    {
        out.values.push_back(encode_weight(w, out.info.p));
        out.signs.push_back(w < 0 ? 1 : 0);
        twos.push_back(encode_weight(w, k));
    }
    out.info.zero_count_gain = count_zero_slices(out.values, k, bits_per_cell) -
            count_zero_slices(twos, k, bits_per_cell);
    return out;
}

} // namespace spikesim
