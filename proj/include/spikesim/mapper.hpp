#pragma once

// Partitioning of conv/linear weight tensors onto X x X crossbars, PEs and
// tiles.
//
// Input channels (M) run down crossbar rows, output channels (N) across
// columns, and every kernel position (d x d) gets its own crossbar. The k/b
// bit-slices of a weight sit in adjacent columns; column c of a crossbar holds
// slice (c % S) of output channel (channel_begin + c / S), S = k/b.

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "spikesim/encoding.hpp"
#include "spikesim/error.hpp"
#include "spikesim/hardware_config.hpp"
#include "spikesim/model.hpp"

namespace spikesim {

struct TileCoord
{
    int tile = 0;
    int pe = 0;       // within the tile
    int crossbar = 0; // within the PE

    friend bool operator==(const TileCoord &, const TileCoord &) = default;
};

struct CrossbarSlice
{
    std::size_t layer = 0; // index into ModelBundle::layers
    int kernel_row = 0;
    int kernel_col = 0;
    int row_begin = 0;     // first input channel on row 0
    int channel_begin = 0; // first output channel on column 0
    int valid_rows = 0;
    int valid_cols = 0;
    int bit_slices = 1;    // S = k/b columns per output channel
    int shift_p = 0;       // encoding exponent of the owning layer
    TileCoord coord;
    std::vector<std::uint8_t> encoded;   // X*X row-major, digits in [0, 2^b-1]
    std::vector<std::uint8_t> sign_bits; // X*X row-major
    std::vector<double> conductances;    // X*X row-major, siemens
    std::vector<double> transfer;        // X*X row-major, sense amps per input volt

    [[nodiscard]] int valid_channels() const { return valid_cols / bit_slices; }
};

struct LayerPlan
{
    std::size_t layer = 0;
    int bit_slices = 1;
    int channels_per_crossbar = 0;
    int row_blocks = 0;
    int col_blocks = 0;
    int kernel_positions = 0;
    std::int64_t crossbars = 0;
    std::int64_t pes = 0; // PE_i
    std::int64_t par = 0; // Par_i
    std::int64_t tiles = 0;
    std::int64_t first_tile = 0;
    std::int64_t ops_per_channel = 0; // N_ops,i
    EncodingInfo encoding;
    std::size_t first_slice = 0; // into MappedNetwork::slices
};

struct MappedNetwork
{
    int crossbar_size = 0;
    std::vector<LayerPlan> plans; // one per conv/linear layer, in order
    std::vector<CrossbarSlice> slices;
    std::int64_t total_tiles = 0;
    bool materialized = false;

    [[nodiscard]] std::vector<std::int64_t> pe_counts() const
    {
        std::vector<std::int64_t> out;
        for (const auto &p : plans) out.push_back(p.pes);
        return out;
    }

    [[nodiscard]] std::vector<std::int64_t> par_counts() const
    {
        std::vector<std::int64_t> out;
        for (const auto &p : plans) out.push_back(p.par);
        return out;
    }

    [[nodiscard]] const LayerPlan &plan_for_layer(std::size_t layer) const
    {
        for (const auto &p : plans)
        {
            if (p.layer == layer)
            {
                return p;
            }
        }
        throw Error("layer has no crossbar mapping", layer);
    }
};

/// N_ops,i: output positions per channel for conv layers, 1 for linear.
inline std::int64_t ops_per_output_channel(const LayerSpec &layer)
{
    if (layer.kind == LayerKind::linear)
    {
        return 1;
    }
    const std::int64_t od = layer.output_dim();
    return od * od;
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b)
{
    return (a + b - 1) / b;
}

struct MapOptions
{
    /// When false only the layout counts are computed (no per-cell data).
    bool materialize = true;
};

inline MappedNetwork map_network(const ModelBundle &model,
        const HardwareConfig &hw, MapOptions options = {})
{
    const int x = hw.crossbar_size;
    const int b = hw.bits_per_cell;
    if (model.weight_bits % b != 0)
    {
        throw Error("bits per cell must divide the weight bit width");
    }
    const int s = model.weight_bits / b;
    const unsigned digit_mask = (1U << b) - 1U;

    MappedNetwork net;
    net.crossbar_size = x;
    net.materialized = options.materialize;
    std::int64_t next_tile = 0;
    for (std::size_t li = 0; li < model.layers.size(); ++li)
    {
        const auto &l = model.layers[li];
        if (!l.is_compute())
        {
            continue;
        }
        if (s > x)
        {
            throw Error("layer needs " + std::to_string(s) +
                            " columns per output channel but a crossbar has " +
                            std::to_string(x) + " (deficit " +
                            std::to_string(s - x) + ")",
                    li);
        }
        LayerPlan plan;
        plan.layer = li;
        plan.bit_slices = s;
        plan.channels_per_crossbar = x / s;
        plan.row_blocks = static_cast<int>(ceil_div(l.in_channels, x));
        plan.col_blocks = static_cast<int>(ceil_div(l.out_channels, plan.channels_per_crossbar));
        plan.kernel_positions = l.kernel_size * l.kernel_size;
        plan.crossbars = std::int64_t{plan.row_blocks} * plan.col_blocks *
                plan.kernel_positions;
        plan.pes = ceil_div(plan.crossbars, hw.crossbars_per_pe);
        plan.par = plan.pes <= hw.pes_per_tile ? hw.pes_per_tile / plan.pes : 1;
        plan.tiles = ceil_div(plan.pes, hw.pes_per_tile);
        plan.first_tile = next_tile;
        plan.ops_per_channel = ops_per_output_channel(l);
        next_tile += plan.tiles;

        EncodedWeights enc;
        if (options.materialize)
        {
            enc = encode_layer(model.weights[li], model.weight_bits, hw.encoding, b);
        }
        else
        {
            enc.info.p = hw.encoding == WeightEncoding::ni_aware
                    ? ni_aware_shift(model.weights[li], model.weight_bits)
                    : model.weight_bits;
        }
        plan.encoding = enc.info;
        plan.first_slice = net.slices.size();

        std::int64_t g = 0;
        for (int rb = 0; rb < plan.row_blocks; ++rb)
        {
            for (int cb = 0; cb < plan.col_blocks; ++cb)
            {
                for (int kr = 0; kr < l.kernel_size; ++kr)
                {
                    for (int kc = 0; kc < l.kernel_size; ++kc, ++g)
                    {
                        if (!options.materialize)
                        {
                            continue;
                        }
                        CrossbarSlice sl;
                        sl.layer = li;
                        sl.kernel_row = kr;
                        sl.kernel_col = kc;
                        sl.row_begin = rb * x;
                        sl.channel_begin = cb * plan.channels_per_crossbar;
                        sl.valid_rows = std::min(x, l.in_channels - sl.row_begin);
                        const int channels = std::min(plan.channels_per_crossbar,
                                l.out_channels - sl.channel_begin);
                        sl.valid_cols = channels * s;
                        sl.bit_slices = s;
                        sl.shift_p = plan.encoding.p;
                        const auto pe_global = g / hw.crossbars_per_pe;
                        sl.coord.tile = static_cast<int>(plan.first_tile +
                                pe_global / hw.pes_per_tile);
                        sl.coord.pe = static_cast<int>(pe_global % hw.pes_per_tile);
                        sl.coord.crossbar = static_cast<int>(g % hw.crossbars_per_pe);
                        const auto cells = static_cast<std::size_t>(x) * x;
                        sl.encoded.assign(cells, 0);
                        sl.sign_bits.assign(cells, 0);
                        for (int r = 0; r < sl.valid_rows; ++r)
                        {
                            for (int ch = 0; ch < channels; ++ch)
                            {
                                const auto wi = l.weight_index(sl.channel_begin + ch,
                                        sl.row_begin + r, kr, kc);
                                const auto value = enc.values[wi];
                                for (int bs = 0; bs < s; ++bs)
                                {
                                    const auto cell = static_cast<std::size_t>(r) * x +
                                            static_cast<std::size_t>(ch * s + bs);
                                    sl.encoded[cell] = static_cast<std::uint8_t>(
                                            (value >> (bs * b)) & digit_mask);
                                    sl.sign_bits[cell] = enc.signs[wi];
                                }
                            }
                        }
                        net.slices.push_back(std::move(sl));
                    }
                }
            }
        }
        net.plans.push_back(plan);
    }
    net.total_tiles = next_tile;
    return net;
}

/// CSV with one row per conv/linear layer.
inline std::string mapping_report_csv(const ModelBundle &model,
        const MappedNetwork &net)
{
    std::ostringstream out;
    out << "layer,kind,crossbars,pes,par,tiles,first_tile,ops_per_channel,p\n";
    for (const auto &p : net.plans)
    {
        out << p.layer << ',' << to_string(model.layers[p.layer].kind) << ','
            << p.crossbars << ',' << p.pes << ',' << p.par << ',' << p.tiles
            << ',' << p.first_tile << ',' << p.ops_per_channel << ','
            << p.encoding.p << '\n';
    }
    return out.str();
}

} // namespace spikesim
