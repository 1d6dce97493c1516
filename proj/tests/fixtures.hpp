#pragma once

// Small builders shared by the NICE tests and the acceptance run.

#include <cstdint>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "spikesim/hardware_config.hpp"
#include "spikesim/mapper.hpp"
#include "spikesim/model.hpp"
#include "spikesim/nice.hpp"

namespace fixture {

/// One linear layer whose weights fill a single crossbar block.
inline spikesim::ModelBundle linear_model(int rows, int channels, int k, std::mt19937_64 &rng)
{
    spikesim::ModelBundle m;
    m.weight_bits = k;
    m.membrane_bits = 16;
    m.timesteps = 1;
    spikesim::LayerSpec l;
    l.kind = spikesim::LayerKind::linear;
    l.in_channels = rows;
    l.out_channels = channels;
    l.activation = spikesim::Activation::none;
    m.layers.push_back(l);
    std::uniform_int_distribution<int> w(-(1 << (k - 1)), (1 << (k - 1)) - 1);
    std::vector<std::int8_t> weights(static_cast<std::size_t>(rows) * channels);
    for (auto &v : weights) v = static_cast<std::int8_t>(w(rng));
    m.weights.push_back(std::move(weights));
    return m;
}

inline std::vector<std::uint8_t> random_spikes(std::size_t n, double density, std::mt19937_64 &rng)
{
    std::bernoulli_distribution on(density);
    std::vector<std::uint8_t> s(n);
    for (auto &v : s) v = on(rng) ? 1 : 0;
    return s;
}

/// Exact signed MAC per output channel of a linear layer.
inline std::vector<std::int64_t> software_mac(const spikesim::ModelBundle &m,
        const std::vector<std::uint8_t> &spikes)
{
    const auto &l = m.layers[0];
    std::vector<std::int64_t> out;
    for (int n = 0; n < l.out_channels; ++n)
    {
        std::vector<int> w;
        std::vector<int> x;
        for (int r = 0; r < l.in_channels; ++r)
        {
            w.push_back(m.weights[0][static_cast<std::size_t>(n * l.in_channels + r)]);
            x.push_back(spikes[static_cast<std::size_t>(r)]);
        }
        out.push_back(oracle::dot(w, x));
    }
    return out;
}

/// Conv 1->1 (1x1, weight 2, LIF leak 0.5, threshold 3) feeding a 16->2
/// readout: row 0 all ones, row 1 +1 on the first eight inputs, -1 after.
inline spikesim::ModelBundle hand_model()
{
    spikesim::ModelBundle m;
    m.weight_bits = 4;
    m.membrane_bits = 8;
    m.timesteps = 3;

    spikesim::LayerSpec conv;
    conv.kind = spikesim::LayerKind::conv;
    conv.in_channels = 1;
    conv.out_channels = 1;
    conv.kernel_size = 1;
    conv.input_dim = 4;
    conv.activation = spikesim::Activation::lif;
    conv.threshold = spikesim::FixedPoint::from_double(3.0, 8);
    conv.leak = spikesim::FixedPoint::from_double(0.5, 8);
    m.layers.push_back(conv);
    m.weights.push_back({2});

    spikesim::LayerSpec out;
    out.kind = spikesim::LayerKind::linear;
    out.in_channels = 16;
    out.out_channels = 2;
    out.activation = spikesim::Activation::none;
    m.layers.push_back(out);
    std::vector<std::int8_t> w(32, 1);
    for (int i = 8; i < 16; ++i) w[static_cast<std::size_t>(16 + i)] = -1;
    m.weights.push_back(w);
    return m;
}

/// Mean squared error of crossbar_mac against the exact MAC over random
/// full X x X slices (k = 4, 1 bit per cell).
inline double mac_mse(spikesim::HardwareConfig hw, int slices, double density, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const int x = hw.crossbar_size;
    const int k = 4;
    double sum = 0.0;
    std::int64_t count = 0;
    for (int s = 0; s < slices; ++s)
    {
        const auto m = linear_model(x, x / (k / hw.bits_per_cell), k, rng);
        hw.seed = rng();
        auto net = spikesim::map_network(m, hw);
        spikesim::program_conductances(net, hw);
        const auto spikes = random_spikes(static_cast<std::size_t>(x), density, rng);
        const auto got = spikesim::crossbar_mac(net.slices[0], spikes, hw);
        const auto want = software_mac(m, spikes);
        for (std::size_t i = 0; i < got.size(); ++i)
        {
            const double e = static_cast<double>(got[i] - want[i]);
            sum += e * e;
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

} // namespace fixture
