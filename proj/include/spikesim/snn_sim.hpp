#pragma once

// Time-stepped functional SNN inference.
//
// Each sample is presented for T time-steps (direct encoding). Hidden
// conv/linear layers feed LIF/IF neurons; the output layer only accumulates
// its MACs into class scores, and the prediction is the argmax over the
// scores summed across all time-steps.

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "spikesim/dataset.hpp"
#include "spikesim/error.hpp"
#include "spikesim/hardware_config.hpp"
#include "spikesim/mapper.hpp"
#include "spikesim/model.hpp"
#include "spikesim/nice.hpp"
#include "spikesim/parallel.hpp"

namespace spikesim {

struct NeuronState
{
    std::vector<std::int64_t> membrane; // integer U, saturated to k_mem bits
    std::vector<std::uint8_t> spiked;

    explicit NeuronState(std::size_t n = 0) : membrane(n, 0), spiked(n, 0) {}
};

struct LifParams
{
    FixedPoint threshold;
    FixedPoint leak;
    Activation mode = Activation::lif;
    int membrane_bits = 8; // width of U, and fractional bits of threshold/leak
};

inline LifParams lif_params(const ModelBundle &m, const LayerSpec &l)
{
    return {l.threshold, l.leak, l.activation, m.membrane_bits};
}

/// One neuron update: U = leak * U_prev + mac (leak product truncated toward
/// zero, sum saturated to k_mem bits), spike when U > threshold, then reset.
inline void lif_step(NeuronState &state, std::span<const std::int64_t> mac_in,
        const LifParams &p)
{
    if (mac_in.size() != state.membrane.size())
    {
        throw Error("membrane and MAC shapes differ");
    }
    const int f = p.membrane_bits;
    const std::int64_t hi = (std::int64_t{1} << (p.membrane_bits - 1)) - 1;
    const std::int64_t lo = -hi - 1;
    const bool leaky = p.mode == Activation::lif && p.leak.raw != (std::int64_t{1} << f);
    for (std::size_t i = 0; i < mac_in.size(); ++i)
    {
        std::int64_t u = state.membrane[i];
        if (leaky)
        {
            u = static_cast<std::int64_t>(
                    (static_cast<__int128>(p.leak.raw) * u) / (__int128{1} << f));
        }
        u = std::clamp(u + mac_in[i], lo, hi);
        const bool fire = !p.threshold.infinite &&
                (static_cast<__int128>(u) << f) > static_cast<__int128>(p.threshold.raw);
        state.spiked[i] = fire ? 1 : 0;
        state.membrane[i] = fire ? 0 : u;
    }
}

/// Value-returning form of lif_step.
inline NeuronState lif_update(const NeuronState &prev, std::span<const std::int64_t> mac_in,
        const LifParams &p)
{
    NeuronState next = prev;
    lif_step(next, mac_in, p);
    return next;
}

/// Average pooling of a C x D x D spike map followed by re-binarization:
/// a window fires when at least half of its inputs fired.
inline std::vector<std::uint8_t> pool(std::span<const std::uint8_t> spikes,
        int channels, int dim, int window)
{
    if (window < 1 || dim % window != 0)
    {
        throw Error("pooling window does not divide the spatial dimension");
    }
    if (spikes.size() != static_cast<std::size_t>(channels) * dim * dim)
    {
        throw Error("spike map shape mismatch");
    }
    const int od = dim / window;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(channels) * od * od, 0);
    for (int c = 0; c < channels; ++c)
    {
        for (int oy = 0; oy < od; ++oy)
        {
            for (int ox = 0; ox < od; ++ox)
            {
                int count = 0;
                for (int dy = 0; dy < window; ++dy)
                {
                    for (int dx = 0; dx < window; ++dx)
                    {
                        const auto y = oy * window + dy;
                        const auto x = ox * window + dx;
                        count += spikes[(static_cast<std::size_t>(c) * dim + y) * dim + x];
                    }
                }
                out[(static_cast<std::size_t>(c) * od + oy) * od + ox] =
                        2 * count >= window * window ? 1 : 0;
            }
        }
    }
    return out;
}

enum class InferenceMode
{
    ideal,
    nonideal,
};

/// Exact integer MAC of a conv/linear layer for arbitrary integer inputs.
inline std::vector<std::int64_t> ideal_layer_mac(const LayerSpec &l,
        std::span<const std::int8_t> weights, std::span<const std::int32_t> input)
{
    const int od = l.output_dim();
    const int d = l.kernel_size;
    const int dim = l.input_dim;
    std::vector<std::int64_t> out(static_cast<std::size_t>(l.out_channels) * od * od, 0);
    if (l.kind == LayerKind::linear)
    {
        for (int n = 0; n < l.out_channels; ++n)
        {
            std::int64_t acc = 0;
            for (int m = 0; m < l.in_channels; ++m)
            {
                acc += std::int64_t{weights[l.weight_index(n, m, 0, 0)]} * input[static_cast<std::size_t>(m)];
            }
            out[static_cast<std::size_t>(n)] = acc;
        }
        return out;
    }
    for (int n = 0; n < l.out_channels; ++n)
    {
        for (int oy = 0; oy < od; ++oy)
        {
            for (int ox = 0; ox < od; ++ox)
            {
                std::int64_t acc = 0;
                for (int m = 0; m < l.in_channels; ++m)
                {
                    for (int kr = 0; kr < d; ++kr)
                    {
                        const int iy = oy * l.stride + kr - l.padding;
                        if (iy < 0 || iy >= dim) continue;
                        for (int kc = 0; kc < d; ++kc)
                        {
                            const int ix = ox * l.stride + kc - l.padding;
                            if (ix < 0 || ix >= dim) continue;
                            acc += std::int64_t{weights[l.weight_index(n, m, kr, kc)]} *
                                    input[(static_cast<std::size_t>(m) * dim + iy) * dim + ix];
                        }
                    }
                }
                out[(static_cast<std::size_t>(n) * od + oy) * od + ox] = acc;
            }
        }
    }
    return out;
}

/// Crossbar-evaluated MAC of a conv/linear layer for a binary input map.
inline std::vector<std::int64_t> crossbar_layer_mac(const LayerSpec &l,
        const MappedNetwork &net, const LayerPlan &plan,
        std::span<const std::uint8_t> spikes, const HardwareConfig &hw)
{
    const int od = l.output_dim();
    const int dim = l.input_dim;
    const bool flat = l.kind == LayerKind::linear;
    std::vector<std::int64_t> out(static_cast<std::size_t>(l.out_channels) * od * od, 0);
    std::vector<std::uint8_t> rows;
    for (std::int64_t si = 0; si < plan.crossbars; ++si)
    {
        const auto &sl = net.slices[plan.first_slice + static_cast<std::size_t>(si)];
        rows.assign(static_cast<std::size_t>(sl.valid_rows), 0);
        for (int oy = 0; oy < od; ++oy)
        {
            for (int ox = 0; ox < od; ++ox)
            {
                bool any = false;
                if (flat)
                {
                    for (int r = 0; r < sl.valid_rows; ++r)
                    {
                        rows[static_cast<std::size_t>(r)] = spikes[static_cast<std::size_t>(sl.row_begin + r)];
                        any = any || rows[static_cast<std::size_t>(r)] != 0;
                    }
                }
                else
                {
                    const int iy = oy * l.stride + sl.kernel_row - l.padding;
                    const int ix = ox * l.stride + sl.kernel_col - l.padding;
                    if (iy < 0 || iy >= dim || ix < 0 || ix >= dim)
                    {
                        continue;
                    }
                    for (int r = 0; r < sl.valid_rows; ++r)
                    {
                        const auto m = static_cast<std::size_t>(sl.row_begin + r);
                        rows[static_cast<std::size_t>(r)] = spikes[(m * dim + iy) * dim + ix];
                        any = any || rows[static_cast<std::size_t>(r)] != 0;
                    }
                }
                if (!any)
                {
                    continue;
                }
                const auto partial = crossbar_mac(sl, rows, hw);
                for (std::size_t ch = 0; ch < partial.size(); ++ch)
                {
                    const auto n = static_cast<std::size_t>(sl.channel_begin) + ch;
                    out[(n * od + oy) * od + ox] += partial[ch];
                }
            }
        }
    }
    return out;
}

/// Per time-step snapshot of one layer, recorded on request.
struct LayerSnapshot
{
    std::vector<std::int64_t> membrane; // post-update (after reset); scores for the output layer
    std::vector<std::uint8_t> spikes;   // empty for the output layer
};

/// trace[t][layer]
using SampleTrace = std::vector<std::vector<LayerSnapshot>>;

struct SampleResult
{
    std::vector<std::int64_t> scores;
    int prediction = 0;
    std::vector<std::int64_t> output_spikes; // per layer, summed over T
    std::vector<std::int64_t> input_events;  // per layer, summed over T
};

class InferenceEngine
{
public:
    InferenceEngine(const ModelBundle &model, const MappedNetwork *mapped,
            const HardwareConfig &hw, InferenceMode mode)
        : model_(model)
        , mapped_(mapped)
        , hw_(hw)
        , mode_(mode)
    {
        if (mode == InferenceMode::nonideal)
        {
            if (mapped == nullptr || !mapped->materialized)
            {
                throw Error("nonideal inference needs a materialized mapping");
            }
            for (const auto &sl : mapped->slices)
            {
                if (sl.conductances.empty())
                {
                    throw Error("nonideal inference needs programmed conductances");
                }
            }
        }
    }

    [[nodiscard]] InferenceMode mode() const noexcept { return mode_; }

    [[nodiscard]] SampleResult run_sample(std::span<const std::uint8_t> input,
            int input_bits, SampleTrace *trace = nullptr) const
    {
        const auto &first = model_.layers.front();
        if (input.size() != static_cast<std::size_t>(first.input_count()))
        {
            throw Error("sample shape does not match layer 0 input");
        }
        const auto n_layers = model_.layers.size();
        std::vector<NeuronState> states;
        states.reserve(n_layers);
        for (const auto &l : model_.layers)
        {
            states.emplace_back(l.is_compute() ? static_cast<std::size_t>(l.neuron_count()) : 0);
        }
        SampleResult res;
        res.output_spikes.assign(n_layers, 0);
        res.input_events.assign(n_layers, 0);
        res.scores.assign(static_cast<std::size_t>(model_.layers.back().neuron_count()), 0);
        if (trace != nullptr)
        {
            trace->assign(static_cast<std::size_t>(model_.timesteps),
                    std::vector<LayerSnapshot>(n_layers));
        }

        std::vector<std::int32_t> analog(input.begin(), input.end());
        std::vector<std::uint8_t> spikes;
        for (int t = 0; t < model_.timesteps; ++t)
        {
            for (std::size_t li = 0; li < n_layers; ++li)
            {
                const auto &l = model_.layers[li];
                const bool last = li + 1 == n_layers;
                if (l.kind == LayerKind::avgpool)
                {
                    res.input_events[li] += count_ones(spikes);
                    spikes = pool(spikes, l.in_channels, l.input_dim, l.kernel_size);
                    res.output_spikes[li] += count_ones(spikes);
                    if (trace != nullptr)
                    {
                        (*trace)[static_cast<std::size_t>(t)][li].spikes = spikes;
                    }
                    continue;
                }
                std::vector<std::int64_t> mac;
                if (li == 0)
                {
                    res.input_events[li] += static_cast<std::int64_t>(analog.size());
                    mac = first_layer_mac(analog, input_bits);
                }
                else
                {
                    res.input_events[li] += count_ones(spikes);
                    mac = layer_mac(li, spikes);
                }
                if (last)
                {
                    for (std::size_t i = 0; i < mac.size(); ++i)
                    {
                        res.scores[i] += mac[i];
                    }
                    if (trace != nullptr)
                    {
                        (*trace)[static_cast<std::size_t>(t)][li].membrane = res.scores;
                    }
                    continue;
                }
                lif_step(states[li], mac, lif_params(model_, l));
                spikes = states[li].spiked;
                res.output_spikes[li] += count_ones(spikes);
                if (trace != nullptr)
                {
                    auto &snap = (*trace)[static_cast<std::size_t>(t)][li];
                    snap.membrane = states[li].membrane;
                    snap.spikes = spikes;
                }
            }
        }
        res.prediction = static_cast<int>(
                std::max_element(res.scores.begin(), res.scores.end()) - res.scores.begin());
        return res;
    }

private:
    static std::int64_t count_ones(std::span<const std::uint8_t> s)
    {
        std::int64_t n = 0;
        for (const auto v : s) n += v;
        return n;
    }

    std::vector<std::int64_t> layer_mac(std::size_t li, std::span<const std::uint8_t> spikes) const
    {
        const auto &l = model_.layers[li];
        if (mode_ == InferenceMode::ideal)
        {
            std::vector<std::int32_t> in(spikes.begin(), spikes.end());
            return ideal_layer_mac(l, model_.weights[li], in);
        }
        return crossbar_layer_mac(l, *mapped_, mapped_->plan_for_layer(li), spikes, hw_);
    }

    std::vector<std::int64_t> first_layer_mac(std::span<const std::int32_t> analog,
            int input_bits) const
    {
        const auto &l = model_.layers.front();
        if (mode_ == InferenceMode::ideal || hw_.first_layer == FirstLayerMode::digital)
        {
            return ideal_layer_mac(l, model_.weights.front(), analog);
        }
        // Bit-serial: each input bit-plane is a binary vector, so the DIFF
        // correction applies per plane and planes recombine by shifting.
        std::vector<std::int64_t> total(static_cast<std::size_t>(l.neuron_count()), 0);
        std::vector<std::uint8_t> plane(analog.size());
        const auto &plan = mapped_->plan_for_layer(0);
        for (int q = 0; q < input_bits; ++q)
        {
            for (std::size_t i = 0; i < analog.size(); ++i)
            {
                plane[i] = static_cast<std::uint8_t>((analog[i] >> q) & 1);
            }
            const auto part = crossbar_layer_mac(l, *mapped_, plan, plane, hw_);
            for (std::size_t i = 0; i < total.size(); ++i)
            {
                total[i] += part[i] * (std::int64_t{1} << q);
            }
        }
        return total;
    }

    const ModelBundle &model_;
    const MappedNetwork *mapped_;
    const HardwareConfig &hw_;
    InferenceMode mode_;
};

struct InferenceResult
{
    std::size_t samples = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    std::vector<int> predictions;
    /// 1 - spikes / (neurons * T), per layer; -1 for the output layer.
    std::vector<double> sparsity;
    /// Per-inference averages, per layer.
    std::vector<double> input_events;
    std::vector<double> output_spikes;
};

/// Classifies every sample. Samples are independent (state is rebuilt per
/// sample), so they run in parallel and are reduced in sample order.
inline InferenceResult run_inference(const ModelBundle &model, const MappedNetwork *mapped,
        const HardwareConfig &hw, const Dataset &data, InferenceMode mode)
{
    const auto &first = model.layers.front();
    if (data.channels != first.in_channels || data.input_dim != first.input_dim ||
            data.sample_size() != static_cast<std::size_t>(first.input_count()))
    {
        throw Error("dataset sample shape does not match layer 0 input");
    }
    if (data.classes > model.layers.back().neuron_count())
    {
        throw Error("dataset has more classes than the output layer");
    }
    const InferenceEngine engine(model, mapped, hw, mode);
    std::vector<SampleResult> results(data.size());
    parallel_for(data.size(), [&](std::size_t i) {
        results[i] = engine.run_sample(data.sample(i), data.input_bits);
    });

    const auto n_layers = model.layers.size();
    InferenceResult out;
    out.samples = data.size();
    out.input_events.assign(n_layers, 0.0);
    out.output_spikes.assign(n_layers, 0.0);
    std::vector<std::int64_t> spikes(n_layers, 0);
    std::vector<std::int64_t> inputs(n_layers, 0);
    for (std::size_t i = 0; i < results.size(); ++i)
    {
        const auto &r = results[i];
        out.predictions.push_back(r.prediction);
        out.correct += r.prediction == data.labels[i] ? 1 : 0;
        for (std::size_t l = 0; l < n_layers; ++l)
        {
            spikes[l] += r.output_spikes[l];
            inputs[l] += r.input_events[l];
        }
    }
    const double n = std::max<std::size_t>(1, out.samples);
    out.accuracy = out.samples ? static_cast<double>(out.correct) / n : 0.0;
    for (std::size_t l = 0; l < n_layers; ++l)
    {
        out.input_events[l] = static_cast<double>(inputs[l]) / n;
        out.output_spikes[l] = static_cast<double>(spikes[l]) / n;
        if (l + 1 == n_layers)
        {
            out.sparsity.push_back(-1.0);
            continue;
        }
        const double denom = static_cast<double>(model.layers[l].neuron_count()) *
                model.timesteps * n;
        out.sparsity.push_back(1.0 - static_cast<double>(spikes[l]) / denom);
    }
    return out;
}

} // namespace spikesim
