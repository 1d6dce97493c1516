#pragma once

// Synthetic models and datasets.
//
// Layer strings are comma-separated tokens applied to an input of
// `in_channels` x `input_dim` x `input_dim`:
//   c<N>[k<d>][s<stride>]  conv with N output channels (d = 3, padding d/2)
//   p<w>                   average pooling with window w
//   l<N>                   linear with N outputs (flattens its input)
// The last token becomes the output layer (activation none).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "spikesim/dataset.hpp"
#include "spikesim/error.hpp"
#include "spikesim/kv_file.hpp"
#include "spikesim/model.hpp"
#include "spikesim/snn_sim.hpp"

namespace spikesim {

struct ModelShape
{
    std::string layers;
    int in_channels = 1;
    int input_dim = 8;
    int weight_bits = 4;
    int membrane_bits = 16;
    int timesteps = 4;
    double leak = 0.875;
};

inline int parse_positive(std::string_view s, std::string_view token)
{
    int v = 0;
    const auto *end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || v < 1)
    {
        throw Error("bad layer token '" + std::string(token) + "'");
    }
    return v;
}

/// Builds the layer list of a layer string; weights are left empty.
inline std::vector<LayerSpec> parse_layers(const ModelShape &shape)
{
    if (shape.in_channels < 1 || shape.input_dim < 1)
    {
        throw Error("input channels and dimension must be positive");
    }
    const auto tokens = detail::split(shape.layers, ',');
    if (tokens.empty() || (tokens.size() == 1 && detail::trim(tokens[0]).empty()))
    {
        throw Error("empty layer string");
    }
    std::vector<LayerSpec> out;
    int channels = shape.in_channels;
    int dim = shape.input_dim;
    for (const auto &raw : tokens)
    {
        const auto tok = detail::trim(raw);
        if (tok.size() < 2)
        {
            throw Error("bad layer token '" + std::string(tok) + "'");
        }
        LayerSpec l;
        l.in_channels = channels;
        l.input_dim = dim;
        const char kind = tok[0];
        auto rest = std::string_view(tok).substr(1);
        if (kind == 'c')
        {
            l.kind = LayerKind::conv;
            l.kernel_size = 3;
            auto digits_end = [](std::string_view v) {
                const auto e = v.find_first_not_of("0123456789");
                return e == std::string_view::npos ? v.size() : e;
            };
            auto n = digits_end(rest);
            l.out_channels = parse_positive(rest.substr(0, n), tok);
            rest = rest.substr(n);
            while (!rest.empty())
            {
                const char key = rest[0];
                if (key != 'k' && key != 's')
                {
                    throw Error("bad layer token '" + std::string(tok) + "'");
                }
                n = digits_end(rest.substr(1));
                (key == 'k' ? l.kernel_size : l.stride) = parse_positive(rest.substr(1, n), tok);
                rest = rest.substr(1 + n);
            }
            l.padding = l.kernel_size / 2;
        }
        else if (kind == 'p')
        {
            l.kind = LayerKind::avgpool;
            l.kernel_size = parse_positive(rest, tok);
            l.stride = l.kernel_size;
            l.out_channels = channels;
        }
        else if (kind == 'l')
        {
            l.kind = LayerKind::linear;
            l.in_channels = channels * dim * dim;
            l.input_dim = 1;
            l.out_channels = parse_positive(rest, tok);
        }
        else
        {
            throw Error("bad layer token '" + std::string(tok) + "'");
        }
        if (l.output_dim() < 1)
        {
            throw Error("layer '" + std::string(tok) + "' leaves no output");
        }
        channels = l.out_channels;
        dim = l.output_dim();
        out.push_back(l);
    }
    return out;
}

/// Random weights in the signed k-bit range; hidden thresholds scaled with
/// fan-in so that random inputs neither saturate nor stay silent.
inline ModelBundle random_model(const ModelShape &shape, std::uint64_t seed)
{
    ModelBundle m;
    m.weight_bits = shape.weight_bits;
    m.membrane_bits = shape.membrane_bits;
    m.timesteps = shape.timesteps;
    m.layers = parse_layers(shape);
    std::mt19937_64 rng(seed);
    const int lo = -(1 << (shape.weight_bits - 1));
    const int hi = (1 << (shape.weight_bits - 1)) - 1;
    std::uniform_int_distribution<int> dist(lo, hi);
    const double u_max = std::ldexp(1.0, shape.membrane_bits - 1) - 2.0;
    for (std::size_t i = 0; i < m.layers.size(); ++i)
    {
        auto &l = m.layers[i];
        const bool last = i + 1 == m.layers.size();
        std::vector<std::int8_t> w(static_cast<std::size_t>(l.weight_count()));
        for (auto &v : w)
        {
            v = static_cast<std::int8_t>(dist(rng));
        }
        m.weights.push_back(std::move(w));
        if (!l.is_compute())
        {
            continue;
        }
        if (last)
        {
            l.activation = Activation::none;
            continue;
        }
        const double fan_in = static_cast<double>(l.in_channels) * l.kernel_size * l.kernel_size;
        const double th = std::clamp(std::round(0.5 * std::sqrt(fan_in) * (hi + 1)), 1.0, u_max);
        l.activation = shape.leak == 1.0 ? Activation::integrate_fire : Activation::lif;
        l.threshold = FixedPoint::from_double(th, m.membrane_bits);
        l.leak = FixedPoint::from_double(shape.leak, m.membrane_bits);
    }
    validate(m);
    return m;
}

inline ModelShape preset_shape(std::string_view name)
{
    ModelShape s;
    if (name == "conv3")
    {
        // 64/64, 64/128, 128/512 with 3x3 kernels on a 32x32 map.
        s.layers = "c64,c128,c512";
        s.in_channels = 64;
        s.input_dim = 32;
        return s;
    }
    if (name == "vgg9")
    {
        s.layers = "c64,c64,p2,c128,c128,p2,c256,c256,c256,p2,l1024,l10";
        s.in_channels = 3;
        s.input_dim = 32;
        return s;
    }
    if (name == "toy")
    {
        s.layers = "c16,c32,p2,l4";
        s.in_channels = 1;
        s.input_dim = 8;
        return s;
    }
    throw Error("unknown preset '" + std::string(name) + "'");
}

struct ToyTaskConfig
{
    int samples = 200;
    std::uint64_t seed = 7;
};

/// Four-class 8x8 task: a bright horizontal bar, vertical bar, diagonal or
/// anti-diagonal on a dim noisy background. 4-bit pixels.
inline Dataset toy_dataset(const ToyTaskConfig &cfg)
{
    constexpr int dim = 8;
    Dataset d;
    d.channels = 1;
    d.input_dim = dim;
    d.classes = 4;
    d.input_bits = 4;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> bg(0, 3);
    std::uniform_int_distribution<int> fg(11, 15);
    std::uniform_int_distribution<int> pos(1, dim - 2);
    std::uniform_int_distribution<int> shift(-1, 1);
    for (int s = 0; s < cfg.samples; ++s)
    {
        const int label = s % 4;
        std::vector<std::uint8_t> img(dim * dim);
        for (auto &p : img)
        {
            p = static_cast<std::uint8_t>(bg(rng));
        }
        const int at = pos(rng);
        const int off = shift(rng);
        for (int i = 0; i < dim; ++i)
        {
            int y = 0;
            int x = 0;
            switch (label)
            {
            case 0: y = at; x = i; break;
            case 1: y = i; x = at; break;
            case 2: y = i; x = i + off; break;
            default: y = i; x = dim - 1 - i + off; break;
            }
            if (x >= 0 && x < dim)
            {
                img[static_cast<std::size_t>(y * dim + x)] = static_cast<std::uint8_t>(fg(rng));
            }
        }
        d.inputs.insert(d.inputs.end(), img.begin(), img.end());
        d.labels.push_back(static_cast<std::uint8_t>(label));
    }
    validate(d);
    return d;
}

namespace detail {

/// Value at quantile q of v (v is reordered).
inline double quantile(std::vector<double> &v, double q)
{
    if (v.empty())
    {
        return 0.0;
    }
    const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

} // namespace detail

/// Fits a model of `shape` to a training set: random conv weights, hidden
/// thresholds at the `fire_quantile` of first-step MACs, and a linear readout
/// from class centroids of the spike counts feeding the output layer.
inline ModelBundle fit_model(const ModelShape &shape, const Dataset &train,
        std::uint64_t seed, double fire_quantile = 0.8)
{
    auto m = random_model(shape, seed);
    const auto &out = m.layers.back();
    if (out.kind != LayerKind::linear || out.out_channels != train.classes)
    {
        throw Error("fitting needs a linear output layer with one unit per class");
    }
    const HardwareConfig hw;
    const double u_max = std::ldexp(1.0, m.membrane_bits - 1) - 2.0;

    // Thresholds layer by layer, each from the statistics of the layers
    // already fixed. The output weights are still random at this point and
    // do not influence hidden activity.
    for (std::size_t li = 0; li + 1 < m.layers.size(); ++li)
    {
        auto &l = m.layers[li];
        if (!l.is_compute())
        {
            continue;
        }
        const std::size_t n = train.size();
        std::vector<std::vector<double>> per_sample(n);
        const InferenceEngine engine(m, nullptr, hw, InferenceMode::ideal);
        parallel_for(n, [&](std::size_t s) {
            // Layer input at the first time-step.
            SampleTrace tr;
            static_cast<void>(engine.run_sample(train.sample(s), train.input_bits, &tr));
            std::vector<std::int32_t> in;
            if (li == 0)
            {
                const auto x = train.sample(s);
                in.assign(x.begin(), x.end());
            }
            else
            {
                const auto &sp = tr[0][li - 1].spikes;
                in.assign(sp.begin(), sp.end());
            }
            const auto mac = ideal_layer_mac(l, m.weights[li], in);
            per_sample[s].assign(mac.begin(), mac.end());
        });
        std::vector<double> all;
        for (auto &v : per_sample)
        {
            all.insert(all.end(), v.begin(), v.end());
        }
        const double th = std::clamp(std::round(detail::quantile(all, fire_quantile)), 1.0, u_max);
        l.threshold = FixedPoint::from_double(th, m.membrane_bits);
    }

    // Readout: per-class mean of the output layer's input spike counts.
    const auto feat = static_cast<std::size_t>(out.in_channels);
    const auto out_index = m.layers.size() - 1;
    std::vector<std::vector<double>> counts(train.size(), std::vector<double>(feat, 0.0));
    {
        const InferenceEngine engine(m, nullptr, hw, InferenceMode::ideal);
        parallel_for(train.size(), [&](std::size_t s) {
            SampleTrace tr;
            static_cast<void>(engine.run_sample(train.sample(s), train.input_bits, &tr));
            for (const auto &step : tr)
            {
                const auto &sp = step[out_index - 1].spikes;
                for (std::size_t f = 0; f < feat; ++f)
                {
                    counts[s][f] += sp[f];
                }
            }
        });
    }
    const auto classes = static_cast<std::size_t>(train.classes);
    std::vector<std::vector<double>> centroid(classes, std::vector<double>(feat, 0.0));
    std::vector<double> members(classes, 0.0);
    for (std::size_t s = 0; s < train.size(); ++s)
    {
        const auto c = train.labels[s];
        members[c] += 1.0;
        for (std::size_t f = 0; f < feat; ++f)
        {
            centroid[c][f] += counts[s][f];
        }
    }
    std::vector<double> mean(feat, 0.0);
    for (std::size_t c = 0; c < classes; ++c)
    {
        for (std::size_t f = 0; f < feat; ++f)
        {
            centroid[c][f] /= std::max(1.0, members[c]);
            mean[f] += centroid[c][f] / static_cast<double>(classes);
        }
    }
    double peak = 0.0;
    for (std::size_t c = 0; c < classes; ++c)
    {
        for (std::size_t f = 0; f < feat; ++f)
        {
            peak = std::max(peak, std::abs(centroid[c][f] - mean[f]));
        }
    }
    const int hi = (1 << (m.weight_bits - 1)) - 1;
    auto &w = m.weights[out_index];
    for (std::size_t c = 0; c < classes; ++c)
    {
        for (std::size_t f = 0; f < feat; ++f)
        {
            const double v = peak > 0.0 ? (centroid[c][f] - mean[f]) / peak * hi : 0.0;
            w[out.weight_index(static_cast<int>(c), static_cast<int>(f), 0, 0)] =
                    static_cast<std::int8_t>(std::clamp<double>(std::nearbyint(v), -hi - 1, hi));
        }
    }
    validate(m);
    return m;
}

/// The shipped desk-scale reference: toy preset fitted on its own training
/// split. The evaluation split uses a different seed.
inline ModelBundle toy_model(std::uint64_t seed)
{
    const auto train = toy_dataset({256, seed ^ 0x5eedULL});
    return fit_model(preset_shape("toy"), train, seed);
}

inline Dataset toy_eval_dataset(std::uint64_t seed)
{
    return toy_dataset({200, seed ^ 0xe7a1ULL});
}

} // namespace spikesim
