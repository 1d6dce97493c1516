#pragma once

// Pretrained SNN bundle: layer topology, integer weights and neuron constants.
//
// On disk a bundle is a directory holding `model.desc` plus one `layer<i>.bin`
// per conv/linear layer (see tensor_file.hpp for the binary layout).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "spikesim/error.hpp"
#include "spikesim/kv_file.hpp"
#include "spikesim/tensor_file.hpp"

namespace spikesim {

/// Signed fixed-point scalar; the number of fractional bits is owned by the
/// enclosing model (k_mem).
struct FixedPoint
{
    std::int64_t raw = 0;
    bool infinite = false;

    static FixedPoint from_double(double value, int frac_bits)
    {
        if (std::isinf(value))
        {
            if (value < 0)
            {
                throw Error("negative infinite fixed-point value");
            }
            return {0, true};
        }
        // nearbyint honours the default round-to-nearest-even mode.
        return {static_cast<std::int64_t>(
                        std::nearbyint(std::ldexp(value, frac_bits))),
                false};
    }

    [[nodiscard]] double to_double(int frac_bits) const
    {
        if (infinite)
        {
            return std::numeric_limits<double>::infinity();
        }
        return std::ldexp(static_cast<double>(raw), -frac_bits);
    }

    friend bool operator==(const FixedPoint &, const FixedPoint &) = default;
};

enum class LayerKind
{
    conv,
    linear,
    avgpool,
};

enum class Activation
{
    lif,
    integrate_fire,
    none,
};

inline std::string to_string(LayerKind k)
{
    switch (k)
    {
    case LayerKind::conv: return "conv";
    case LayerKind::linear: return "linear";
    case LayerKind::avgpool: return "avgpool";
    }
    return "?";
}

inline std::string to_string(Activation a)
{
    switch (a)
    {
    case Activation::lif: return "LIF";
    case Activation::integrate_fire: return "IF";
    case Activation::none: return "none";
    }
    return "?";
}

struct LayerSpec
{
    LayerKind kind = LayerKind::conv;
    int in_channels = 1;  // M; for linear layers the flattened input size
    int out_channels = 1; // N
    int kernel_size = 1;  // d; pooling window for avgpool
    int stride = 1;
    int padding = 0;
    int input_dim = 1; // spatial side of the input map (1 for linear)
    FixedPoint threshold;
    FixedPoint leak;
    Activation activation = Activation::none;

    [[nodiscard]] bool is_compute() const noexcept
    {
        return kind != LayerKind::avgpool;
    }

    /// Output side length; zero when the geometry is invalid.
    [[nodiscard]] int output_dim() const noexcept
    {
        switch (kind)
        {
        case LayerKind::linear:
            return 1;
        case LayerKind::avgpool:
            return kernel_size > 0 ? input_dim / kernel_size : 0;
        case LayerKind::conv: {
            const int span = input_dim + 2 * padding - kernel_size;
            if (span < 0 || stride < 1)
            {
                return 0;
            }
            return span / stride + 1;
        }
        }
        return 0;
    }

    [[nodiscard]] std::int64_t weight_count() const noexcept
    {
        if (!is_compute())
        {
            return 0;
        }
        return std::int64_t{out_channels} * in_channels * kernel_size *
                kernel_size;
    }

    [[nodiscard]] std::int64_t neuron_count() const noexcept
    {
        const std::int64_t od = output_dim();
        return std::int64_t{out_channels} * od * od;
    }

    [[nodiscard]] std::int64_t input_count() const noexcept
    {
        if (kind == LayerKind::linear)
        {
            return in_channels;
        }
        return std::int64_t{in_channels} * input_dim * input_dim;
    }

    /// Flat index into the N x M x d x d weight tensor.
    [[nodiscard]] std::size_t weight_index(int n, int m, int r, int c) const
    {
        return ((static_cast<std::size_t>(n) * in_channels + m) * kernel_size +
                       r) *
                kernel_size +
                c;
    }

    friend bool operator==(const LayerSpec &, const LayerSpec &) = default;
};

struct ModelBundle
{
    std::vector<LayerSpec> layers;
    std::vector<std::vector<std::int8_t>> weights; // empty for avgpool
    int weight_bits = 4;   // k
    int membrane_bits = 8; // k_mem; also fractional bits of threshold/leak
    int timesteps = 1;     // T
    std::string encoding = "direct";

    [[nodiscard]] std::int64_t weight_min() const
    {
        return -(std::int64_t{1} << (weight_bits - 1));
    }
    [[nodiscard]] std::int64_t weight_max() const
    {
        return (std::int64_t{1} << (weight_bits - 1)) - 1;
    }

    [[nodiscard]] std::vector<std::size_t> compute_layers() const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < layers.size(); ++i)
        {
            if (layers[i].is_compute())
            {
                out.push_back(i);
            }
        }
        return out;
    }

    friend bool operator==(const ModelBundle &, const ModelBundle &) = default;
};

/// Checks every bundle invariant; throws Error naming the offending layer.
inline void validate(const ModelBundle &m)
{
    if (m.weight_bits < 1 || m.weight_bits > 8)
    {
        throw Error("weight_bits must be in [1, 8]");
    }
    if (m.membrane_bits < 2 || m.membrane_bits > 32)
    {
        throw Error("membrane_bits must be in [2, 32]");
    }
    if (m.timesteps < 1)
    {
        throw Error("timesteps must be >= 1");
    }
    if (m.encoding != "direct")
    {
        throw Error("unsupported input encoding '" + m.encoding + "'");
    }
    if (m.layers.empty())
    {
        throw Error("model has no layers");
    }
    if (m.weights.size() != m.layers.size())
    {
        throw Error("weight tensor list does not match layer list");
    }
    const std::int64_t one = std::int64_t{1} << m.membrane_bits;
    int prev_channels = 0;
    int prev_dim = 0;
    for (std::size_t i = 0; i < m.layers.size(); ++i)
    {
        const auto &l = m.layers[i];
        if (l.in_channels < 1 || l.out_channels < 1 || l.kernel_size < 1 ||
                l.stride < 1 || l.padding < 0 || l.input_dim < 1)
        {
            throw Error("channel, kernel, stride and input sizes must be positive", i);
        }
        if (l.output_dim() < 1)
        {
            throw Error("output spatial dimension is not positive", i);
        }
        const bool last = i + 1 == m.layers.size();
        switch (l.kind)
        {
        case LayerKind::linear:
            if (l.kernel_size != 1 || l.input_dim != 1 || l.stride != 1 ||
                    l.padding != 0)
            {
                throw Error("linear layer must have kernel 1, input_dim 1, stride 1, padding 0", i);
            }
            break;
        case LayerKind::avgpool:
            if (i == 0)
            {
                throw Error("pooling cannot be the first layer", i);
            }
            if (l.out_channels != l.in_channels ||
                    l.input_dim % l.kernel_size != 0 ||
                    l.stride != l.kernel_size || l.padding != 0)
            {
                throw Error("avgpool needs equal channels, divisible dims, stride = window", i);
            }
            if (l.activation != Activation::none)
            {
                throw Error("avgpool has no activation", i);
            }
            if (last)
            {
                throw Error("pooling cannot be the last layer", i);
            }
            break;
        case LayerKind::conv:
            break;
        }
        if (l.is_compute())
        {
            if (last && l.activation != Activation::none)
            {
                throw Error("output layer must use activation none", i);
            }
            if (!last && l.activation == Activation::none)
            {
                throw Error("hidden layer needs LIF or IF activation", i);
            }
            if (l.activation == Activation::integrate_fire &&
                    (l.leak.infinite || l.leak.raw != one))
            {
                throw Error("IF activation requires leak exactly 1", i);
            }
            if (l.activation == Activation::lif &&
                    (l.leak.infinite || l.leak.raw <= 0 || l.leak.raw > one))
            {
                throw Error("LIF leak must lie in (0, 1]", i);
            }
            const auto &w = m.weights[i];
            if (static_cast<std::int64_t>(w.size()) != l.weight_count())
            {
                throw Error("weight tensor shape mismatch", i);
            }
            for (const auto v : w)
            {
                if (v < m.weight_min() || v > m.weight_max())
                {
                    throw Error("weight out of range", i);
                }
            }
        }
        else if (!m.weights[i].empty())
        {
            throw Error("pooling layer carries weights", i);
        }
        if (i > 0)
        {
            const bool flat = l.kind == LayerKind::linear;
            const auto expected = flat ? prev_channels * prev_dim * prev_dim
                                       : prev_channels;
            if (l.in_channels != expected || (!flat && l.input_dim != prev_dim))
            {
                throw Error("input shape does not match previous layer output", i);
            }
        }
        prev_channels = l.out_channels;
        prev_dim = l.output_dim();
    }
}

namespace detail {

inline LayerKind parse_kind(const std::string &s, std::size_t layer)
{
    if (s == "conv") return LayerKind::conv;
    if (s == "linear") return LayerKind::linear;
    if (s == "avgpool") return LayerKind::avgpool;
    throw Error("unsupported layer kind '" + s + "'", layer);
}

inline Activation parse_activation(const std::string &s, std::size_t layer)
{
    if (s == "LIF") return Activation::lif;
    if (s == "IF") return Activation::integrate_fire;
    if (s == "none") return Activation::none;
    throw Error("unsupported activation '" + s + "'", layer);
}

inline std::string format_fixed(const FixedPoint &f, int frac_bits)
{
    return format_double(f.to_double(frac_bits));
}

inline std::string layer_file_name(std::size_t i)
{
    return "layer" + std::to_string(i) + ".bin";
}

} // namespace detail

inline KvDocument to_descriptor(const ModelBundle &m)
{
    KvDocument doc;
    auto &top = doc.section("model");
    top.set("schema", 1);
    top.set("weight_bits", m.weight_bits);
    top.set("membrane_bits", m.membrane_bits);
    top.set("timesteps", m.timesteps);
    top.set("encoding", m.encoding);
    top.set("layers", static_cast<std::int64_t>(m.layers.size()));
    for (std::size_t i = 0; i < m.layers.size(); ++i)
    {
        const auto &l = m.layers[i];
        auto &s = doc.section("layer." + std::to_string(i));
        s.set("kind", to_string(l.kind));
        s.set("in_channels", l.in_channels);
        s.set("out_channels", l.out_channels);
        s.set("kernel_size", l.kernel_size);
        s.set("stride", l.stride);
        s.set("padding", l.padding);
        s.set("input_dim", l.input_dim);
        s.set("activation", to_string(l.activation));
        if (l.activation != Activation::none)
        {
            s.set("threshold", detail::format_fixed(l.threshold, m.membrane_bits));
            s.set("leak", detail::format_fixed(l.leak, m.membrane_bits));
        }
        if (l.is_compute())
        {
            s.set("weights", detail::layer_file_name(i));
        }
    }
    return doc;
}

inline void write_model(const ModelBundle &m, const std::filesystem::path &dir)
{
    validate(m);
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "model.desc", std::ios::binary | std::ios::trunc);
        if (!out)
        {
            throw Error("cannot write " + (dir / "model.desc").string());
        }
        out << to_descriptor(m).str("spikesim model descriptor");
    }
    for (std::size_t i = 0; i < m.layers.size(); ++i)
    {
        if (m.layers[i].is_compute())
        {
            write_tensor(dir / detail::layer_file_name(i),
                    make_int8_tensor(m.weights[i], 4));
        }
    }
}

/// Loads and validates a bundle directory. Thresholds and leaks are
/// quantized to k_mem fractional bits with round-to-nearest-even.
inline ModelBundle load_model(const std::filesystem::path &dir)
{
    const auto doc = KvDocument::read(dir / "model.desc");
    const auto &top = doc.get("model");
    if (top.get_int("schema") != 1)
    {
        throw Error("unsupported model schema");
    }
    ModelBundle m;
    m.weight_bits = static_cast<int>(top.get_int("weight_bits"));
    m.membrane_bits = static_cast<int>(top.get_int("membrane_bits"));
    m.timesteps = static_cast<int>(top.get_int("timesteps"));
    m.encoding = top.get_string("encoding", "direct");
    const auto count = top.get_int("layers");
    if (count < 1 || count > 4096)
    {
        throw Error("malformed header: layer count");
    }
    for (std::int64_t i = 0; i < count; ++i)
    {
        const auto idx = static_cast<std::size_t>(i);
        const auto *s = doc.find("layer." + std::to_string(i));
        if (s == nullptr)
        {
            throw Error("malformed header: missing section", idx);
        }
        LayerSpec l;
        try
        {
            l.kind = detail::parse_kind(s->get("kind"), idx);
            l.in_channels = static_cast<int>(s->get_int("in_channels"));
            l.out_channels = static_cast<int>(s->get_int("out_channels", l.in_channels));
            l.kernel_size = static_cast<int>(s->get_int("kernel_size", 1));
            l.stride = static_cast<int>(s->get_int("stride",
                    l.kind == LayerKind::avgpool ? l.kernel_size : 1));
            l.padding = static_cast<int>(s->get_int("padding", 0));
            l.input_dim = static_cast<int>(s->get_int("input_dim", 1));
            l.activation = detail::parse_activation(
                    s->get_string("activation", "none"), idx);
            if (l.activation != Activation::none)
            {
                l.threshold = FixedPoint::from_double(
                        s->get_double("threshold"), m.membrane_bits);
                l.leak = FixedPoint::from_double(
                        s->get_double("leak", 1.0), m.membrane_bits);
            }
        }
        catch (const Error &e)
        {
            if (e.layer())
            {
                throw;
            }
            throw Error(std::string("malformed header: ") + e.what(), idx);
        }
        m.layers.push_back(l);
        if (l.is_compute())
        {
            const auto file = s->get_string("weights", detail::layer_file_name(idx));
            const auto t = read_tensor(dir / file);
            if (t.type != ElementType::int8)
            {
                throw Error("weight tensor must be int8", idx);
            }
            m.weights.push_back(as_int8(t));
        }
        else
        {
            m.weights.emplace_back();
        }
    }
    validate(m);
    return m;
}

} // namespace spikesim
