#pragma once

// Direct-encoded input datasets.
//
// Directory layout: `dataset.desc` ([dataset] samples, channels, input_dim,
// classes, input_bits), `inputs.bin` (uint8, samples x C x D x D) and
// `labels.bin` (uint8, one per sample). Both binaries use the tensor header
// from tensor_file.hpp.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "spikesim/error.hpp"
#include "spikesim/kv_file.hpp"
#include "spikesim/tensor_file.hpp"

namespace spikesim {

struct Dataset
{
    int channels = 1;
    int input_dim = 1;
    int classes = 2;
    int input_bits = 8;
    std::vector<std::uint8_t> inputs;
    std::vector<std::uint8_t> labels;

    [[nodiscard]] std::size_t sample_size() const
    {
        return static_cast<std::size_t>(channels) * input_dim * input_dim;
    }
    [[nodiscard]] std::size_t size() const { return labels.size(); }
    [[nodiscard]] std::span<const std::uint8_t> sample(std::size_t i) const
    {
        return std::span<const std::uint8_t>(inputs).subspan(i * sample_size(),
                sample_size());
    }

    friend bool operator==(const Dataset &, const Dataset &) = default;
};

inline void validate(const Dataset &d)
{
    if (d.channels < 1 || d.input_dim < 1 || d.classes < 1 || d.classes > 256)
    {
        throw Error("dataset shape parameters must be positive (classes <= 256)");
    }
    if (d.input_bits < 1 || d.input_bits > 8)
    {
        throw Error("dataset input_bits must be in [1, 8]");
    }
    if (d.inputs.size() != d.size() * d.sample_size())
    {
        throw Error("dataset input tensor size does not match sample count");
    }
    for (const auto v : d.inputs)
    {
        if (v >= (1U << d.input_bits))
        {
            throw Error("dataset input value exceeds input_bits");
        }
    }
    for (const auto l : d.labels)
    {
        if (l >= d.classes)
        {
            throw Error("dataset label out of range");
        }
    }
}

inline void write_dataset(const Dataset &d, const std::filesystem::path &dir)
{
    validate(d);
    std::filesystem::create_directories(dir);
    KvDocument doc;
    auto &s = doc.section("dataset");
    s.set("schema", 1);
    s.set("samples", static_cast<std::int64_t>(d.size()));
    s.set("channels", d.channels);
    s.set("input_dim", d.input_dim);
    s.set("classes", d.classes);
    s.set("input_bits", d.input_bits);
    {
        std::ofstream out(dir / "dataset.desc", std::ios::binary | std::ios::trunc);
        if (!out)
        {
            throw Error("cannot write " + (dir / "dataset.desc").string());
        }
        out << doc.str("spikesim dataset descriptor");
    }
    write_tensor(dir / "inputs.bin", RawTensor{ElementType::uint8, 4, d.inputs});
    write_tensor(dir / "labels.bin", RawTensor{ElementType::uint8, 1, d.labels});
}

inline Dataset load_dataset(const std::filesystem::path &dir)
{
    const auto doc = KvDocument::read(dir / "dataset.desc");
    const auto &s = doc.get("dataset");
    if (s.get_int("schema") != 1)
    {
        throw Error("unsupported dataset schema");
    }
    Dataset d;
    const auto samples = s.get_int("samples");
    d.channels = static_cast<int>(s.get_int("channels"));
    d.input_dim = static_cast<int>(s.get_int("input_dim"));
    d.classes = static_cast<int>(s.get_int("classes"));
    d.input_bits = static_cast<int>(s.get_int("input_bits", 8));
    auto inputs = read_tensor(dir / "inputs.bin");
    auto labels = read_tensor(dir / "labels.bin");
    if (inputs.type != ElementType::uint8 || labels.type != ElementType::uint8)
    {
        throw Error("dataset tensors must be uint8");
    }
    d.inputs = std::move(inputs.bytes);
    d.labels = std::move(labels.bytes);
    if (samples < 0 || static_cast<std::size_t>(samples) != d.labels.size())
    {
        throw Error("dataset sample count mismatch");
    }
    validate(d);
    return d;
}

} // namespace spikesim
