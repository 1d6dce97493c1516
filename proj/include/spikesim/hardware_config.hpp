#pragma once

// Circuit, device and architecture parameters plus per-component cost tables.
//
// `hw.conf` uses the same sectioned key/value format as model descriptors.
// Absent keys take the defaults below; see configs/default_hw.conf for the
// full annotated list.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spikesim/error.hpp"
#include "spikesim/kv_file.hpp"

namespace spikesim {

enum class WeightEncoding
{
    ni_aware,        // negatives shifted by +2^p, p from the layer's weights
    twos_complement, // plain k-bit two's complement (p = k)
};

enum class FirstLayerMode
{
    digital,     // multi-bit inputs of layer 0 handled by exact digital MACs
    bit_serial,  // layer 0 evaluated on crossbars one input bit-plane at a time
};

/// Unit prices for one architectural component. `area` is per instance,
/// except for storage components where it is per byte.
struct CostEntry
{
    double energy = 0.0; // joules per event
    double area = 0.0;   // m^2 per instance (or per byte)

    friend bool operator==(const CostEntry &, const CostEntry &) = default;
};

/// Every component the ELA engine prices. Loading fails if any lacks a
/// cost-table entry.
inline constexpr std::array<std::string_view, 21> cost_components{
        "crossbar_array",
        "input_peripherals",
        "mux",
        "adc",
        "shift_add",
        "diff",
        "pe_input_buffer",
        "pe_accumulator",
        "pe_buffer",
        "tile_input_buffer",
        "tile_accumulator",
        "tile_buffer",
        "global_buffer",
        "global_accumulator",
        "pooling",
        "neuron_adder",
        "neuron_subtractor",
        "neuron_comparator",
        "vmem_cache",
        "noc_router",
        "htree",
};

/// Components whose `area` is priced per byte of capacity.
inline bool is_storage_component(std::string_view name)
{
    return name == "pe_input_buffer" || name == "pe_buffer" ||
            name == "tile_input_buffer" || name == "tile_buffer" ||
            name == "global_buffer" || name == "vmem_cache";
}

/// Illustrative 65 nm-class unit costs. These are not calibrated against
/// any silicon; replace them through `[cost.<component>]` sections.
inline std::map<std::string, CostEntry, std::less<>> default_cost_table()
{
    return {
            {"crossbar_array", {2.0e-12, 1.2e-10}},
            {"input_peripherals", {0.5e-12, 6.0e-11}},
            {"mux", {0.05e-12, 1.5e-11}},
            {"adc", {0.4e-12, 3.0e-11}},
            {"shift_add", {0.05e-12, 8.0e-12}},
            {"diff", {0.08e-12, 1.0e-11}},
            {"pe_input_buffer", {0.3e-12, 4.0e-12}},
            {"pe_accumulator", {0.1e-12, 2.0e-10}},
            {"pe_buffer", {0.3e-12, 4.0e-12}},
            {"tile_input_buffer", {0.5e-12, 4.0e-12}},
            {"tile_accumulator", {0.1e-12, 4.0e-10}},
            {"tile_buffer", {0.5e-12, 4.0e-12}},
            {"global_buffer", {1.0e-12, 4.0e-12}},
            {"global_accumulator", {0.1e-12, 8.0e-10}},
            {"pooling", {0.05e-12, 2.0e-10}},
            {"neuron_adder", {0.03e-12, 6.0e-11}},
            {"neuron_subtractor", {0.03e-12, 6.0e-11}},
            {"neuron_comparator", {0.02e-12, 3.0e-11}},
            {"vmem_cache", {0.4e-12, 4.0e-12}},
            {"noc_router", {1.5e-12, 4.0e-9}},
            {"htree", {0.2e-12, 1.0e-9}},
    };
}

/// Clock-cycle terms that compose the PE latency alpha.
struct CycleTable
{
    int input_load = 1;  // spike inputs from PE input buffer to crossbar rows
    int adc_read = 1;    // one crossbar read + flash conversion per mux group
    int accumulate = 1;  // PE accumulator
    int store = 1;       // PE buffer write
    int alpha_override = 0; // > 0 replaces the derived alpha

    friend bool operator==(const CycleTable &, const CycleTable &) = default;
};

struct NocConfig
{
    int width_bits = 32;
    int hop_cycles = 1;
    int grid_cols = 0; // 0: ceil(sqrt(tiles + 1))

    friend bool operator==(const NocConfig &, const NocConfig &) = default;
};

struct BufferSizes
{
    std::int64_t global = 20 * 1024;
    std::int64_t tile = 10 * 1024;
    std::int64_t pe = 5 * 1024;
    std::int64_t tile_input = 50 * 1024;
    std::int64_t pe_input = 30 * 1024;

    friend bool operator==(const BufferSizes &, const BufferSizes &) = default;
};

struct HardwareConfig
{
    // crossbar / circuit
    int crossbar_size = 64;   // X
    int mux_size = 8;
    int adc_bits = 4;         // h
    int adc_active_rows = 0;  // rho: expected max active rows, 0 means X
    int diff_speedup = 64;    // SU
    double wire_resistance = 5.0; // r, ohms
    double read_voltage = 0.1;    // V_read
    double supply_voltage = 0.9;

    // device (RRAM, 1 bit per cell)
    int bits_per_cell = 1;
    double r_on = 20e3;
    double r_off = 200e3;
    double sigma = 0.1;

    // architecture
    int crossbars_per_pe = 9; // N_C
    int pes_per_tile = 8;     // N_PE
    double clock_period = 4e-9; // 250 MHz
    std::vector<double> scheduling_factors{0.25}; // last value repeats
    BufferSizes buffers;
    NocConfig noc;
    CycleTable cycles;

    // NICE / inference
    WeightEncoding encoding = WeightEncoding::ni_aware;
    FirstLayerMode first_layer = FirstLayerMode::digital;
    double analytic_sparsity = 0.9;

    std::map<std::string, CostEntry, std::less<>> costs = default_cost_table();
    std::uint64_t seed = 1;

    [[nodiscard]] double g_max() const { return 1.0 / r_on; }
    [[nodiscard]] double g_min() const
    {
        return std::isinf(r_off) ? 0.0 : 1.0 / r_off;
    }
    [[nodiscard]] int levels() const { return (1 << bits_per_cell) - 1; }
    [[nodiscard]] int effective_active_rows() const
    {
        return adc_active_rows > 0 ? std::min(adc_active_rows, crossbar_size)
                                   : crossbar_size;
    }

    /// Scheduling factor of the i-th compute layer.
    [[nodiscard]] double scheduling_factor(std::size_t compute_index) const
    {
        if (scheduling_factors.empty())
        {
            return 1.0;
        }
        return scheduling_factors[std::min(compute_index,
                scheduling_factors.size() - 1)];
    }

    [[nodiscard]] const CostEntry &cost(std::string_view component) const
    {
        const auto it = costs.find(component);
        if (it == costs.end())
        {
            throw Error("no cost-table entry for '" + std::string(component) + "'");
        }
        return it->second;
    }

    friend bool operator==(const HardwareConfig &, const HardwareConfig &) = default;
};

inline bool is_power_of_two(std::int64_t v)
{
    return v > 0 && (v & (v - 1)) == 0;
}

inline void validate(const HardwareConfig &hw)
{
    const int x = hw.crossbar_size;
    if (!is_power_of_two(x) || x < 8)
    {
        throw Error("crossbar size X must be a power of two >= 8");
    }
    if (hw.diff_speedup < 1 || hw.diff_speedup > x || x % hw.diff_speedup != 0)
    {
        throw Error("DIFF speedup SU must divide X");
    }
    if (hw.mux_size < 1 || x % hw.mux_size != 0)
    {
        throw Error("mux size must divide X");
    }
    if (hw.adc_bits < 1 || hw.adc_bits > 30)
    {
        throw Error("ADC bits must be in [1, 30]");
    }
    if (hw.adc_active_rows < 0)
    {
        throw Error("adc active rows must be >= 0");
    }
    if (hw.bits_per_cell < 1 || hw.bits_per_cell > 8)
    {
        throw Error("bits per cell must be in [1, 8]");
    }
    if (!(hw.r_on > 0.0) || !(hw.r_on < hw.r_off))
    {
        throw Error("device resistances need 0 < R_on < R_off");
    }
    if (!(hw.wire_resistance >= 0.0) || std::isinf(hw.wire_resistance))
    {
        throw Error("wire resistance must be finite and >= 0");
    }
    if (!(hw.sigma >= 0.0))
    {
        throw Error("variation sigma must be >= 0");
    }
    if (!(hw.read_voltage > 0.0) || !(hw.clock_period > 0.0))
    {
        throw Error("read voltage and clock period must be positive");
    }
    if (hw.crossbars_per_pe < 1 || hw.pes_per_tile < 1)
    {
        throw Error("crossbars per PE and PEs per tile must be positive");
    }
    if (hw.scheduling_factors.empty())
    {
        throw Error("at least one scheduling factor is required");
    }
    for (const auto f : hw.scheduling_factors)
    {
        if (!(f > 0.0 && f <= 1.0))
        {
            throw Error("scheduling factors must lie in (0, 1]");
        }
    }
    if (hw.noc.width_bits < 1 || hw.noc.hop_cycles < 0 || hw.noc.grid_cols < 0)
    {
        throw Error("invalid NoC parameters");
    }
    const auto &c = hw.cycles;
    if (c.input_load < 0 || c.adc_read < 0 || c.accumulate < 0 || c.store < 0 ||
            c.alpha_override < 0)
    {
        throw Error("cycle-table entries must be >= 0");
    }
    if (!(hw.analytic_sparsity >= 0.0 && hw.analytic_sparsity <= 1.0))
    {
        throw Error("analytic sparsity must lie in [0, 1]");
    }
    for (const auto name : cost_components)
    {
        const auto it = hw.costs.find(name);
        if (it == hw.costs.end())
        {
            throw Error("missing cost-table entry '" + std::string(name) + "'");
        }
        if (!(it->second.energy >= 0.0) || !(it->second.area >= 0.0))
        {
            throw Error("negative cost for '" + std::string(name) + "'");
        }
    }
    for (const auto &[name, entry] : hw.costs)
    {
        bool known = false;
        for (const auto c_name : cost_components)
        {
            known = known || c_name == name;
        }
        if (!known)
        {
            throw Error("unknown cost component '" + name + "'");
        }
    }
}

namespace detail {

inline std::vector<double> parse_double_list(const KvSection &s,
        std::string_view key)
{
    std::vector<double> out;
    for (const auto &item : split(s.get(key), ','))
    {
        out.push_back(s.parse_double(item, key));
    }
    return out;
}

inline int get_int32(const KvSection &s, std::string_view key, int fallback)
{
    const auto v = s.get_int(key, fallback);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    {
        throw Error("value of '" + std::string(key) + "' out of range");
    }
    return static_cast<int>(v);
}

inline const std::vector<std::string_view> &known_keys(std::string_view section)
{
    static const std::map<std::string_view, std::vector<std::string_view>> keys{
            {"crossbar", {"size", "mux_size", "adc_bits", "adc_active_rows",
                                 "diff_speedup", "wire_resistance",
                                 "read_voltage", "supply_voltage"}},
            {"device", {"bits_per_cell", "r_on", "r_off", "sigma"}},
            {"architecture", {"crossbars_per_pe", "pes_per_tile",
                                     "clock_period", "clock_frequency",
                                     "scheduling_factor"}},
            {"buffers", {"global", "tile", "pe", "tile_input", "pe_input"}},
            {"noc", {"width", "hop_cycles", "grid_cols"}},
            {"cycles", {"input_load", "adc_read", "accumulate", "store", "alpha"}},
            {"nice", {"encoding", "first_layer"}},
            {"run", {"seed", "analytic_sparsity"}},
            {"cost", {"defaults"}},
    };
    static const std::vector<std::string_view> none;
    const auto it = keys.find(section);
    return it == keys.end() ? none : it->second;
}

} // namespace detail

/// Builds a config from parsed text; defaults apply to absent keys.
inline HardwareConfig parse_config(const KvDocument &doc)
{
    HardwareConfig hw;
    for (const auto &s : doc.sections())
    {
        if (s.name().empty())
        {
            if (!s.entries().empty())
            {
                throw Error("hw config keys must sit inside a section");
            }
            continue;
        }
        if (s.name().rfind("cost.", 0) == 0)
        {
            continue;
        }
        const auto &keys = detail::known_keys(s.name());
        if (keys.empty())
        {
            throw Error("unknown hw config section [" + s.name() + "]");
        }
        for (const auto &[k, v] : s.entries())
        {
            bool ok = false;
            for (const auto known : keys)
            {
                ok = ok || known == k;
            }
            if (!ok)
            {
                throw Error("unknown key '" + k + "' in [" + s.name() + "]");
            }
        }
    }

    if (const auto *s = doc.find("crossbar"))
    {
        hw.crossbar_size = detail::get_int32(*s, "size", hw.crossbar_size);
        hw.mux_size = detail::get_int32(*s, "mux_size", hw.mux_size);
        hw.adc_bits = detail::get_int32(*s, "adc_bits", hw.adc_bits);
        hw.adc_active_rows = detail::get_int32(*s, "adc_active_rows", hw.adc_active_rows);
        hw.diff_speedup = detail::get_int32(*s, "diff_speedup", hw.diff_speedup);
        hw.wire_resistance = s->get_double("wire_resistance", hw.wire_resistance);
        hw.read_voltage = s->get_double("read_voltage", hw.read_voltage);
        hw.supply_voltage = s->get_double("supply_voltage", hw.supply_voltage);
    }
    if (const auto *s = doc.find("device"))
    {
        hw.bits_per_cell = detail::get_int32(*s, "bits_per_cell", hw.bits_per_cell);
        hw.r_on = s->get_double("r_on", hw.r_on);
        hw.r_off = s->get_double("r_off", hw.r_off);
        hw.sigma = s->get_double("sigma", hw.sigma);
    }
    if (const auto *s = doc.find("architecture"))
    {
        hw.crossbars_per_pe = detail::get_int32(*s, "crossbars_per_pe", hw.crossbars_per_pe);
        hw.pes_per_tile = detail::get_int32(*s, "pes_per_tile", hw.pes_per_tile);
        if (s->has("clock_period") && s->has("clock_frequency"))
        {
            throw Error("give clock_period or clock_frequency, not both");
        }
        hw.clock_period = s->get_double("clock_period", hw.clock_period);
        if (s->has("clock_frequency"))
        {
            hw.clock_period = 1.0 / s->get_double("clock_frequency");
        }
        if (s->has("scheduling_factor"))
        {
            hw.scheduling_factors = detail::parse_double_list(*s, "scheduling_factor");
        }
    }
    if (const auto *s = doc.find("buffers"))
    {
        hw.buffers.global = s->get_int("global", hw.buffers.global);
        hw.buffers.tile = s->get_int("tile", hw.buffers.tile);
        hw.buffers.pe = s->get_int("pe", hw.buffers.pe);
        hw.buffers.tile_input = s->get_int("tile_input", hw.buffers.tile_input);
        hw.buffers.pe_input = s->get_int("pe_input", hw.buffers.pe_input);
    }
    if (const auto *s = doc.find("noc"))
    {
        hw.noc.width_bits = detail::get_int32(*s, "width", hw.noc.width_bits);
        hw.noc.hop_cycles = detail::get_int32(*s, "hop_cycles", hw.noc.hop_cycles);
        hw.noc.grid_cols = detail::get_int32(*s, "grid_cols", hw.noc.grid_cols);
    }
    if (const auto *s = doc.find("cycles"))
    {
        hw.cycles.input_load = detail::get_int32(*s, "input_load", hw.cycles.input_load);
        hw.cycles.adc_read = detail::get_int32(*s, "adc_read", hw.cycles.adc_read);
        hw.cycles.accumulate = detail::get_int32(*s, "accumulate", hw.cycles.accumulate);
        hw.cycles.store = detail::get_int32(*s, "store", hw.cycles.store);
        hw.cycles.alpha_override = detail::get_int32(*s, "alpha", hw.cycles.alpha_override);
    }
    if (const auto *s = doc.find("nice"))
    {
        const auto enc = s->get_string("encoding", "ni_aware");
        if (enc == "ni_aware")
            hw.encoding = WeightEncoding::ni_aware;
        else if (enc == "twos_complement")
            hw.encoding = WeightEncoding::twos_complement;
        else
            throw Error("unknown encoding '" + enc + "'");
        const auto fl = s->get_string("first_layer", "digital");
        if (fl == "digital")
            hw.first_layer = FirstLayerMode::digital;
        else if (fl == "bit_serial")
            hw.first_layer = FirstLayerMode::bit_serial;
        else
            throw Error("unknown first_layer mode '" + fl + "'");
    }
    if (const auto *s = doc.find("run"))
    {
        const auto seed = s->get_int("seed", static_cast<std::int64_t>(hw.seed));
        if (seed < 0)
        {
            throw Error("seed must be >= 0");
        }
        hw.seed = static_cast<std::uint64_t>(seed);
        hw.analytic_sparsity = s->get_double("analytic_sparsity", hw.analytic_sparsity);
    }
    if (const auto *s = doc.find("cost"))
    {
        const auto d = s->get_string("defaults", "shipped");
        if (d == "none")
            hw.costs.clear();
        else if (d != "shipped")
            throw Error("cost defaults must be 'shipped' or 'none'");
    }
    for (const auto &s : doc.sections())
    {
        if (s.name().rfind("cost.", 0) != 0)
        {
            continue;
        }
        const auto name = s.name().substr(5);
        for (const auto &[k, v] : s.entries())
        {
            if (k != "energy" && k != "area")
            {
                throw Error("unknown key '" + k + "' in [" + s.name() + "]");
            }
        }
        auto entry = hw.costs.count(name) ? hw.costs[name] : CostEntry{};
        if (!hw.costs.count(name) && (!s.has("energy") || !s.has("area")))
        {
            throw Error("cost entry [" + s.name() + "] needs energy and area");
        }
        entry.energy = s.get_double("energy", entry.energy);
        entry.area = s.get_double("area", entry.area);
        hw.costs[name] = entry;
    }
    validate(hw);
    return hw;
}

inline HardwareConfig load_config(const std::filesystem::path &path)
{
    return parse_config(KvDocument::read(path));
}

/// Canonical text form; `parse_config(write_config(hw)) == hw`.
inline std::string write_config(const HardwareConfig &hw)
{
    KvDocument doc;
    auto &xb = doc.section("crossbar");
    xb.set("size", hw.crossbar_size);
    xb.set("mux_size", hw.mux_size);
    xb.set("adc_bits", hw.adc_bits);
    xb.set("adc_active_rows", hw.adc_active_rows);
    xb.set("diff_speedup", hw.diff_speedup);
    xb.set("wire_resistance", format_double(hw.wire_resistance));
    xb.set("read_voltage", format_double(hw.read_voltage));
    xb.set("supply_voltage", format_double(hw.supply_voltage));
    auto &dev = doc.section("device");
    dev.set("bits_per_cell", hw.bits_per_cell);
    dev.set("r_on", format_double(hw.r_on));
    dev.set("r_off", format_double(hw.r_off));
    dev.set("sigma", format_double(hw.sigma));
    auto &arch = doc.section("architecture");
    arch.set("crossbars_per_pe", hw.crossbars_per_pe);
    arch.set("pes_per_tile", hw.pes_per_tile);
    arch.set("clock_period", format_double(hw.clock_period));
    std::string factors;
    for (std::size_t i = 0; i < hw.scheduling_factors.size(); ++i)
    {
        factors += (i ? ", " : "") + format_double(hw.scheduling_factors[i]);
    }
    arch.set("scheduling_factor", factors);
    auto &buf = doc.section("buffers");
    buf.set("global", hw.buffers.global);
    buf.set("tile", hw.buffers.tile);
    buf.set("pe", hw.buffers.pe);
    buf.set("tile_input", hw.buffers.tile_input);
    buf.set("pe_input", hw.buffers.pe_input);
    auto &noc = doc.section("noc");
    noc.set("width", hw.noc.width_bits);
    noc.set("hop_cycles", hw.noc.hop_cycles);
    noc.set("grid_cols", hw.noc.grid_cols);
    auto &cyc = doc.section("cycles");
    cyc.set("input_load", hw.cycles.input_load);
    cyc.set("adc_read", hw.cycles.adc_read);
    cyc.set("accumulate", hw.cycles.accumulate);
    cyc.set("store", hw.cycles.store);
    cyc.set("alpha", hw.cycles.alpha_override);
    auto &nice = doc.section("nice");
    nice.set("encoding", hw.encoding == WeightEncoding::ni_aware ? "ni_aware"
                                                                 : "twos_complement");
    nice.set("first_layer", hw.first_layer == FirstLayerMode::digital ? "digital"
                                                                      : "bit_serial");
    auto &run = doc.section("run");
    run.set("seed", static_cast<std::int64_t>(hw.seed));
    run.set("analytic_sparsity", format_double(hw.analytic_sparsity));
    doc.section("cost").set("defaults", "none");
    for (const auto &[name, entry] : hw.costs)
    {
        auto &c = doc.section("cost." + name);
        c.set("energy", format_double(entry.energy));
        c.set("area", format_double(entry.area));
    }
    return doc.str("spikesim hardware config");
}

} // namespace spikesim
