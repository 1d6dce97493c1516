#pragma once

// Energy, latency and area estimation.
//
// Latency of compute layer i for one time-step:
//   tile cycles  = ceil(alpha * N_ops,i / Par_i)
//   NoC latency  = N_p,i * hops_i * hop_cycles * clock,  N_p,i = ceil(A_i * k_mem / width)
// The pipelined schedule runs T * N_ops,i ops per layer; layer i+1 is
// released once layer i has finished a scheduling-factor share of its ops.
//
// Energy is a sum of (event count x unit energy) and area a sum of
// (instances x unit area) over the components of the cost table.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "spikesim/error.hpp"
#include "spikesim/hardware_config.hpp"
#include "spikesim/mapper.hpp"
#include "spikesim/model.hpp"

namespace spikesim {

/// PE cycles per op: input load, mux_size sequential ADC groups each
/// followed by the DIFF pass (X/SU cycles), then accumulate and store.
inline std::int64_t pe_latency_alpha(const HardwareConfig &hw)
{
    const auto &c = hw.cycles;
    if (c.alpha_override > 0)
    {
        return c.alpha_override;
    }
    const std::int64_t diff = hw.crossbar_size / hw.diff_speedup;
    return c.input_load + std::int64_t{hw.mux_size} * (c.adc_read + diff) +
            c.accumulate + c.store;
}

/// Completion cycle of the j-th op (1-based) of a layer started at cycle 0.
inline std::int64_t op_completion(std::int64_t j, std::int64_t alpha, std::int64_t par)
{
    return ceil_div(j * alpha, par);
}

/// Ops completed by cycle `elapsed` (inverse of op_completion).
inline std::int64_t ops_completed(std::int64_t elapsed, std::int64_t alpha, std::int64_t par)
{
    return elapsed <= 0 ? 0 : (elapsed * par) / alpha;
}

/// Tile cycles of one layer for one time-step.
inline std::int64_t layer_tile_cycles(std::int64_t n_ops, std::int64_t alpha, std::int64_t par)
{
    return op_completion(n_ops, alpha, par);
}

/// Tile grid position, row-major; index total_tiles is the global node.
struct GridPos
{
    std::int64_t x = 0;
    std::int64_t y = 0;
};

inline std::int64_t noc_grid_cols(const HardwareConfig &hw, std::int64_t total_tiles)
{
    if (hw.noc.grid_cols > 0)
    {
        return hw.noc.grid_cols;
    }
    auto w = static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(total_tiles + 1))));
    while (w * w < total_tiles + 1) ++w;
    return std::max<std::int64_t>(w, 1);
}

inline GridPos tile_position(std::int64_t tile, std::int64_t cols)
{
    return {tile % cols, tile / cols};
}

inline std::int64_t manhattan_hops(GridPos a, GridPos b)
{
    return std::max<std::int64_t>(1, std::abs(a.x - b.x) + std::abs(a.y - b.y));
}

inline std::int64_t noc_packets(std::int64_t activations, int membrane_bits, int width_bits)
{
    return ceil_div(activations * membrane_bits, width_bits);
}

struct NocLayer
{
    std::int64_t packets = 0;
    std::int64_t hops = 0;
    std::int64_t cycles = 0; // per time-step
};

/// NoC traffic of every compute layer towards the first tile of the next
/// compute layer (the global node for the last one).
inline std::vector<NocLayer> noc_model(const ModelBundle &model, const MappedNetwork &net,
        const HardwareConfig &hw)
{
    const auto cols = noc_grid_cols(hw, net.total_tiles);
    std::vector<NocLayer> out;
    for (std::size_t i = 0; i < net.plans.size(); ++i)
    {
        const auto &p = net.plans[i];
        const auto dst = i + 1 < net.plans.size() ? net.plans[i + 1].first_tile : net.total_tiles;
        NocLayer n;
        n.packets = noc_packets(model.layers[p.layer].neuron_count(), model.membrane_bits,
                hw.noc.width_bits);
        n.hops = manhattan_hops(tile_position(p.first_tile, cols), tile_position(dst, cols));
        n.cycles = n.packets * n.hops * hw.noc.hop_cycles;
        out.push_back(n);
    }
    return out;
}

/// Threshold op count for a release: ceil(f * n), at least 1. Products that
/// are integers up to rounding noise count as integers.
inline std::int64_t release_ops(double factor, std::int64_t n)
{
    const double v = factor * static_cast<double>(n);
    const double r = std::nearbyint(v);
    const double m = std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v)) ? r : std::ceil(v);
    return std::clamp<std::int64_t>(static_cast<std::int64_t>(m), 1, n);
}

struct TraceEvent
{
    std::int64_t cycle = 0;
    std::vector<std::size_t> active;          // plan indices
    std::vector<std::int64_t> completed_ops; // per plan
};

struct ScheduleTrace
{
    std::vector<TraceEvent> timeline;
    std::vector<std::int64_t> total_ops;     // per plan, T * N_ops
    std::vector<std::int64_t> layer_start;   // cycles
    std::vector<std::int64_t> layer_end;     // cycles
    std::vector<std::int64_t> release_after; // ops of the previous layer; 0 for the first
    std::size_t steady_state_active = 0;
    std::vector<std::size_t> steady_state_layers; // plan indices
    std::int64_t vmem_bytes = 0;
    std::int64_t makespan = 0; // cycles
};

/// Per-layer schedule inputs, separated from the model so worked examples
/// can be replayed directly.
struct ScheduleLayer
{
    std::int64_t ops = 0; // total ops over the run
    std::int64_t par = 1;
    std::int64_t neurons = 0;
};

inline ScheduleTrace generate_trace(const std::vector<ScheduleLayer> &layers,
        std::int64_t alpha, const std::vector<double> &factors, int membrane_bits)
{
    if (layers.empty())
    {
        throw Error("nothing to schedule");
    }
    if (factors.empty())
    {
        throw Error("no scheduling factors");
    }
    const auto n = layers.size();
    auto factor = [&](std::size_t i) { return factors[std::min(i, factors.size() - 1)]; };

    ScheduleTrace tr;
    tr.layer_start.assign(n, 0);
    tr.layer_end.assign(n, 0);
    tr.release_after.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i)
    {
        const auto &l = layers[i];
        tr.total_ops.push_back(l.ops);
        const auto unconstrained = tr.layer_start[i] + op_completion(l.ops, alpha, l.par);
        // The last op needs the predecessor's final outputs.
        tr.layer_end[i] = i == 0 ? unconstrained
                                 : std::max(unconstrained,
                                           tr.layer_end[i - 1] + op_completion(1, alpha, l.par));
        if (i + 1 < n)
        {
            const auto m = release_ops(factor(i), l.ops);
            tr.release_after[i + 1] = m;
            tr.layer_start[i + 1] = m == l.ops ? tr.layer_end[i]
                                               : tr.layer_start[i] + op_completion(m, alpha, l.par);
        }
    }
    tr.makespan = *std::max_element(tr.layer_end.begin(), tr.layer_end.end());

    std::set<std::int64_t> stamps;
    for (std::size_t i = 0; i < n; ++i)
    {
        stamps.insert(tr.layer_start[i]);
        stamps.insert(tr.layer_end[i]);
    }
    std::int64_t best_bytes = -1;
    for (const auto t : stamps)
    {
        TraceEvent ev;
        ev.cycle = t;
        std::int64_t bytes = 0;
        for (std::size_t i = 0; i < n; ++i)
        {
            const auto &l = layers[i];
            std::int64_t done = 0;
            if (t >= tr.layer_end[i])
            {
                done = l.ops;
            }
            else
            {
                done = std::min(l.ops - 1, ops_completed(t - tr.layer_start[i], alpha, l.par));
            }
            ev.completed_ops.push_back(done);
            if (tr.layer_start[i] <= t && t < tr.layer_end[i])
            {
                ev.active.push_back(i);
                bytes += ceil_div(l.neurons * membrane_bits, 8);
            }
        }
        if (ev.active.size() > tr.steady_state_active ||
                (ev.active.size() == tr.steady_state_active && bytes > best_bytes))
        {
            tr.steady_state_active = ev.active.size();
            tr.steady_state_layers = ev.active;
            best_bytes = bytes;
        }
        tr.timeline.push_back(std::move(ev));
    }
    tr.vmem_bytes = std::max<std::int64_t>(best_bytes, 0);
    return tr;
}

inline std::vector<ScheduleLayer> schedule_layers(const ModelBundle &model,
        const MappedNetwork &net)
{
    std::vector<ScheduleLayer> out;
    for (const auto &p : net.plans)
    {
        out.push_back({model.timesteps * p.ops_per_channel, p.par,
                model.layers[p.layer].neuron_count()});
    }
    return out;
}

inline ScheduleTrace generate_trace(const ModelBundle &model, const MappedNetwork &net,
        const HardwareConfig &hw)
{
    return generate_trace(schedule_layers(model, net), pe_latency_alpha(hw),
            hw.scheduling_factors, model.membrane_bits);
}

/// Spike traffic per inference, per model layer.
struct LayerActivity
{
    double input_events = 0.0;
    double output_spikes = 0.0;
};

/// Activity assuming every hidden layer fires with density 1 - sparsity.
/// Layer 0 receives its full analog input every time-step.
inline std::vector<LayerActivity> analytic_activity(const ModelBundle &model, double sparsity)
{
    const double density = 1.0 - sparsity;
    std::vector<LayerActivity> out;
    for (std::size_t i = 0; i < model.layers.size(); ++i)
    {
        const auto &l = model.layers[i];
        LayerActivity a;
        const double t = model.timesteps;
        a.input_events = static_cast<double>(l.input_count()) * t * (i == 0 ? 1.0 : density);
        a.output_spikes = i + 1 == model.layers.size()
                ? 0.0
                : static_cast<double>(l.neuron_count()) * t * density;
        out.push_back(a);
    }
    return out;
}

struct LayerCost
{
    std::size_t layer = 0;
    std::int64_t tile_cycles = 0; // per time-step
    std::int64_t noc_packets = 0;
    std::int64_t noc_hops = 0;
    double tile_latency = 0.0; // seconds, per inference
    double noc_latency = 0.0;
    double latency = 0.0;
    double energy = 0.0; // joules, per inference
    double macs = 0.0;
};

struct ComponentCost
{
    double events = 0.0;
    double instances = 0.0; // bytes for storage components
    double energy = 0.0;
    double area = 0.0;
};

struct CostReport
{
    std::int64_t alpha = 0;
    std::vector<LayerCost> layers;
    std::map<std::string, ComponentCost, std::less<>> components;
    double total_energy = 0.0;
    double total_area = 0.0;
    double total_latency = 0.0; // seconds, per inference
    std::int64_t makespan_cycles = 0;
    std::int64_t total_tile_cycles = 0;
    double total_ops = 0.0; // 2 per MAC
    double edp = 0.0;
    double gops_per_um2 = 0.0;
    std::int64_t vmem_bytes = 0;
    bool analytic_activity = false;
};

/// Event counts and instance counts for every priced component, then the
/// summation. `activity` holds one entry per model layer.
inline CostReport evaluate_costs(const ModelBundle &model, const MappedNetwork &net,
        const HardwareConfig &hw, const ScheduleTrace &trace,
        const std::vector<LayerActivity> &activity, bool analytic = false)
{
    if (activity.size() != model.layers.size())
    {
        throw Error("activity counts missing for some layers");
    }
    if (trace.total_ops.size() != net.plans.size())
    {
        throw Error("trace does not match the mapping");
    }
    CostReport rep;
    rep.alpha = pe_latency_alpha(hw);
    rep.analytic_activity = analytic;
    rep.vmem_bytes = trace.vmem_bytes;
    rep.makespan_cycles = trace.makespan;
    for (const auto name : cost_components)
    {
        rep.components.emplace(std::string(name), ComponentCost{});
    }
    auto add_events = [&](std::string_view name, double n, LayerCost *lc) {
        auto &c = rep.components.find(name)->second;
        c.events += n;
        if (lc != nullptr)
        {
            lc->energy += n * hw.cost(name).energy;
        }
    };

    const double t = model.timesteps;
    const double x = hw.crossbar_size;
    const auto noc = noc_model(model, net, hw);
    const auto alpha = rep.alpha;

    for (std::size_t pi = 0; pi < net.plans.size(); ++pi)
    {
        const auto &p = net.plans[pi];
        const auto &l = model.layers[p.layer];
        const auto &act = activity[p.layer];
        const bool last = p.layer + 1 == model.layers.size();
        LayerCost lc;
        lc.layer = p.layer;
        lc.tile_cycles = layer_tile_cycles(p.ops_per_channel, alpha, p.par);
        lc.noc_packets = noc[pi].packets;
        lc.noc_hops = noc[pi].hops;
        lc.tile_latency = t * static_cast<double>(lc.tile_cycles) * hw.clock_period;
        lc.noc_latency = t * static_cast<double>(noc[pi].cycles) * hw.clock_period;
        lc.latency = lc.tile_latency + lc.noc_latency;
        lc.macs = t * static_cast<double>(p.ops_per_channel) * l.out_channels *
                l.in_channels * l.kernel_size * l.kernel_size;
        rep.total_tile_cycles += lc.tile_cycles;

        const double ops = t * static_cast<double>(p.ops_per_channel);
        const double reads = ops * static_cast<double>(p.crossbars);
        const double neurons = t * static_cast<double>(l.neuron_count());
        const double partials = ops * l.out_channels;
        add_events("crossbar_array", reads, &lc);
        add_events("input_peripherals", reads, &lc);
        add_events("mux", reads * x, &lc);
        add_events("adc", reads * x, &lc);
        add_events("shift_add", reads * x, &lc);
        add_events("diff", reads * p.channels_per_crossbar, &lc);
        add_events("htree", ops * static_cast<double>(p.pes), &lc);
        add_events("pe_input_buffer",
                act.input_events * p.kernel_positions * p.col_blocks, &lc);
        add_events("pe_accumulator", reads * p.channels_per_crossbar, &lc);
        add_events("pe_buffer", partials * static_cast<double>(p.pes), &lc);
        add_events("tile_input_buffer", act.input_events, &lc);
        add_events("tile_accumulator", partials * static_cast<double>(p.pes), &lc);
        add_events("tile_buffer", partials, &lc);
        add_events("global_accumulator", partials * static_cast<double>(p.tiles - 1), &lc);
        add_events("global_buffer", act.input_events + act.output_spikes, &lc);
        add_events("neuron_adder", neurons, &lc);
        add_events("neuron_subtractor",
                !last && l.activation == Activation::lif &&
                                l.leak.raw != (std::int64_t{1} << model.membrane_bits)
                        ? neurons
                        : 0.0,
                &lc);
        add_events("neuron_comparator", last ? 0.0 : neurons, &lc);
        add_events("vmem_cache", 2.0 * neurons, &lc);
        add_events("noc_router", t * static_cast<double>(noc[pi].packets * noc[pi].hops), &lc);
        rep.layers.push_back(lc);
    }
    for (std::size_t li = 0; li < model.layers.size(); ++li)
    {
        const auto &l = model.layers[li];
        if (l.kind != LayerKind::avgpool)
        {
            continue;
        }
        LayerCost lc;
        lc.layer = li;
        add_events("pooling", t * static_cast<double>(l.neuron_count()), &lc);
        add_events("global_buffer", activity[li].input_events + activity[li].output_spikes, &lc);
        rep.layers.push_back(lc);
    }
    std::stable_sort(rep.layers.begin(), rep.layers.end(),
            [](const LayerCost &a, const LayerCost &b) { return a.layer < b.layer; });

    double crossbars = 0.0;
    double pes = 0.0;
    for (const auto &p : net.plans)
    {
        pes += static_cast<double>(p.par * p.pes);
        crossbars += static_cast<double>(p.par * p.pes) * hw.crossbars_per_pe;
    }
    const double tiles = static_cast<double>(net.total_tiles);
    const double groups = x / hw.mux_size;
    const auto &b = hw.buffers;
    auto set_instances = [&](std::string_view name, double n) {
        rep.components.find(name)->second.instances = n;
    };
    set_instances("crossbar_array", crossbars);
    set_instances("input_peripherals", crossbars);
    set_instances("mux", crossbars * groups);
    set_instances("adc", crossbars * groups);
    set_instances("shift_add", crossbars * groups);
    set_instances("diff", crossbars);
    set_instances("htree", tiles);
    set_instances("pe_input_buffer", pes * static_cast<double>(b.pe_input));
    set_instances("pe_accumulator", pes);
    set_instances("pe_buffer", pes * static_cast<double>(b.pe));
    set_instances("tile_input_buffer", tiles * static_cast<double>(b.tile_input));
    set_instances("tile_accumulator", tiles);
    set_instances("tile_buffer", tiles * static_cast<double>(b.tile));
    set_instances("global_buffer", static_cast<double>(b.global));
    set_instances("global_accumulator", 1.0);
    set_instances("pooling", 1.0);
    set_instances("neuron_adder", tiles);
    set_instances("neuron_subtractor", tiles);
    set_instances("neuron_comparator", tiles);
    set_instances("vmem_cache", static_cast<double>(trace.vmem_bytes));
    set_instances("noc_router", tiles + 1.0);

    for (auto &[name, c] : rep.components)
    {
        const auto &unit = hw.cost(name);
        c.energy = c.events * unit.energy;
        c.area = c.instances * unit.area;
    }
    for (const auto name : cost_components)
    {
        const auto &c = rep.components.find(name)->second;
        rep.total_energy += c.energy;
        rep.total_area += c.area;
    }

    double noc_total = 0.0;
    for (const auto &lc : rep.layers)
    {
        noc_total += lc.noc_latency;
        rep.total_ops += 2.0 * lc.macs;
    }
    rep.total_latency = static_cast<double>(trace.makespan) * hw.clock_period + noc_total;
    rep.edp = rep.total_energy * rep.total_latency;
    const double area_um2 = rep.total_area * 1e12;
    rep.gops_per_um2 = rep.total_latency > 0.0 && area_um2 > 0.0
            ? rep.total_ops / rep.total_latency / 1e9 / area_um2
            : 0.0;
    return rep;
}

} // namespace spikesim
