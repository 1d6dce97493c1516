#pragma once

// Report serialization. Every JSON report carries `schema_version`; CSVs
// start with a header row. Output depends only on the values, never on
// wall-clock time or paths, so identical runs give identical bytes.

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikesim/ela.hpp"
#include "spikesim/hardware_config.hpp"
#include "spikesim/kv_file.hpp"
#include "spikesim/mapper.hpp"
#include "spikesim/model.hpp"
#include "spikesim/snn_sim.hpp"

namespace spikesim {

inline constexpr int report_schema_version = 1;

inline std::string to_string(InferenceMode m)
{
    return m == InferenceMode::ideal ? "ideal" : "nonideal";
}

inline std::string to_string(FirstLayerMode m)
{
    return m == FirstLayerMode::digital ? "digital" : "bit_serial";
}

inline std::string to_string(WeightEncoding e)
{
    return e == WeightEncoding::ni_aware ? "ni_aware" : "twos_complement";
}

inline std::string dump_json(const nlohmann::ordered_json &j)
{
    return j.dump(2) + "\n";
}

inline nlohmann::ordered_json accuracy_json(const ModelBundle &model, const HardwareConfig &hw,
        const std::map<std::string, InferenceResult> &runs)
{
    nlohmann::ordered_json j;
    j["schema_version"] = report_schema_version;
    j["first_layer"] = to_string(hw.first_layer);
    j["weight_encoding"] = to_string(hw.encoding);
    j["timesteps"] = model.timesteps;
    auto &modes = j["modes"];
    modes = nlohmann::ordered_json::object();
    for (const auto &[name, r] : runs)
    {
        nlohmann::ordered_json m;
        m["samples"] = r.samples;
        m["correct"] = r.correct;
        m["accuracy"] = r.accuracy;
        m["layer_sparsity"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i + 1 < r.sparsity.size(); ++i)
        {
            m["layer_sparsity"].push_back({{"layer", i}, {"sparsity", r.sparsity[i]}});
        }
        m["predictions"] = r.predictions;
        modes[name] = std::move(m);
    }
    return j;
}

inline nlohmann::ordered_json cost_json(const ModelBundle &model, const CostReport &rep)
{
    nlohmann::ordered_json j;
    j["schema_version"] = report_schema_version;
    j["ops_per_mac"] = 2;
    j["activity"] = rep.analytic_activity ? "analytic" : "inference";
    j["alpha_cycles"] = rep.alpha;
    j["layers"] = nlohmann::ordered_json::array();
    for (const auto &l : rep.layers)
    {
        nlohmann::ordered_json e;
        e["layer"] = l.layer;
        e["kind"] = to_string(model.layers[l.layer].kind);
        e["tile_cycles_per_step"] = l.tile_cycles;
        e["noc_packets_per_step"] = l.noc_packets;
        e["noc_hops"] = l.noc_hops;
        e["tile_latency_s"] = l.tile_latency;
        e["noc_latency_s"] = l.noc_latency;
        e["latency_s"] = l.latency;
        e["energy_j"] = l.energy;
        e["macs"] = l.macs;
        j["layers"].push_back(std::move(e));
    }
    auto &comps = j["components"];
    comps = nlohmann::ordered_json::object();
    for (const auto name : cost_components)
    {
        const auto &c = rep.components.find(name)->second;
        comps[std::string(name)] = {{"events", c.events}, {"instances", c.instances},
                {"energy_j", c.energy}, {"area_m2", c.area}};
    }
    j["totals"] = {{"energy_j", rep.total_energy}, {"area_m2", rep.total_area},
            {"latency_s", rep.total_latency}, {"makespan_cycles", rep.makespan_cycles},
            {"tile_cycles_per_step", rep.total_tile_cycles}, {"ops", rep.total_ops},
            {"edp_js", rep.edp}, {"gops_per_um2", rep.gops_per_um2},
            {"vmem_bytes", rep.vmem_bytes}};
    return j;
}

inline std::string cost_csv(const CostReport &rep)
{
    std::ostringstream out;
    out << "component,events,instances,energy_j,area_m2\n";
    for (const auto name : cost_components)
    {
        const auto &c = rep.components.find(name)->second;
        out << name << ',' << format_double(c.events) << ',' << format_double(c.instances)
            << ',' << format_double(c.energy) << ',' << format_double(c.area) << '\n';
    }
    out << "total,,," << format_double(rep.total_energy) << ','
        << format_double(rep.total_area) << '\n';
    return out.str();
}

inline nlohmann::ordered_json trace_json(const ModelBundle &model, const MappedNetwork &net,
        const ScheduleTrace &tr)
{
    nlohmann::ordered_json j;
    j["schema_version"] = report_schema_version;
    j["steady_state_active"] = tr.steady_state_active;
    std::vector<std::size_t> steady;
    for (const auto i : tr.steady_state_layers)
    {
        steady.push_back(net.plans[i].layer);
    }
    j["steady_state_layers"] = steady;
    j["vmem_bytes"] = tr.vmem_bytes;
    j["makespan_cycles"] = tr.makespan;
    j["layers"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < net.plans.size(); ++i)
    {
        j["layers"].push_back({{"layer", net.plans[i].layer},
                {"neurons", model.layers[net.plans[i].layer].neuron_count()},
                {"total_ops", tr.total_ops[i]}, {"start_cycle", tr.layer_start[i]},
                {"end_cycle", tr.layer_end[i]},
                {"released_after_prev_ops", tr.release_after[i]}});
    }
    j["timeline"] = nlohmann::ordered_json::array();
    for (const auto &ev : tr.timeline)
    {
        std::vector<std::size_t> active;
        for (const auto i : ev.active)
        {
            active.push_back(net.plans[i].layer);
        }
        j["timeline"].push_back({{"cycle", ev.cycle}, {"active_layers", active},
                {"completed_ops", ev.completed_ops}});
    }
    return j;
}

/// Per-layer energy, latency and their product.
inline std::string layer_edp_csv(const CostReport &rep)
{
    std::ostringstream out;
    out << "layer,energy_j,latency_s,edp_js\n";
    for (const auto &l : rep.layers)
    {
        out << l.layer << ',' << format_double(l.energy) << ',' << format_double(l.latency)
            << ',' << format_double(l.energy * l.latency) << '\n';
    }
    return out.str();
}

/// Share of total energy and area per component.
inline std::string component_share_csv(const CostReport &rep)
{
    std::ostringstream out;
    out << "component,energy_fraction,area_fraction\n";
    for (const auto name : cost_components)
    {
        const auto &c = rep.components.find(name)->second;
        const double e = rep.total_energy > 0.0 ? c.energy / rep.total_energy : 0.0;
        const double a = rep.total_area > 0.0 ? c.area / rep.total_area : 0.0;
        out << name << ',' << format_double(e) << ',' << format_double(a) << '\n';
    }
    return out.str();
}

} // namespace spikesim
