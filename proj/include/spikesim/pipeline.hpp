#pragma once

// End-to-end runs: load, map, optional inference, ELA, reports.

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikesim/dataset.hpp"
#include "spikesim/ela.hpp"
#include "spikesim/error.hpp"
#include "spikesim/generator.hpp"
#include "spikesim/hardware_config.hpp"
#include "spikesim/kv_file.hpp"
#include "spikesim/mapper.hpp"
#include "spikesim/model.hpp"
#include "spikesim/nice.hpp"
#include "spikesim/report.hpp"
#include "spikesim/snn_sim.hpp"

namespace spikesim {

struct Evaluation
{
    MappedNetwork net;
    ScheduleTrace trace;
    CostReport cost;
    std::map<std::string, InferenceResult> accuracy;
};

inline bool dataset_fits(const ModelBundle &m, const Dataset &d)
{
    const auto &l = m.layers.front();
    return d.channels == l.in_channels && d.input_dim == l.input_dim &&
            d.classes <= m.layers.back().neuron_count();
}

/// Runs the requested inference modes (none when `data` is null) and the
/// cost model. Activity for energy comes from the nonideal run, else the
/// ideal run, else the analytic sparsity.
inline Evaluation evaluate(const ModelBundle &model, const HardwareConfig &hw,
        const Dataset *data, const std::vector<InferenceMode> &modes)
{
    validate(model);
    validate(hw);
    bool nonideal = false;
    for (const auto m : modes)
    {
        nonideal = nonideal || m == InferenceMode::nonideal;
    }
    nonideal = nonideal && data != nullptr;

    Evaluation ev;
    ev.net = map_network(model, hw, {nonideal});
    if (nonideal)
    {
        program_conductances(ev.net, hw);
    }
    const InferenceResult *measured = nullptr;
    if (data != nullptr)
    {
        for (const auto m : modes)
        {
            auto &r = ev.accuracy[to_string(m)];
            r = run_inference(model, &ev.net, hw, *data, m);
        }
        const auto it = ev.accuracy.find("nonideal");
        measured = it != ev.accuracy.end() ? &it->second : &ev.accuracy.begin()->second;
    }
    std::vector<LayerActivity> activity;
    if (measured != nullptr)
    {
        for (std::size_t i = 0; i < model.layers.size(); ++i)
        {
            activity.push_back({measured->input_events[i], measured->output_spikes[i]});
        }
    }
    else
    {
        activity = analytic_activity(model, hw.analytic_sparsity);
    }
    ev.trace = generate_trace(model, ev.net, hw);
    ev.cost = evaluate_costs(model, ev.net, hw, ev.trace, activity, measured == nullptr);
    return ev;
}

/// Rebuilds the layer chain for a new input side and/or first-conv width
/// (0 keeps the current value). Weights are tiled: each new index reads the
/// old weight at the index taken modulo the old extent.
inline ModelBundle reshape_model(const ModelBundle &src, int input_dim, int conv1)
{
    ModelBundle m = src;
    int dim = input_dim > 0 ? input_dim : src.layers.front().input_dim;
    int channels = src.layers.front().in_channels;
    bool first_conv = true;
    for (std::size_t i = 0; i < m.layers.size(); ++i)
    {
        auto &l = m.layers[i];
        const auto &old = src.layers[i];
        if (l.kind == LayerKind::linear)
        {
            l.in_channels = channels * dim * dim;
        }
        else
        {
            l.in_channels = channels;
            l.input_dim = dim;
        }
        if (l.kind == LayerKind::avgpool)
        {
            l.out_channels = channels;
        }
        else if (l.kind == LayerKind::conv && first_conv)
        {
            first_conv = false;
            if (conv1 > 0)
            {
                l.out_channels = conv1;
            }
        }
        if (l.output_dim() < 1)
        {
            throw Error("reshaped layer has no output", i);
        }
        if (l.is_compute())
        {
            std::vector<std::int8_t> w(static_cast<std::size_t>(l.weight_count()));
            for (int n = 0; n < l.out_channels; ++n)
            {
                for (int c = 0; c < l.in_channels; ++c)
                {
                    for (int r = 0; r < l.kernel_size; ++r)
                    {
                        for (int k = 0; k < l.kernel_size; ++k)
                        {
                            w[l.weight_index(n, c, r, k)] = src.weights[i][old.weight_index(
                                    n % old.out_channels, c % old.in_channels, r, k)];
                        }
                    }
                }
            }
            m.weights[i] = std::move(w);
        }
        channels = l.out_channels;
        dim = l.output_dim();
    }
    validate(m);
    return m;
}

struct RunManifest
{
    std::string model;
    std::string hw;      // empty: built-in defaults
    std::string dataset; // empty: no inference
    std::string mode = "nonideal"; // ideal | nonideal | both
    bool ela_only = false;
    std::optional<std::uint64_t> seed;
    std::vector<double> sched_factors; // empty: from hw
    std::vector<int> sweep_x;
    std::vector<int> sweep_conv1;
    std::vector<int> sweep_input_dim;
    std::vector<double> sweep_sched;

    [[nodiscard]] bool has_sweep() const
    {
        return !sweep_x.empty() || !sweep_conv1.empty() || !sweep_input_dim.empty() ||
                !sweep_sched.empty();
    }
};

namespace detail {

template <class T>
std::string join_list(const std::vector<T> &v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        if (i) out += ", ";
        if constexpr (std::is_floating_point_v<T>)
        {
            out += format_double(v[i]);
        }
        else
        {
            out += std::to_string(v[i]);
        }
    }
    return out;
}

inline std::vector<double> parse_doubles(const std::string &s)
{
    std::vector<double> out;
    for (const auto &t : split(s, ','))
    {
        if (trim(t).empty()) continue;
        KvSection tmp("x");
        tmp.set("v", std::string(trim(t)));
        out.push_back(tmp.get_double("v"));
    }
    return out;
}

inline std::vector<int> parse_ints(const std::string &s)
{
    std::vector<int> out;
    for (const auto d : parse_doubles(s))
    {
        if (d != std::nearbyint(d))
        {
            throw Error("expected an integer list, got '" + s + "'");
        }
        out.push_back(static_cast<int>(d));
    }
    return out;
}

} // namespace detail

inline std::string write_manifest(const RunManifest &r)
{
    KvDocument doc;
    auto &run = doc.section("run");
    run.set("model", r.model);
    run.set("hw", r.hw);
    run.set("dataset", r.dataset);
    run.set("mode", r.mode);
    run.set("ela_only", r.ela_only ? 1 : 0);
    if (r.seed)
    {
        run.set("seed", static_cast<std::int64_t>(*r.seed));
    }
    run.set("scheduling_factor", detail::join_list(r.sched_factors));
    if (r.has_sweep())
    {
        auto &sw = doc.section("sweep");
        sw.set("x", detail::join_list(r.sweep_x));
        sw.set("conv1", detail::join_list(r.sweep_conv1));
        sw.set("input_dim", detail::join_list(r.sweep_input_dim));
        sw.set("sched", detail::join_list(r.sweep_sched));
    }
    return doc.str("spikesim run manifest");
}

inline RunManifest read_manifest(const std::filesystem::path &path)
{
    const auto doc = KvDocument::read(path);
    RunManifest r;
    const auto &run = doc.get("run");
    r.model = run.get("model");
    r.hw = run.get_string("hw", "");
    r.dataset = run.get_string("dataset", "");
    r.mode = run.get_string("mode", "nonideal");
    r.ela_only = run.get_int("ela_only", 0) != 0;
    if (run.has("seed"))
    {
        r.seed = static_cast<std::uint64_t>(run.get_int("seed"));
    }
    r.sched_factors = detail::parse_doubles(run.get_string("scheduling_factor", ""));
    if (const auto *sw = doc.find("sweep"))
    {
        r.sweep_x = detail::parse_ints(sw->get_string("x", ""));
        r.sweep_conv1 = detail::parse_ints(sw->get_string("conv1", ""));
        r.sweep_input_dim = detail::parse_ints(sw->get_string("input_dim", ""));
        r.sweep_sched = detail::parse_doubles(sw->get_string("sched", ""));
    }
    return r;
}

inline std::vector<InferenceMode> parse_modes(const std::string &mode)
{
    if (mode == "ideal") return {InferenceMode::ideal};
    if (mode == "nonideal") return {InferenceMode::nonideal};
    if (mode == "both") return {InferenceMode::ideal, InferenceMode::nonideal};
    throw Error("mode must be ideal, nonideal or both, got '" + mode + "'");
}

/// Hardware config of a manifest with its overrides applied.
inline HardwareConfig manifest_hw(const RunManifest &r)
{
    HardwareConfig hw = r.hw.empty() ? HardwareConfig{} : load_config(r.hw);
    if (r.seed)
    {
        hw.seed = *r.seed;
    }
    if (!r.sched_factors.empty())
    {
        hw.scheduling_factors = r.sched_factors;
    }
    validate(hw);
    return hw;
}

/// Writes files into a scratch directory next to `out` and renames it into
/// place once complete, replacing any previous `out`.
class AtomicOutputDir
{
public:
    explicit AtomicOutputDir(std::filesystem::path out)
        : out_(std::move(out))
    {
        const auto parent = out_.has_parent_path() ? out_.parent_path()
                                                   : std::filesystem::path(".");
        std::filesystem::create_directories(parent);
        tmp_ = parent / ("." + out_.filename().string() + ".tmp-" + std::to_string(::getpid()));
        std::filesystem::remove_all(tmp_);
        std::filesystem::create_directories(tmp_);
    }

    AtomicOutputDir(const AtomicOutputDir &) = delete;
    AtomicOutputDir &operator=(const AtomicOutputDir &) = delete;

    ~AtomicOutputDir()
    {
        if (!committed_)
        {
            std::error_code ec;
            std::filesystem::remove_all(tmp_, ec);
        }
    }

    void write(const std::string &name, const std::string &content) const
    {
        std::ofstream f(tmp_ / name, std::ios::binary | std::ios::trunc);
        f << content;
        if (!f)
        {
            throw Error("cannot write " + (tmp_ / name).string());
        }
    }

    void commit()
    {
        std::filesystem::remove_all(out_);
        std::filesystem::rename(tmp_, out_);
        committed_ = true;
    }

private:
    std::filesystem::path out_;
    std::filesystem::path tmp_;
    bool committed_ = false;
};

/// One JSON line on stderr describing a failure.
inline void report_error(const std::exception &e)
{
    nlohmann::ordered_json j;
    j["error"] = e.what();
    if (const auto *se = dynamic_cast<const Error *>(&e); se != nullptr && se->layer())
    {
        j["layer"] = *se->layer();
    }
    std::cerr << j.dump() << '\n';
}

inline int cmd_eval(const RunManifest &r, const std::filesystem::path &out)
{
    if (r.model.empty())
    {
        throw Error("eval needs --model");
    }
    const auto model = load_model(r.model);
    const auto hw = manifest_hw(r);
    std::optional<Dataset> data;
    if (!r.ela_only)
    {
        if (r.dataset.empty())
        {
            throw Error("eval needs --dataset unless --ela-only is given");
        }
        data = load_dataset(r.dataset);
    }
    const auto ev = evaluate(model, hw, data ? &*data : nullptr, parse_modes(r.mode));

    AtomicOutputDir dir(out);
    RunManifest copy = r;
    copy.seed = hw.seed;
    dir.write("manifest.conf", write_manifest(copy));
    dir.write("hw.conf", write_config(hw));
    if (!ev.accuracy.empty())
    {
        dir.write("accuracy.json", dump_json(accuracy_json(model, hw, ev.accuracy)));
    }
    dir.write("cost_report.json", dump_json(cost_json(model, ev.cost)));
    dir.write("cost_report.csv", cost_csv(ev.cost));
    dir.write("mapping.csv", mapping_report_csv(model, ev.net));
    dir.write("trace_summary.json", dump_json(trace_json(model, ev.net, ev.trace)));
    dir.write("plot_layer_edp.csv", layer_edp_csv(ev.cost));
    dir.write("plot_components.csv", component_share_csv(ev.cost));
    dir.commit();
    return 0;
}

/// Seed for sweep point `index`, independent across points.
inline std::uint64_t point_seed(std::uint64_t seed, std::size_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
            static_cast<std::uint32_t>(index)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (std::uint64_t{words[1]} << 32) | words[0];
}

/// Crossbar size change keeping the DIFF pass length X/SU fixed.
inline HardwareConfig with_crossbar_size(HardwareConfig hw, int x)
{
    const int diff_len = hw.crossbar_size / hw.diff_speedup;
    hw.crossbar_size = x;
    hw.diff_speedup = std::max(1, x / diff_len);
    return hw;
}

struct SweepPoint
{
    std::size_t index = 0;
    int x = 0;
    int conv1 = 0;
    int input_dim = 0;
    double sched = 0.0;
};

inline std::vector<SweepPoint> sweep_points(const RunManifest &r, const HardwareConfig &hw,
        const ModelBundle &model)
{
    const std::vector<int> xs = r.sweep_x.empty() ? std::vector<int>{hw.crossbar_size} : r.sweep_x;
    int conv1 = 0;
    for (const auto &l : model.layers)
    {
        if (l.kind == LayerKind::conv)
        {
            conv1 = l.out_channels;
            break;
        }
    }
    const std::vector<int> c1 = r.sweep_conv1.empty() ? std::vector<int>{conv1} : r.sweep_conv1;
    const std::vector<int> dims = r.sweep_input_dim.empty()
            ? std::vector<int>{model.layers.front().input_dim}
            : r.sweep_input_dim;
    const std::vector<double> sched =
            r.sweep_sched.empty() ? std::vector<double>{0.0} : r.sweep_sched;
    std::vector<SweepPoint> out;
    for (const auto x : xs)
        for (const auto c : c1)
            for (const auto d : dims)
                for (const auto s : sched)
                    out.push_back({out.size(), x, c, d, s});
    return out;
}

inline int cmd_sweep(const RunManifest &r, const std::filesystem::path &out)
{
    if (!r.has_sweep())
    {
        throw Error("nothing to sweep");
    }
    if (r.model.empty())
    {
        throw Error("sweep needs --model");
    }
    const auto model = load_model(r.model);
    const auto base = manifest_hw(r);
    std::optional<Dataset> data;
    if (!r.ela_only && !r.dataset.empty())
    {
        data = load_dataset(r.dataset);
    }
    const auto modes = parse_modes(r.mode);

    std::ostringstream csv;
    csv << "point,x,conv1,input_dim,sched,status,activity,accuracy,energy_j,latency_s,"
           "area_m2,edp_js,tile_cycles,makespan_cycles,vmem_bytes,neuron_area_m2\n";
    int failures = 0;
    for (const auto &p : sweep_points(r, base, model))
    {
        csv << p.index << ',' << p.x << ',' << p.conv1 << ',' << p.input_dim << ','
            << (p.sched > 0.0 ? format_double(p.sched) : std::string("config")) << ',';
        try
        {
            auto hw = with_crossbar_size(base, p.x);
            hw.seed = point_seed(base.seed, p.index);
            if (p.sched > 0.0)
            {
                hw.scheduling_factors = {p.sched};
            }
            const auto m = reshape_model(model, p.input_dim, p.conv1);
            const Dataset *d = data && dataset_fits(m, *data) ? &*data : nullptr;
            const auto ev = evaluate(m, hw, d, modes);
            std::string acc;
            if (!ev.accuracy.empty())
            {
                const auto it = ev.accuracy.find("nonideal");
                acc = format_double((it != ev.accuracy.end() ? it->second
                                                             : ev.accuracy.begin()->second)
                                            .accuracy);
            }
            const auto &c = ev.cost;
            double neuron_area = 0.0;
            for (const auto name : {"neuron_adder", "neuron_subtractor", "neuron_comparator",
                         "vmem_cache"})
            {
                neuron_area += c.components.find(name)->second.area;
            }
            csv << "ok," << (c.analytic_activity ? "analytic" : "inference") << ',' << acc
                << ',' << format_double(c.total_energy) << ','
                << format_double(c.total_latency) << ',' << format_double(c.total_area)
                << ',' << format_double(c.edp) << ',' << c.total_tile_cycles << ','
                << c.makespan_cycles << ',' << c.vmem_bytes << ','
                << format_double(neuron_area) << '\n';
        }
        catch (const std::exception &e)
        {
            ++failures;
            report_error(e);
            std::string msg = e.what();
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            csv << "error: " << msg << ",,,,,,,,,,\n";
        }
    }
    AtomicOutputDir dir(out);
    RunManifest copy = r;
    copy.seed = base.seed;
    dir.write("manifest.conf", write_manifest(copy));
    dir.write("sweep.csv", csv.str());
    dir.commit();
    return failures == 0 ? 0 : 1;
}

struct GenOptions
{
    std::string kind;   // model | dataset
    std::string preset; // conv3 | vgg9 | toy (empty with layers)
    ModelShape shape;
    bool shape_overridden = false;
    int samples = 200;
    std::uint64_t seed = 1;
};

/// Uniform random pixels and labels for an arbitrary input shape.
inline Dataset random_dataset(int channels, int dim, int classes, int samples,
        std::uint64_t seed)
{
    Dataset d;
    d.channels = channels;
    d.input_dim = dim;
    d.classes = classes;
    d.input_bits = 4;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> px(0, 15);
    std::uniform_int_distribution<int> lbl(0, classes - 1);
    d.inputs.resize(static_cast<std::size_t>(samples) * d.sample_size());
    for (auto &v : d.inputs) v = static_cast<std::uint8_t>(px(rng));
    for (int s = 0; s < samples; ++s) d.labels.push_back(static_cast<std::uint8_t>(lbl(rng)));
    validate(d);
    return d;
}

inline int cmd_gen(const GenOptions &g, const std::filesystem::path &out)
{
    if (g.samples < 1)
    {
        throw Error("samples must be positive");
    }
    const bool toy = g.preset == "toy";
    ModelShape shape = g.shape;
    if (shape.layers.empty())
    {
        if (g.preset.empty())
        {
            throw Error("gen needs --preset or --layers");
        }
        shape = preset_shape(g.preset);
    }
    const auto tmp = out.string() + ".tmp-" + std::to_string(::getpid());
    std::filesystem::remove_all(tmp);
    if (g.kind == "model")
    {
        const auto m = toy && !g.shape_overridden ? toy_model(g.seed) : random_model(shape, g.seed);
        write_model(m, tmp);
    }
    else if (g.kind == "dataset")
    {
        if (toy)
        {
            write_dataset(toy_dataset({g.samples, g.seed}), tmp);
        }
        else
        {
            const auto layers = parse_layers(shape);
            write_dataset(random_dataset(shape.in_channels, shape.input_dim,
                                  static_cast<int>(layers.back().neuron_count()), g.samples,
                                  g.seed),
                    tmp);
        }
    }
    else
    {
        throw Error("gen kind must be model or dataset");
    }
    std::filesystem::remove_all(out);
    std::filesystem::rename(tmp, out);
    return 0;
}

} // namespace spikesim
