// spikesim command-line front end.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spikesim/pipeline.hpp"

namespace {

constexpr const char *footer =
        "Environment:\n"
        "  SPIKESIM_WORKERS  worker threads for inference and conductance\n"
        "                    programming (default: hardware concurrency)";

void add_run_flags(CLI::App *cmd, spikesim::RunManifest &r, std::string &manifest,
        std::vector<double> &sched)
{
    cmd->add_option("--manifest", manifest, "Re-run from a manifest.conf written by a previous run");
    cmd->add_option("--model", r.model, "Model bundle directory");
    cmd->add_option("--hw", r.hw, "Hardware config file (defaults when omitted)");
    cmd->add_option("--dataset", r.dataset, "Dataset directory");
    cmd->add_option("--mode", r.mode, "Inference mode: ideal, nonideal or both")
            ->check(CLI::IsMember({"ideal", "nonideal", "both"}));
    cmd->add_flag("--ela-only", r.ela_only, "Skip inference; use analytic sparsity for energy");
    cmd->add_option("--seed", r.seed, "Override the config's RNG seed");
    cmd->add_option("--sched-factors", sched, "Per-layer scheduling factors, last one repeats")
            ->delimiter(',');
}

spikesim::RunManifest merge(const std::string &manifest_path, spikesim::RunManifest flags,
        const std::vector<double> &sched, const CLI::App *cmd)
{
    spikesim::RunManifest r = manifest_path.empty() ? flags : spikesim::read_manifest(manifest_path);
    if (!manifest_path.empty())
    {
        auto given = [&](const char *name) {
            const auto *o = cmd->get_option_no_throw(name);
            return o != nullptr && o->count() > 0;
        };
        if (given("--model")) r.model = flags.model;
        if (given("--hw")) r.hw = flags.hw;
        if (given("--dataset")) r.dataset = flags.dataset;
        if (given("--mode")) r.mode = flags.mode;
        if (given("--ela-only")) r.ela_only = true;
        if (given("--seed")) r.seed = flags.seed;
        if (given("--sweep-x")) r.sweep_x = flags.sweep_x;
        if (given("--sweep-conv1")) r.sweep_conv1 = flags.sweep_conv1;
        if (given("--sweep-input-dim")) r.sweep_input_dim = flags.sweep_input_dim;
        if (given("--sweep-sched")) r.sweep_sched = flags.sweep_sched;
    }
    if (!sched.empty())
    {
        r.sched_factors = sched;
    }
    return r;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"spikesim: map quantized SNNs onto analog crossbars and estimate accuracy, "
                 "energy, latency and area"};
    app.footer(footer);
    app.require_subcommand(1);

    spikesim::RunManifest run;
    std::string manifest;
    std::vector<double> sched;
    std::string out;

    auto *eval = app.add_subcommand("eval", "Map, simulate and cost one configuration");
    add_run_flags(eval, run, manifest, sched);
    eval->add_option("--out", out, "Output directory (written atomically)")->required();

    spikesim::RunManifest sweep_run;
    std::string sweep_manifest;
    std::vector<double> sweep_sched_flags;
    std::string sweep_out;
    auto *sweep = app.add_subcommand("sweep", "Evaluate the Cartesian product of sweep axes");
    add_run_flags(sweep, sweep_run, sweep_manifest, sweep_sched_flags);
    sweep->add_option("--sweep-x", sweep_run.sweep_x, "Crossbar sizes")->delimiter(',');
    sweep->add_option("--sweep-conv1", sweep_run.sweep_conv1,
                 "Output channels of the first conv layer")
            ->delimiter(',');
    sweep->add_option("--sweep-input-dim", sweep_run.sweep_input_dim, "Input spatial sizes")
            ->delimiter(',');
    sweep->add_option("--sweep-sched", sweep_run.sweep_sched,
                 "Scheduling factors applied to every layer")
            ->delimiter(',');
    sweep->add_option("--out", sweep_out, "Output directory (written atomically)")->required();

    spikesim::GenOptions gen;
    std::string gen_out;
    auto *gen_cmd = app.add_subcommand("gen", "Write a synthetic model bundle or dataset");
    gen_cmd->add_option("kind", gen.kind, "model or dataset")
            ->required()
            ->check(CLI::IsMember({"model", "dataset"}));
    gen_cmd->add_option("--preset", gen.preset, "conv3, vgg9 or toy (toy models are fitted)")
            ->check(CLI::IsMember({"conv3", "vgg9", "toy"}));
    gen_cmd->add_option("--layers", gen.shape.layers,
            "Layer string, e.g. c16,c32k3s2,p2,l10 (conv/pool/linear)");
    gen_cmd->add_option("--in-channels", gen.shape.in_channels, "Input channels");
    gen_cmd->add_option("--input-dim", gen.shape.input_dim, "Input spatial size");
    gen_cmd->add_option("--weight-bits", gen.shape.weight_bits, "Weight bits k");
    gen_cmd->add_option("--membrane-bits", gen.shape.membrane_bits, "Membrane bits k_mem");
    gen_cmd->add_option("--timesteps", gen.shape.timesteps, "Time-steps T");
    gen_cmd->add_option("--leak", gen.shape.leak, "LIF leak (1 gives IF neurons)");
    gen_cmd->add_option("--samples", gen.samples, "Dataset samples");
    gen_cmd->add_option("--seed", gen.seed, "RNG seed");
    gen_cmd->add_option("--out", gen_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (eval->parsed())
        {
            return spikesim::cmd_eval(merge(manifest, run, sched, eval), out);
        }
        if (sweep->parsed())
        {
            return spikesim::cmd_sweep(merge(sweep_manifest, sweep_run, sweep_sched_flags, sweep),
                    sweep_out);
        }
        if (gen_cmd->parsed())
        {
            gen.shape_overridden = !gen.shape.layers.empty();
            if (gen.preset.empty() && !gen.shape_overridden)
            {
                throw spikesim::Error("gen needs --preset or --layers");
            }
            if (!gen.preset.empty() && !gen.shape_overridden)
            {
                const auto preset = spikesim::preset_shape(gen.preset);
                gen.shape.layers = preset.layers;
                if (gen_cmd->count("--in-channels") == 0) gen.shape.in_channels = preset.in_channels;
                if (gen_cmd->count("--input-dim") == 0) gen.shape.input_dim = preset.input_dim;
            }
            return spikesim::cmd_gen(gen, gen_out);
        }
    }
    catch (const std::exception &e)
    {
        spikesim::report_error(e);
        return 1;
    }
    return 0;
}
