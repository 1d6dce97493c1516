#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spikesim/mapper.hpp"
#include "spikesim/model.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path work = fs::temp_directory_path() / "spikesim_test_cli";

std::string cli()
{
    return SPIKESIM_CLI_PATH;
}

int run(const std::string &args, const fs::path &err = work / "stderr.txt")
{
    const auto cmd = "\"" + cli() + "\" " + args + " > /dev/null 2> \"" + err.string() + "\"";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path &p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void require_same_tree(const fs::path &a, const fs::path &b)
{
    std::size_t files = 0;
    for (const auto &e : fs::directory_iterator(a))
    {
        ++files;
        INFO(e.path().filename());
        REQUIRE(slurp(e.path()) == slurp(b / e.path().filename()));
    }
    REQUIRE(files == static_cast<std::size_t>(
                             std::distance(fs::directory_iterator(b), fs::directory_iterator{})));
}

/// Column `name` of a CSV file, one string per data row.
std::vector<std::string> csv_column(const fs::path &p, const std::string &name)
{
    std::istringstream in(slurp(p));
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    {
        std::istringstream h(line);
        for (std::string cell; std::getline(h, cell, ',');) header.push_back(cell);
    }
    const auto col = static_cast<std::size_t>(
            std::find(header.begin(), header.end(), name) - header.begin());
    REQUIRE(col < header.size());
    std::vector<std::string> out;
    while (std::getline(in, line))
    {
        std::istringstream r(line);
        std::vector<std::string> cells;
        for (std::string cell; std::getline(r, cell, ',');) cells.push_back(cell);
        out.push_back(cells.at(col));
    }
    return out;
}

struct ToyBundle
{
    fs::path model = work / "toy_model";
    fs::path data = work / "toy_data";

    ToyBundle()
    {
        fs::create_directories(work);
        if (!fs::exists(model)) REQUIRE(run("gen model --preset toy --seed 3 --out " + model.string()) == 0);
        if (!fs::exists(data)) REQUIRE(run("gen dataset --preset toy --seed 3 --out " + data.string()) == 0);
    }
};

} // namespace

TEST_CASE("eval writes every report", "[cli]")
{
    const ToyBundle toy;
    const auto out = work / "eval_all";
    REQUIRE(run("eval --model " + toy.model.string() + " --dataset " + toy.data.string() +
                " --mode both --out " + out.string()) == 0);
    for (const char *f : {"manifest.conf", "hw.conf", "accuracy.json", "cost_report.json",
                 "cost_report.csv", "mapping.csv", "trace_summary.json", "plot_layer_edp.csv",
                 "plot_components.csv"})
    {
        INFO(f);
        REQUIRE(fs::is_regular_file(out / f));
    }
    REQUIRE(slurp(out / "accuracy.json").find("\"nonideal\"") != std::string::npos);
    for (const auto &e : fs::directory_iterator(work))
    {
        REQUIRE(e.path().filename().string().find(".tmp-") == std::string::npos);
    }
}

TEST_CASE("repeated and manifest-driven runs are byte-identical", "[cli]")
{
    const ToyBundle toy;
    const auto args = "eval --model " + toy.model.string() + " --dataset " + toy.data.string() +
            " --mode nonideal --seed 9 --out ";
    const auto a = work / "det_a";
    const auto b = work / "det_b";
    const auto c = work / "det_c";
    REQUIRE(run(args + a.string()) == 0);
    REQUIRE(run(args + b.string()) == 0);
    require_same_tree(a, b);
    REQUIRE(run("eval --manifest " + (a / "manifest.conf").string() + " --out " + c.string()) == 0);
    require_same_tree(a, c);
}

TEST_CASE("ELA-only runs skip inference", "[cli]")
{
    const ToyBundle toy;
    const auto out = work / "ela_only";
    REQUIRE(run("eval --model " + toy.model.string() + " --ela-only --out " + out.string()) == 0);
    REQUIRE_FALSE(fs::exists(out / "accuracy.json"));
    REQUIRE(slurp(out / "cost_report.json").find("\"activity\": \"analytic\"") != std::string::npos);
}

TEST_CASE("errors are reported as JSON on stderr", "[cli]")
{
    const ToyBundle toy;
    const auto err = work / "err.txt";
    REQUIRE(run("sweep --model " + toy.model.string() + " --out " + (work / "nothing").string(), err) != 0);
    REQUIRE(slurp(err).find("{\"error\":\"nothing to sweep\"}") != std::string::npos);
    REQUIRE(run("eval --model " + (work / "missing").string() + " --out " + (work / "x").string(), err) != 0);
    REQUIRE(slurp(err).rfind("{\"error\":", 0) == 0);
    REQUIRE_FALSE(fs::exists(work / "x"));
}

TEST_CASE("crossbar-size sweep lowers tile cycles", "[cli][sweep]")
{
    const auto model = work / "conv3_model";
    if (!fs::exists(model)) REQUIRE(run("gen model --preset conv3 --input-dim 8 --out " + model.string()) == 0);
    const auto out = work / "sweep_x";
    REQUIRE(run("sweep --model " + model.string() + " --ela-only --sweep-x 64,128,256 --out " + out.string()) == 0);
    const auto cycles = csv_column(out / "sweep.csv", "tile_cycles");
    REQUIRE(cycles.size() == 3);
    REQUIRE(std::stoll(cycles[0]) > std::stoll(cycles[1]));
    REQUIRE(std::stoll(cycles[1]) > std::stoll(cycles[2]));
    for (const auto &s : csv_column(out / "sweep.csv", "status")) REQUIRE(s == "ok");
}

TEST_CASE("narrower first layer shrinks neuron area and V_mem", "[cli][sweep]")
{
    const auto model = work / "conv3_model";
    if (!fs::exists(model)) REQUIRE(run("gen model --preset conv3 --input-dim 8 --out " + model.string()) == 0);
    const auto out = work / "sweep_conv1";
    REQUIRE(run("sweep --model " + model.string() + " --ela-only --sweep-conv1 8,64 --out " + out.string()) == 0);
    const auto area = csv_column(out / "sweep.csv", "neuron_area_m2");
    const auto vmem = csv_column(out / "sweep.csv", "vmem_bytes");
    REQUIRE(std::stod(area[0]) < std::stod(area[1]));
    REQUIRE(std::stoll(vmem[0]) < std::stoll(vmem[1]));
}

TEST_CASE("gen is deterministic and the preset maps to four tiles", "[cli][gen]")
{
    const auto a = work / "gen_a";
    const auto b = work / "gen_b";
    fs::remove_all(a);
    fs::remove_all(b);
    REQUIRE(run("gen model --preset conv3 --seed 5 --out " + a.string()) == 0);
    REQUIRE(run("gen model --preset conv3 --seed 5 --out " + b.string()) == 0);
    require_same_tree(a, b);

    auto m = spikesim::load_model(a);
    REQUIRE(m.layers.size() == 3);
    spikesim::HardwareConfig hw;
    hw.bits_per_cell = 4;
    m.weight_bits = 4;
    const auto net = spikesim::map_network(m, hw, {false});
    REQUIRE(net.total_tiles == 4);
}
