#include <catch_amalgamated.hpp>

#include <random>
#include <set>

#include "oracles.hpp"
#include "spikesim/generator.hpp"
#include "spikesim/mapper.hpp"

using namespace spikesim;

namespace {

ModelBundle three_layer_example()
{
    auto s = preset_shape("conv3");
    s.weight_bits = 1;
    s.input_dim = 8;
    return random_model(s, 11);
}

HardwareConfig example_hw()
{
    HardwareConfig hw;
    hw.crossbar_size = 64;
    hw.pes_per_tile = 8;
    hw.crossbars_per_pe = 9;
    hw.bits_per_cell = 1;
    return hw;
}

} // namespace

TEST_CASE("three-layer example maps to PE (1,2,16), Par (8,4,1), 4 tiles", "[mapper]")
{
    const auto m = three_layer_example();
    const auto net = map_network(m, example_hw(), {false});
    REQUIRE(net.pe_counts() == std::vector<std::int64_t>{1, 2, 16});
    REQUIRE(net.par_counts() == std::vector<std::int64_t>{8, 4, 1});
    REQUIRE(net.total_tiles == 4);
    REQUIRE(net.plans[0].crossbars == 9);
    REQUIRE(net.plans[1].crossbars == 18);
    REQUIRE(net.plans[2].crossbars == 2 * 8 * 9);
}

TEST_CASE("small linear layer fits one crossbar", "[mapper]")
{
    ModelShape s;
    s.layers = "l10";
    s.in_channels = 10;
    s.input_dim = 1;
    s.weight_bits = 4;
    const auto lin = random_model(s, 5);
    auto hw = example_hw();
    for (const int b : {1, 2, 4})
    {
        hw.bits_per_cell = b;
        const auto net = map_network(lin, hw);
        REQUIRE(net.slices.size() == 1);
        REQUIRE(net.slices[0].valid_rows == 10);
        REQUIRE(net.slices[0].valid_cols == 10 * (4 / b));
        REQUIRE(net.plans[0].pes == 1);
        REQUIRE(net.plans[0].par == hw.pes_per_tile);
    }
}

TEST_CASE("crossbar count follows the partition formula", "[mapper]")
{
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> ch(1, 300);
    std::uniform_int_distribution<int> kk(0, 2);
    for (int trial = 0; trial < 40; ++trial)
    {
        ModelShape s;
        s.in_channels = ch(rng);
        s.input_dim = 4;
        s.weight_bits = 4;
        s.layers = "c" + std::to_string(ch(rng)) + "k" + std::to_string(1 + 2 * kk(rng)) + ",l3";
        const auto m = random_model(s, rng());
        auto hw = example_hw();
        hw.bits_per_cell = 1 << kk(rng);
        const auto net = map_network(m, hw, {false});
        const auto &l = m.layers[0];
        const std::int64_t s_cols = 4 / hw.bits_per_cell;
        const std::int64_t per_xbar = 64 / s_cols;
        const auto expected = ceil_div(l.in_channels, 64) * ceil_div(l.out_channels, per_xbar) *
                l.kernel_size * l.kernel_size;
        REQUIRE(net.plans[0].crossbars == expected);
        REQUIRE(net.plans[0].pes == ceil_div(expected, 9));
        const auto pes = net.plans[0].pes;
        REQUIRE(net.plans[0].par == (pes <= 8 ? 8 / pes : 1));
        REQUIRE(net.plans[0].tiles == ceil_div(pes, 8));
    }
}

TEST_CASE("slices reassemble to the original weights", "[mapper]")
{
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> ch(1, 150);
    for (int trial = 0; trial < 30; ++trial)
    {
        ModelShape s;
        s.in_channels = ch(rng);
        s.input_dim = 4;
        s.weight_bits = trial % 2 ? 4 : 8;
        s.layers = "c" + std::to_string(ch(rng)) + ",l" + std::to_string(ch(rng));
        const auto m = random_model(s, rng());
        auto hw = example_hw();
        hw.bits_per_cell = 1 << (trial % 3);
        if (s.weight_bits % hw.bits_per_cell != 0) hw.bits_per_cell = 1;
        for (const auto enc : {WeightEncoding::ni_aware, WeightEncoding::twos_complement})
        {
            hw.encoding = enc;
            const auto net = map_network(m, hw);
            for (const auto li : m.compute_layers())
            {
                std::vector<int> seen;
                const auto w = oracle::unmap_layer(m, net, li, hw.bits_per_cell, seen);
                for (std::size_t i = 0; i < w.size(); ++i)
                {
                    REQUIRE(seen[i] == 1);
                    REQUIRE(w[i] == m.weights[li][i]);
                }
            }
        }
    }
}

TEST_CASE("populated cells equal weights times bit slices", "[mapper]")
{
    auto hw = example_hw();
    const auto toy = random_model(preset_shape("toy"), 4);
    for (const int b : {1, 2, 4})
    {
        hw.bits_per_cell = b;
        const auto net = map_network(toy, hw);
        std::int64_t cells = 0;
        for (const auto &sl : net.slices) cells += std::int64_t{sl.valid_rows} * sl.valid_cols;
        std::int64_t weights = 0;
        for (const auto li : toy.compute_layers()) weights += toy.layers[li].weight_count();
        REQUIRE(cells == weights * (4 / b));
    }
}

TEST_CASE("tiles never mix layers and placement is deterministic", "[mapper]")
{
    const auto m = random_model(preset_shape("vgg9"), 8);
    const auto hw = example_hw();
    const auto a = map_network(m, hw);
    const auto b = map_network(m, hw);
    std::map<int, std::size_t> owner;
    std::set<std::tuple<int, int, int>> used;
    REQUIRE(a.slices.size() == b.slices.size());
    for (std::size_t i = 0; i < a.slices.size(); ++i)
    {
        const auto &sl = a.slices[i];
        REQUIRE(sl.coord == b.slices[i].coord);
        const auto [it, fresh] = owner.emplace(sl.coord.tile, sl.layer);
        REQUIRE(it->second == sl.layer);
        REQUIRE(used.emplace(sl.coord.tile, sl.coord.pe, sl.coord.crossbar).second);
        REQUIRE(sl.coord.pe < hw.pes_per_tile);
        REQUIRE(sl.coord.crossbar < hw.crossbars_per_pe);
    }
    REQUIRE(static_cast<std::int64_t>(owner.size()) == a.total_tiles);
}

TEST_CASE("ops per output channel", "[mapper]")
{
    LayerSpec conv;
    conv.kind = LayerKind::conv;
    conv.kernel_size = 3;
    conv.stride = 1;
    conv.padding = 1;
    conv.input_dim = 32;
    REQUIRE(ops_per_output_channel(conv) == 1024);

    LayerSpec lin;
    lin.kind = LayerKind::linear;
    REQUIRE(ops_per_output_channel(lin) == 1);

    conv.input_dim = 8;
    conv.stride = 2;
    const auto side = oracle::window_positions(8, 3, 2, 1);
    REQUIRE(ops_per_output_channel(conv) == side * side);
    REQUIRE(side * side == 16);

    for (int dim = 3; dim <= 17; ++dim)
        for (int d = 1; d <= 3; ++d)
            for (int st = 1; st <= 3; ++st)
                for (int p = 0; p <= d / 2; ++p)
                {
                    conv.input_dim = dim;
                    conv.kernel_size = d;
                    conv.stride = st;
                    conv.padding = p;
                    const auto w = oracle::window_positions(dim, d, st, p);
                    REQUIRE(ops_per_output_channel(conv) == w * w);
                }
}

TEST_CASE("too many bit-slice columns is an error naming the deficit", "[mapper]")
{
    ModelShape s;
    s.layers = "l4";
    s.in_channels = 4;
    s.weight_bits = 8;
    const auto m = random_model(s, 1);
    HardwareConfig hw;
    hw.crossbar_size = 4;
    REQUIRE_THROWS_WITH(map_network(m, hw),
            Catch::Matchers::ContainsSubstring("deficit 4") &&
                    Catch::Matchers::ContainsSubstring("layer 0"));
}

TEST_CASE("mapping report lists every compute layer", "[mapper]")
{
    const auto m = three_layer_example();
    const auto csv = mapping_report_csv(m, map_network(m, example_hw(), {false}));
    REQUIRE(csv.rfind("layer,kind,crossbars,pes,par,tiles", 0) == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 4);
    REQUIRE(csv.find("2,conv,144,16,1,2,2,64,0") != std::string::npos);
}
