#include <catch_amalgamated.hpp>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "spikesim/encoding.hpp"
#include "spikesim/nice.hpp"

using namespace spikesim;

namespace {

HardwareConfig exact_hw()
{
    HardwareConfig hw;
    hw.wire_resistance = 0.0;
    hw.sigma = 0.0;
    hw.adc_bits = 16;
    return hw;
}

CrossbarSlice single_cell_slice(const HardwareConfig &hw, std::uint8_t digit)
{
    CrossbarSlice sl;
    const auto cells = static_cast<std::size_t>(hw.crossbar_size) * hw.crossbar_size;
    sl.encoded.assign(cells, 0);
    sl.sign_bits.assign(cells, 0);
    sl.encoded[0] = digit;
    sl.valid_rows = 1;
    sl.valid_cols = 1;
    return sl;
}

} // namespace

TEST_CASE("NI-aware encoding of the four-weight example", "[nice][encoding]")
{
    const std::vector<std::int8_t> w{-2, -1, 1, 2};
    const auto e = encode_layer(w, 4);
    REQUIRE(e.info.p == 1);
    REQUIRE(e.values == std::vector<std::uint8_t>{0, 1, 1, 2});
    REQUIRE(e.signs == std::vector<std::uint8_t>{1, 1, 0, 0});
}

TEST_CASE("all-positive layer encodes as identity", "[nice][encoding]")
{
    const std::vector<std::int8_t> w{0, 1, 3};
    const auto e = encode_layer(w, 4);
    REQUIRE(e.info.p == 0);
    REQUIRE(e.values == std::vector<std::uint8_t>{0, 1, 3});
}

TEST_CASE("encoding round-trips and never loses zero slices", "[nice][encoding]")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial)
    {
        const int k = 2 + trial % 7;
        std::uniform_int_distribution<int> d(-(1 << (k - 1)), (1 << (k - 1)) - 1);
        std::vector<std::int8_t> w(64);
        for (auto &v : w) v = static_cast<std::int8_t>(d(rng));
        for (const auto mode : {WeightEncoding::ni_aware, WeightEncoding::twos_complement})
        {
            const auto e = encode_layer(w, k, mode);
            for (std::size_t i = 0; i < w.size(); ++i)
            {
                REQUIRE(e.values[i] < (1U << k));
                REQUIRE(decode_weight(e.values[i], e.signs[i], e.info.p) == w[i]);
            }
        }
        const auto ni = encode_layer(w, k);
        REQUIRE(ni.info.zero_count_gain >= 0);
        REQUIRE(ni.info.p <= k - 1);
    }
}

TEST_CASE("digit-to-conductance map endpoints", "[nice][conductance]")
{
    HardwareConfig hw;
    hw.sigma = 0.0;
    std::mt19937_64 rng(1);

    auto g = weights_to_conductances(single_cell_slice(hw, 1), hw, rng);
    REQUIRE(g[0] == 1.0 / hw.r_on);
    REQUIRE(g[0] == Catch::Approx(50e-6));
    REQUIRE(g[1] == 1.0 / hw.r_off);

    hw.r_off = std::numeric_limits<double>::infinity();
    g = weights_to_conductances(single_cell_slice(hw, 0), hw, rng);
    REQUIRE(g[0] == 0.0);

    hw.bits_per_cell = 2;
    g = weights_to_conductances(single_cell_slice(hw, 3), hw, rng);
    REQUIRE(g[0] == 1.0 / hw.r_on);
}

TEST_CASE("variation stays within physical bounds and is seeded", "[nice][conductance]")
{
    HardwareConfig hw;
    hw.sigma = 0.5;
    std::mt19937_64 rng(7);
    auto m = fixture::linear_model(64, 64, 1, rng);
    hw.bits_per_cell = 1;
    auto a = map_network(m, hw);
    auto b = map_network(m, hw);
    program_conductances(a, hw);
    program_conductances(b, hw);
    REQUIRE(a.slices[0].conductances == b.slices[0].conductances);
    for (const auto g : a.slices[0].conductances)
    {
        REQUIRE(g >= 0.0);
        REQUIRE(g <= hw.g_max());
    }
    hw.seed = 2;
    auto c = map_network(m, hw);
    program_conductances(c, hw);
    REQUIRE(c.slices[0].conductances != a.slices[0].conductances);
}

TEST_CASE("column solve: Ohm's law and IR drop", "[nice][solver]")
{
    const std::vector<double> g{1e-3};
    const std::vector<double> v{0.1};
    REQUIRE(solve_column({g, v, 0.0}) == Catch::Approx(100e-6).epsilon(1e-15));

    HardwareConfig hw;
    const std::vector<double> gs(64, hw.g_max());
    const std::vector<double> vs(64, hw.read_voltage);
    const double ideal = 64 * hw.g_max() * hw.read_voltage;
    REQUIRE(solve_column({gs, vs, 5.0}) < ideal);
    REQUIRE(solve_column({gs, vs, 0.0}) == Catch::Approx(ideal));
}

TEST_CASE("column solve matches dense nodal analysis", "[nice][solver]")
{
    std::mt19937_64 rng(42);
    HardwareConfig hw;
    std::uniform_real_distribution<double> gd(hw.g_min(), hw.g_max());
    std::bernoulli_distribution on(0.5);
    for (int trial = 0; trial < 200; ++trial)
    {
        const std::size_t n = std::size_t{16} << (trial % 4);
        const double r = std::array<double, 4>{0.0, 1.0, 2.5, 5.0}[static_cast<std::size_t>(trial / 4 % 4)];
        std::vector<double> g(n);
        std::vector<double> v(n);
        for (std::size_t j = 0; j < n; ++j)
        {
            g[j] = gd(rng);
            v[j] = on(rng) ? hw.read_voltage : 0.0;
        }
        const double want = oracle::column_current_mna(g, v, r);
        const double got = solve_column({g, v, r});
        REQUIRE(std::abs(got - want) <= 1e-9 * std::max(std::abs(want), 1e-30));
        if (r > 0.0 && want > 0.0)
        {
            double ideal = 0.0;
            for (std::size_t j = 0; j < n; ++j) ideal += g[j] * v[j];
            REQUIRE(got < ideal);
        }

        std::vector<double> t(n);
        column_transfer(g, r, t);
        double via_transfer = 0.0;
        for (std::size_t j = 0; j < n; ++j) via_transfer += t[j] * v[j];
        REQUIRE(std::abs(via_transfer - want) <= 1e-9 * std::max(std::abs(want), 1e-30));
    }
}

TEST_CASE("solved node voltages satisfy the ladder equations", "[nice][solver]")
{
    const std::vector<double> g{4e-5, 1e-5, 5e-5, 2e-5};
    const std::vector<double> v{0.1, 0.0, 0.1, 0.1};
    const double r = 5.0;
    std::vector<double> u;
    const double i = solve_column({g, v, r}, &u);
    for (std::size_t j = 0; j < g.size(); ++j)
    {
        const double left = j > 0 ? (u[j - 1] - u[j]) / r : 0.0;
        const double right = j + 1 < g.size() ? (u[j] - u[j + 1]) / r : u[j] / r;
        REQUIRE(g[j] * (v[j] - u[j]) + left == Catch::Approx(right).epsilon(1e-12));
    }
    REQUIRE(i == Catch::Approx(u.back() / r));
}

TEST_CASE("ADC rounding and clamping", "[nice][adc]")
{
    HardwareConfig hw;
    const auto adc = AdcModel::from_config(hw);
    REQUIRE(adc.lsb == adc.full_scale_current / 15.0);
    REQUIRE(adc_quantize(0.0, adc) == 0);
    REQUIRE(adc_quantize(adc.full_scale_current, adc) == 15);
    REQUIRE(adc_quantize(10.0 * adc.full_scale_current, adc) == 15);
    REQUIRE(adc_quantize(1.49 * adc.lsb, adc) == 1);
    REQUIRE(adc_quantize(1.51 * adc.lsb, adc) == 2);
    hw.adc_active_rows = 8;
    REQUIRE(AdcModel::from_config(hw).full_scale_current ==
            Catch::Approx(hw.read_voltage * hw.g_max() * 8));
}

TEST_CASE("DIFF correction", "[nice][diff]")
{
    const std::vector<std::uint8_t> spikes{1, 1};
    const std::vector<std::uint8_t> signs{1, 0};
    // weights -1 and 2 with p = 1 are stored as 1 and 2
    REQUIRE(diff_correct(3, spikes, signs, 1) == 1);
    const std::vector<std::uint8_t> none{0, 0};
    REQUIRE(diff_correct(3, spikes, none, 1) == 3);
    const std::vector<std::uint8_t> silent{0, 0};
    REQUIRE(diff_correct(0, silent, signs, 1) == 0);
}

TEST_CASE("ideal circuit reproduces the software MAC", "[nice][mac]")
{
    std::mt19937_64 rng(123);
    for (const int b : {1, 2, 4})
    {
        auto hw = exact_hw();
        hw.bits_per_cell = b;
        for (const auto enc : {WeightEncoding::ni_aware, WeightEncoding::twos_complement})
        {
            hw.encoding = enc;
            for (int trial = 0; trial < 50; ++trial)
            {
                const auto m = fixture::linear_model(64, 64 / (4 / b), 4, rng);
                auto net = map_network(m, hw);
                program_conductances(net, hw);
                const auto spikes = fixture::random_spikes(64, 0.3, rng);
                REQUIRE(crossbar_mac(net.slices[0], spikes, hw) == fixture::software_mac(m, spikes));
            }
        }
    }
}

TEST_CASE("single unit weight and spike gives one", "[nice][mac]")
{
    auto hw = exact_hw();
    ModelBundle m;
    m.weight_bits = 4;
    LayerSpec l;
    l.kind = LayerKind::linear;
    l.activation = Activation::none;
    m.layers.push_back(l);
    m.weights.push_back({1});
    auto net = map_network(m, hw);
    program_conductances(net, hw);
    const std::vector<std::uint8_t> spike{1};
    REQUIRE(crossbar_mac(net.slices[0], spike, hw) == std::vector<std::int64_t>{1});
    REQUIRE(crossbar_mac(net.slices[0], std::vector<std::uint8_t>{0}, hw) == std::vector<std::int64_t>{0});
}

TEST_CASE("MAC error grows with wire resistance", "[nice][mac]")
{
    HardwareConfig hw;
    hw.sigma = 0.0;
    hw.adc_bits = 16;
    double prev = -1.0;
    for (const double r : {0.0, 1.0, 2.5, 5.0})
    {
        hw.wire_resistance = r;
        const double mse = fixture::mac_mse(hw, 60, 0.5, 99);
        REQUIRE(mse >= prev);
        prev = mse;
    }
    REQUIRE(prev > 0.0);
}

TEST_CASE("MAC error grows with crossbar size", "[nice][mac]")
{
    HardwareConfig hw;
    hw.sigma = 0.0;
    hw.adc_bits = 16;
    hw.wire_resistance = 2.5;
    double prev = -1.0;
    for (const int x : {16, 32, 64, 128})
    {
        hw.crossbar_size = x;
        hw.diff_speedup = x;
        hw.mux_size = std::min(hw.mux_size, x);
        const double mse = fixture::mac_mse(hw, 20, 0.5, 17);
        REQUIRE(mse >= prev);
        prev = mse;
    }
}

TEST_CASE("slice circuit dump has one row per device", "[nice][debug]")
{
    std::mt19937_64 rng(3);
    HardwareConfig hw;
    hw.crossbar_size = 8;
    hw.diff_speedup = 8;
    hw.mux_size = 8;
    const auto m = fixture::linear_model(8, 2, 4, rng);
    auto net = map_network(m, hw);
    program_conductances(net, hw);
    const auto csv = dump_slice_circuit_csv(net.slices[0], fixture::random_spikes(8, 0.5, rng), hw);
    REQUIRE(csv.rfind("column,row,conductance_s,input_v,node_v,column_current_a\n", 0) == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 1 + 8 * 8);
}
