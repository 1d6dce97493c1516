#pragma once

// Non-ideality computation engine: conductance programming with device
// variation, per-column IR-drop solve, flash-ADC quantization, shift-add
// recombination of bit slices and DIFF sign correction.
//
// Electrical model of one crossbar column (row 0 is the far end):
//
//   v_j --[G_j]--> u_j ,  u_j --[r]-- u_{j+1} ,  u_{X-1} --[r]-- sense (0 V)
//
// Only bit-line parasitics are modeled; every device node carries one wire
// segment towards the sense amplifier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "spikesim/error.hpp"
#include "spikesim/hardware_config.hpp"
#include "spikesim/mapper.hpp"
#include "spikesim/parallel.hpp"

namespace spikesim {

/// RNG stream for one crossbar, derived from the run seed and the slice's
/// position so that programming order never changes the draws.
inline std::mt19937_64 slice_rng(std::uint64_t seed, std::size_t layer,
        std::size_t slice_index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffU),
            static_cast<std::uint32_t>(seed >> 32),
            static_cast<std::uint32_t>(layer),
            static_cast<std::uint32_t>(slice_index)};
    return std::mt19937_64(seq);
}

/// Linear digit-to-conductance map followed by static programming variation
/// G' = clamp(G + n * (G_max - G_min), 0, G_max), n ~ N(0, sigma).
inline std::vector<double> weights_to_conductances(const CrossbarSlice &slice,
        const HardwareConfig &hw, std::mt19937_64 &rng)
{
    const double g_max = hw.g_max();
    const double g_min = hw.g_min();
    const double range = g_max - g_min;
    const double levels = hw.levels();
    std::vector<double> g(slice.encoded.size());
    std::normal_distribution<double> noise(0.0, hw.sigma > 0.0 ? hw.sigma : 1.0);
    for (std::size_t i = 0; i < g.size(); ++i)
    {
        const double s = slice.encoded[i];
        double value = s == levels ? g_max : g_min + (s / levels) * range;
        if (hw.sigma > 0.0)
        {
            value = std::clamp(value + noise(rng) * range, 0.0, g_max);
        }
        g[i] = value;
    }
    return g;
}

/// Sense current per volt on each row of one column. The ladder is linear,
/// so I = sum_j T_j v_j with T_j = g * z_j * G_j, where z solves A z = e_last
/// for the symmetric nodal matrix A. With r = 0, T_j = G_j.
inline void column_transfer(std::span<const double> conductances, double wire_resistance,
        std::span<double> out)
{
    const auto n = conductances.size();
    if (wire_resistance == 0.0)
    {
        std::copy(conductances.begin(), conductances.end(), out.begin());
        return;
    }
    if (n == 0)
    {
        return;
    }
    const double g = 1.0 / wire_resistance;
    thread_local std::vector<double> diag;
    thread_local std::vector<double> rhs;
    diag.resize(n);
    rhs.assign(n, 0.0);
    rhs[n - 1] = 1.0;
    for (std::size_t j = 0; j < n; ++j)
    {
        diag[j] = conductances[j] + g + (j > 0 ? g : 0.0);
        if (j > 0)
        {
            const double m = g / diag[j - 1];
            diag[j] -= m * g;
            rhs[j] += m * rhs[j - 1];
        }
    }
    double z = rhs[n - 1] / diag[n - 1];
    out[n - 1] = g * z * conductances[n - 1];
    for (std::size_t j = n - 1; j-- > 0;)
    {
        z = (rhs[j] + g * z) / diag[j];
        out[j] = g * z * conductances[j];
    }
}

/// Transfer matrix of a programmed slice, same layout as its conductances.
inline std::vector<double> slice_transfer(const CrossbarSlice &slice, const HardwareConfig &hw)
{
    const auto x = static_cast<std::size_t>(hw.crossbar_size);
    if (slice.conductances.size() != x * x)
    {
        throw Error("crossbar conductances not programmed");
    }
    std::vector<double> t(x * x);
    std::vector<double> col(x);
    std::vector<double> tc(x);
    for (std::size_t c = 0; c < x; ++c)
    {
        for (std::size_t r = 0; r < x; ++r)
        {
            col[r] = slice.conductances[r * x + c];
        }
        column_transfer(col, hw.wire_resistance, tc);
        for (std::size_t r = 0; r < x; ++r)
        {
            t[r * x + c] = tc[r];
        }
    }
    return t;
}

/// Fills every slice's conductance matrix. Deterministic for a fixed seed.
inline void program_conductances(MappedNetwork &net, const HardwareConfig &hw)
{
    if (!net.materialized)
    {
        throw Error("cannot program an unmaterialized mapping");
    }
    std::vector<std::size_t> index_in_layer(net.slices.size());
    for (const auto &plan : net.plans)
    {
        for (std::size_t i = 0; i < static_cast<std::size_t>(plan.crossbars); ++i)
        {
            index_in_layer[plan.first_slice + i] = i;
        }
    }
    parallel_for(net.slices.size(), [&](std::size_t i) {
        auto &sl = net.slices[i];
        auto rng = slice_rng(hw.seed, sl.layer, index_in_layer[i]);
        sl.conductances = weights_to_conductances(sl, hw, rng);
        sl.transfer = slice_transfer(sl, hw);
    });
}

struct ColumnCircuit
{
    std::span<const double> conductances; // G_1..G_X, siemens
    std::span<const double> voltages;     // v_1..v_X, volts
    double wire_resistance = 0.0;         // r, ohms
};

/// Column current into the sense node. With r > 0 the tridiagonal nodal
/// system is solved by forward elimination / back substitution; the node
/// voltages are written to `nodes` when given.
inline double solve_column(const ColumnCircuit &c, std::vector<double> *nodes = nullptr)
{
    const auto n = c.conductances.size();
    if (c.voltages.size() != n)
    {
        throw Error("column conductance and voltage lengths differ");
    }
    if (c.wire_resistance == 0.0)
    {
        double current = 0.0;
        for (std::size_t j = 0; j < n; ++j)
        {
            current += c.conductances[j] * c.voltages[j];
        }
        if (nodes != nullptr)
        {
            nodes->assign(n, 0.0);
        }
        return current;
    }
    if (n == 0)
    {
        return 0.0;
    }
    const double g = 1.0 / c.wire_resistance;
    // Off-diagonals are all -g. Eliminate downwards keeping the modified
    // diagonal and right-hand side.
    thread_local std::vector<double> diag;
    thread_local std::vector<double> rhs;
    diag.resize(n);
    rhs.resize(n);
    for (std::size_t j = 0; j < n; ++j)
    {
        diag[j] = c.conductances[j] + g + (j > 0 ? g : 0.0);
        rhs[j] = c.conductances[j] * c.voltages[j];
        if (j > 0)
        {
            const double m = g / diag[j - 1];
            diag[j] -= m * g;
            rhs[j] += m * rhs[j - 1];
        }
    }
    if (nodes != nullptr)
    {
        nodes->assign(n, 0.0);
        (*nodes)[n - 1] = rhs[n - 1] / diag[n - 1];
        for (std::size_t j = n - 1; j-- > 0;)
        {
            (*nodes)[j] = (rhs[j] + g * (*nodes)[j + 1]) / diag[j];
        }
        return g * (*nodes)[n - 1];
    }
    return g * rhs[n - 1] / diag[n - 1];
}

struct AdcModel
{
    int bits = 4;
    double full_scale_current = 0.0;
    double lsb = 0.0;

    /// Full scale = V_read * G_max * min(X, rho).
    static AdcModel from_config(const HardwareConfig &hw)
    {
        AdcModel a;
        a.bits = hw.adc_bits;
        a.full_scale_current =
                hw.read_voltage * hw.g_max() * hw.effective_active_rows();
        a.lsb = a.full_scale_current / static_cast<double>(a.max_code());
        return a;
    }

    [[nodiscard]] std::int64_t max_code() const
    {
        return (std::int64_t{1} << bits) - 1;
    }
};

inline std::int64_t adc_quantize(double current, const AdcModel &adc)
{
    const double code = std::nearbyint(current / adc.lsb);
    return static_cast<std::int64_t>(
            std::clamp(code, 0.0, static_cast<double>(adc.max_code())));
}

/// Signed MAC from the unsigned one: subtract 2^p for every negative weight
/// that received a spike.
inline std::int64_t diff_correct(std::int64_t mac_u, std::span<const std::uint8_t> spikes,
        std::span<const std::uint8_t> sign_bits, int p)
{
    if (spikes.size() != sign_bits.size())
    {
        throw Error("spike and sign vectors differ in length");
    }
    std::int64_t n_tot = 0;
    for (std::size_t j = 0; j < spikes.size(); ++j)
    {
        n_tot += spikes[j] & sign_bits[j];
    }
    return mac_u - n_tot * (std::int64_t{1} << p);
}

/// Signed partial sums of one crossbar for a binary input vector, one entry
/// per valid output channel. Column currents come from the slice's transfer
/// matrix (computed from the conductances when absent).
inline std::vector<std::int64_t> crossbar_mac(const CrossbarSlice &slice,
        std::span<const std::uint8_t> spikes, const HardwareConfig &hw)
{
    const auto x = static_cast<std::size_t>(hw.crossbar_size);
    if (static_cast<int>(spikes.size()) != slice.valid_rows)
    {
        throw Error("spike vector length does not match crossbar rows");
    }
    if (slice.conductances.size() != x * x)
    {
        throw Error("crossbar conductances not programmed");
    }
    const int channels = slice.valid_channels();
    std::vector<std::int64_t> out(static_cast<std::size_t>(channels), 0);
    int active = 0;
    for (const auto s : spikes)
    {
        active += s != 0 ? 1 : 0;
    }
    if (active == 0)
    {
        return out;
    }
    std::vector<double> computed;
    if (slice.transfer.empty())
    {
        computed = slice_transfer(slice, hw);
    }
    const auto &transfer = slice.transfer.empty() ? computed : slice.transfer;

    const auto adc = AdcModel::from_config(hw);
    const double unit_current =
            hw.read_voltage * (hw.g_max() - hw.g_min()) / hw.levels();
    const double offset_current = active * hw.read_voltage * hw.g_min();
    const int b = hw.bits_per_cell;
    const auto cols = static_cast<std::size_t>(slice.valid_cols);

    thread_local std::vector<double> current;
    current.assign(cols, 0.0);
    for (std::size_t r = 0; r < spikes.size(); ++r)
    {
        if (spikes[r] == 0)
        {
            continue;
        }
        const double *row = transfer.data() + r * x;
        for (std::size_t c = 0; c < cols; ++c)
        {
            current[c] += row[c];
        }
    }

    thread_local std::vector<std::uint8_t> signs;
    signs.resize(spikes.size());
    for (int ch = 0; ch < channels; ++ch)
    {
        std::int64_t mac_u = 0;
        for (int bs = 0; bs < slice.bit_slices; ++bs)
        {
            const auto col = static_cast<std::size_t>(ch * slice.bit_slices + bs);
            const auto code = adc_quantize(current[col] * hw.read_voltage, adc);
            const double partial = std::nearbyint(
                    (static_cast<double>(code) * adc.lsb - offset_current) / unit_current);
            mac_u += static_cast<std::int64_t>(partial) * (std::int64_t{1} << (b * bs));
        }
        const auto col0 = static_cast<std::size_t>(ch * slice.bit_slices);
        for (std::size_t r = 0; r < spikes.size(); ++r)
        {
            signs[r] = slice.sign_bits[r * x + col0];
        }
        out[static_cast<std::size_t>(ch)] = diff_correct(mac_u, spikes, signs, slice.shift_p);
    }
    return out;
}

/// CSV dump of one crossbar's circuit for an input vector: conductance,
/// input voltage and solved node voltage for every device of every valid
/// column, plus the column's sense current.
inline std::string dump_slice_circuit_csv(const CrossbarSlice &slice,
        std::span<const std::uint8_t> spikes, const HardwareConfig &hw)
{
    const int x = hw.crossbar_size;
    if (static_cast<int>(spikes.size()) != slice.valid_rows)
    {
        throw Error("spike vector length does not match crossbar rows");
    }
    std::vector<double> volts(static_cast<std::size_t>(x), 0.0);
    for (int r = 0; r < slice.valid_rows; ++r)
    {
        volts[static_cast<std::size_t>(r)] = spikes[static_cast<std::size_t>(r)] ? hw.read_voltage : 0.0;
    }
    std::ostringstream out;
    out.precision(17);
    out << "column,row,conductance_s,input_v,node_v,column_current_a\n";
    std::vector<double> column(static_cast<std::size_t>(x));
    std::vector<double> nodes;
    for (int c = 0; c < slice.valid_cols; ++c)
    {
        for (int r = 0; r < x; ++r)
        {
            column[static_cast<std::size_t>(r)] =
                    slice.conductances[static_cast<std::size_t>(r) * x + c];
        }
        const double current = solve_column({column, volts, hw.wire_resistance}, &nodes);
        for (int r = 0; r < x; ++r)
        {
            const auto ri = static_cast<std::size_t>(r);
            out << c << ',' << r << ',' << column[ri] << ',' << volts[ri] << ','
                << nodes[ri] << ',' << current << '\n';
        }
    }
    return out.str();
}

} // namespace spikesim
