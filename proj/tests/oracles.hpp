#pragma once

// Reference computations used by the tests. Each is written from first
// principles and shares no code with the library paths it checks.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "spikesim/mapper.hpp"
#include "spikesim/model.hpp"

namespace oracle {

/// Gaussian elimination with partial pivoting on a dense copy of A.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col)
    {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
        {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        }
        if (a[piv][col] == 0.0) throw std::runtime_error("singular");
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < n; ++r)
        {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;)
    {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

/// Column ladder by Kirchhoff's current law at every node, assembled as a
/// full matrix. Node n-1 connects to the grounded sense input through r.
inline double column_current_mna(const std::vector<double> &g_dev, const std::vector<double> &v,
        double r)
{
    const std::size_t n = g_dev.size();
    if (r == 0.0)
    {
        double i = 0.0;
        for (std::size_t j = 0; j < n; ++j) i += g_dev[j] * v[j];
        return i;
    }
    const double gw = 1.0 / r;
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    std::vector<double> b(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
    {
        // device: G_j (u_j - v_j)
        a[j][j] += g_dev[j];
        b[j] += g_dev[j] * v[j];
        // wire towards the far end
        if (j > 0)
        {
            a[j][j] += gw;
            a[j][j - 1] -= gw;
        }
        // wire towards the sense node
        a[j][j] += gw;
        if (j + 1 < n) a[j][j + 1] -= gw;
    }
    const auto u = dense_solve(a, b);
    return gw * u[n - 1];
}

/// Number of kernel placements along one axis, by walking them.
inline std::int64_t window_positions(int dim, int kernel, int stride, int padding)
{
    std::int64_t n = 0;
    for (int start = -padding; start + kernel <= dim + padding; start += stride) ++n;
    return n;
}

inline std::int64_t dot(const std::vector<int> &w, const std::vector<int> &x)
{
    std::int64_t s = 0;
    for (std::size_t i = 0; i < w.size(); ++i) s += std::int64_t{w[i]} * x[i];
    return s;
}

/// Signed weights recovered from the mapped slices: bit-slice digits are
/// reassembled, then cells with the sign bit lose 2^p. Returns the weight
/// tensor of `layer` and counts how often each weight was seen.
inline std::vector<int> unmap_layer(const spikesim::ModelBundle &m,
        const spikesim::MappedNetwork &net, std::size_t layer, int bits_per_cell,
        std::vector<int> &seen)
{
    const auto &l = m.layers[layer];
    std::vector<int> w(static_cast<std::size_t>(l.weight_count()), 0);
    seen.assign(w.size(), 0);
    const int x = net.crossbar_size;
    for (const auto &sl : net.slices)
    {
        if (sl.layer != layer) continue;
        for (int r = 0; r < sl.valid_rows; ++r)
        {
            for (int ch = 0; ch < sl.valid_channels(); ++ch)
            {
                int value = 0;
                int sign = -1;
                for (int s = 0; s < sl.bit_slices; ++s)
                {
                    const auto cell = static_cast<std::size_t>(r * x + ch * sl.bit_slices + s);
                    value += sl.encoded[cell] << (bits_per_cell * s);
                    if (sign >= 0 && sign != sl.sign_bits[cell])
                        throw std::runtime_error("inconsistent sign bits across slices");
                    sign = sl.sign_bits[cell];
                }
                if (sign == 1) value -= 1 << sl.shift_p;
                const int n = sl.channel_begin + ch;
                const int mi = sl.row_begin + r;
                const auto idx = static_cast<std::size_t>(
                        ((n * l.in_channels + mi) * l.kernel_size + sl.kernel_row) * l.kernel_size +
                        sl.kernel_col);
                w[idx] = value;
                ++seen[idx];
            }
        }
        // Cells outside the valid block stay empty.
        for (int r = 0; r < x; ++r)
        {
            for (int c = 0; c < x; ++c)
            {
                if (r < sl.valid_rows && c < sl.valid_cols) continue;
                const auto cell = static_cast<std::size_t>(r * x + c);
                if (sl.encoded[cell] != 0 || sl.sign_bits[cell] != 0)
                    throw std::runtime_error("populated cell outside the valid block");
            }
        }
    }
    return w;
}

} // namespace oracle
