/**
 * @file transforms.hpp
 * @brief The seven series representations: original, first/second difference,
 *        single/double cumulative sum, autocorrelation and periodogram.
 */
#pragma once

#include "ifx/channel.hpp"
#include "ifx/dataset.hpp"
#include "ifx/error.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ifx {

enum class ReprKind { Orig, D, DD, S, SS, ACF, PS };

inline constexpr std::array<ReprKind, 7> all_repr_kinds = {
    ReprKind::Orig, ReprKind::D, ReprKind::DD, ReprKind::S, ReprKind::SS, ReprKind::ACF, ReprKind::PS};

/// Suffix used in table names: "" for the original series, otherwise the transform tag.
constexpr std::string_view repr_suffix(ReprKind k) noexcept
{
    switch (k) {
    case ReprKind::Orig: return "";
    case ReprKind::D: return "D";
    case ReprKind::DD: return "DD";
    case ReprKind::S: return "S";
    case ReprKind::SS: return "SS";
    case ReprKind::ACF: return "ACF";
    case ReprKind::PS: return "PS";
    }
    return "";
}

/// Display name; the original representation is "Orig".
constexpr std::string_view repr_name(ReprKind k) noexcept
{
    return k == ReprKind::Orig ? std::string_view("Orig") : repr_suffix(k);
}

inline std::optional<ReprKind> parse_repr_kind(std::string_view s)
{
    for (ReprKind k : all_repr_kinds)
        if (s == repr_name(k))
            return k;
    return std::nullopt;
}

namespace detail {

inline void require_length(const Channel& c, std::size_t n, const char* op)
{
    if (c.size() < n)
        throw TooShort(std::string(op) + " needs at least " + std::to_string(n) + " points, got " +
                       std::to_string(c.size()));
}

using cplx = std::complex<double>;

/// In-place iterative radix-2 FFT; `a.size()` must be a power of two.
inline void fft_pow2(std::vector<cplx>& a, bool inverse)
{
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1)
            j ^= bit;
        j ^= bit;
        if (i < j)
            std::swap(a[i], a[j]);
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        std::vector<cplx> w(half);
        for (std::size_t k = 0; k < half; ++k) {
            const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
            w[k] = {std::cos(ang), std::sin(ang)};
        }
        for (std::size_t i = 0; i < n; i += len)
            for (std::size_t k = 0; k < half; ++k) {
                cplx u = a[i + k];
                cplx v = a[i + k + half] * w[k];
                a[i + k] = u + v;
                a[i + k + half] = u - v;
            }
    }
    if (inverse)
        for (auto& x : a)
            x /= static_cast<double>(n);
}

inline std::size_t next_pow2(std::size_t n)
{
    std::size_t p = 1;
    while (p < n)
        p <<= 1;
    return p;
}

/// Forward DFT X_k = sum_t x_t exp(-2 pi i k t / m) of any length (Bluestein for non powers of two).
inline std::vector<cplx> dft(const std::vector<double>& x)
{
    const std::size_t m = x.size();
    if (m == 0)
        return {};
    if ((m & (m - 1)) == 0) {
        std::vector<cplx> a(x.begin(), x.end());
        fft_pow2(a, false);
        return a;
    }
    // chirp w_k = exp(-i pi k^2 / m); k^2 reduced mod 2m keeps the argument small
    std::vector<cplx> chirp(m);
    for (std::size_t k = 0; k < m; ++k) {
        const auto k2 = static_cast<unsigned long long>(k) * k % (2 * m);
        const double ang = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(m);
        chirp[k] = {std::cos(ang), std::sin(ang)};
    }
    const std::size_t n = next_pow2(2 * m - 1);
    std::vector<cplx> a(n), b(n);
    for (std::size_t k = 0; k < m; ++k)
        a[k] = x[k] * chirp[k];
    b[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < m; ++k)
        b[k] = b[n - k] = std::conj(chirp[k]);
    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t i = 0; i < n; ++i)
        a[i] *= b[i];
    fft_pow2(a, true);
    std::vector<cplx> out(m);
    for (std::size_t k = 0; k < m; ++k)
        out[k] = a[k] * chirp[k];
    return out;
}

} // namespace detail

/// Forward first difference; output point i sits at the left time stamp.
inline Channel derivative(const Channel& c)
{
    detail::require_length(c, 2, "derivative");
    Channel out;
    out.axis_kind = c.axis_kind;
    out.axis.assign(c.axis.begin(), c.axis.end() - 1);
    out.value.resize(c.size() - 1);
    for (std::size_t i = 0; i + 1 < c.size(); ++i)
        out.value[i] = c.value[i + 1] - c.value[i];
    return out;
}

inline Channel second_derivative(const Channel& c)
{
    detail::require_length(c, 3, "second_derivative");
    return derivative(derivative(c));
}

inline Channel cumsum(const Channel& c)
{
    detail::require_length(c, 1, "cumsum");
    Channel out = c;
    double acc = 0.0;
    for (double& v : out.value) {
        acc += v;
        v = acc;
    }
    return out;
}

inline Channel double_cumsum(const Channel& c) { return cumsum(cumsum(c)); }

/**
 * @brief Sample autocorrelation r_k, k = 0..m-1, on a lag axis.
 *
 * r_k = sum_{t<m-k} (x_t - mean)(x_{t+k} - mean) / sum_t (x_t - mean)^2.
 * A zero-variance channel yields r_0 = 1 and r_k = 0 elsewhere.
 */
inline Channel acf(const Channel& c)
{
    detail::require_length(c, 2, "acf");
    const std::size_t m = c.size();
    double mean = 0.0;
    for (double v : c.value)
        mean += v;
    mean /= static_cast<double>(m);

    std::vector<double> centered(m);
    double denom = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
        centered[t] = c.value[t] - mean;
        denom += centered[t] * centered[t];
    }

    Channel out;
    out.axis_kind = AxisKind::Lag;
    out.axis.resize(m);
    out.value.assign(m, 0.0);
    for (std::size_t k = 0; k < m; ++k)
        out.axis[k] = static_cast<double>(k);
    out.value[0] = 1.0;
    if (denom == 0.0)
        return out;

    // linear autocorrelation via zero-padded FFT (padding >= 2m avoids wrap-around)
    std::vector<detail::cplx> a(detail::next_pow2(2 * m));
    for (std::size_t t = 0; t < m; ++t)
        a[t] = centered[t];
    detail::fft_pow2(a, false);
    for (auto& z : a)
        z = std::norm(z);
    detail::fft_pow2(a, true);
    for (std::size_t k = 1; k < m; ++k)
        out.value[k] = a[k].real() / denom;
    return out;
}

/// Periodogram |DFT_k|^2 / m for k = 0..floor(m/2), on frequency axis k/m.
inline Channel power_spectrum(const Channel& c)
{
    detail::require_length(c, 2, "power_spectrum");
    const std::size_t m = c.size();
    auto spec = detail::dft(c.value);
    const std::size_t half = m / 2 + 1;
    Channel out;
    out.axis_kind = AxisKind::Frequency;
    out.axis.resize(half);
    out.value.resize(half);
    for (std::size_t k = 0; k < half; ++k) {
        out.axis[k] = static_cast<double>(k) / static_cast<double>(m);
        out.value[k] = std::norm(spec[k]) / static_cast<double>(m);
    }
    return out;
}

inline Channel transform(const Channel& c, ReprKind kind)
{
    switch (kind) {
    case ReprKind::Orig: return c;
    case ReprKind::D: return derivative(c);
    case ReprKind::DD: return second_derivative(c);
    case ReprKind::S: return cumsum(c);
    case ReprKind::SS: return double_cumsum(c);
    case ReprKind::ACF: return acf(c);
    case ReprKind::PS: return power_spectrum(c);
    }
    return c;
}

/// Per series: `dims * kinds` channels, indexed [dim * kinds.size() + kind position].
using SeriesRepresentations = std::vector<Channel>;

inline std::vector<SeriesRepresentations> build_all(const TimeSeriesDataset& ds, const std::vector<ReprKind>& kinds)
{
    std::vector<SeriesRepresentations> out;
    out.reserve(ds.size());
    for (const Series& s : ds.series) {
        SeriesRepresentations reps;
        reps.reserve(s.dims.size() * kinds.size());
        for (const Channel& c : s.dims)
            for (ReprKind k : kinds)
                reps.push_back(transform(c, k));
        out.push_back(std::move(reps));
    }
    return out;
}

} // namespace ifx
