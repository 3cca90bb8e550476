/**
 * @file synth.hpp
 * @brief Seeded synthetic regression datasets.
 *
 * Each dimension is a random walk whose step scale varies per series. The
 * target is the population standard deviation of the first difference of one
 * dimension plus Gaussian noise, or pure noise when the signal is disabled.
 */
#pragma once

#include "ifx/dataset.hpp"
#include "ifx/error.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace ifx {

struct SynthConfig {
    std::size_t n = 200;
    std::size_t dims = 2;
    std::size_t length = 50;
    std::size_t target_dim = 0; ///< 0-based
    double noise = 0.05;        ///< target noise standard deviation
    bool signal = true;
    std::uint64_t seed = 0;
};

inline TimeSeriesDataset make_synthetic(const SynthConfig& cfg)
{
    if (cfg.n == 0 || cfg.dims == 0)
        throw DomainError("synthetic dataset needs n >= 1 and dims >= 1");
    if (cfg.length < min_channel_length)
        throw DomainError("synthetic series length must be at least " + std::to_string(min_channel_length));
    if (cfg.target_dim >= cfg.dims)
        throw DomainError("target dimension out of range");

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> scale(0.5, 2.0);

    TimeSeriesDataset ds;
    ds.name = "synthetic";
    ds.dim_count = cfg.dims;
    for (std::size_t i = 0; i < cfg.n; ++i) {
        Series s;
        s.id = static_cast<std::int64_t>(i);
        double step_sd = 0.0;
        for (std::size_t d = 0; d < cfg.dims; ++d) {
            const double sd = scale(rng);
            std::vector<double> values(cfg.length);
            double x = gauss(rng);
            for (auto& v : values) {
                v = x;
                x += sd * gauss(rng);
            }
            if (d == cfg.target_dim) {
                double mean = 0.0;
                for (std::size_t t = 1; t < values.size(); ++t)
                    mean += values[t] - values[t - 1];
                mean /= static_cast<double>(values.size() - 1);
                double ss = 0.0;
                for (std::size_t t = 1; t < values.size(); ++t) {
                    const double e = values[t] - values[t - 1] - mean;
                    ss += e * e;
                }
                step_sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
            }
            s.dims.push_back(Channel::indexed(std::move(values)));
        }
        const double eps = cfg.noise * gauss(rng);
        ds.targets.push_back(cfg.signal ? step_sd + eps : eps);
        ds.series.push_back(std::move(s));
    }
    return ds;
}

} // namespace ifx
