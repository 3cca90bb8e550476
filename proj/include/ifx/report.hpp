/**
 * @file report.hpp
 * @brief Scored-feature reports: a JSON document and an aligned text table.
 */
#pragma once

#include "ifx/modl.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace ifx {

inline nlohmann::json model_json(const DiscretisationModel& m)
{
    nlohmann::json v_cuts = nlohmann::json::array();
    for (const auto& c : m.v_cut_values)
        v_cuts.push_back(c ? nlohmann::json(*c) : nlohmann::json("Missing"));
    return {{"v_intervals", m.I},
            {"target_intervals", m.J},
            {"v_cuts", v_cuts},
            {"target_cuts", m.y_cut_values},
            {"missing", m.missing_count},
            {"counts", m.counts}};
}

/// `n` is the number of training rows the features were scored on.
inline nlohmann::json scored_features_json(const std::vector<ScoredFeature>& scored, std::size_t n,
                                           double min_level = 0.0)
{
    nlohmann::json features = nlohmann::json::array();
    std::size_t informative_count = 0;
    for (const auto& s : scored) {
        const bool keep = s.level > min_level;
        informative_count += keep;
        features.push_back({{"name", s.name},
                            {"level", s.level},
                            {"cost", s.cost},
                            {"informative", keep},
                            {"model", model_json(s.model)}});
    }
    return {{"rows", n},
            {"null_cost", n ? null_cost(n) : 0.0},
            {"min_level", min_level},
            {"constructed", scored.size()},
            {"informative", informative_count},
            {"features", features}};
}

/// Fixed four-significant-digit rendering used in the text table.
inline std::string format_level(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

/// Table with columns Feature, level, #TargetIntervals, #vIntervals.
inline void write_scored_table(std::ostream& out, const std::vector<ScoredFeature>& scored)
{
    const std::vector<std::string> head = {"Feature", "level", "#TargetIntervals", "#vIntervals"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : scored)
        rows.push_back({s.name, format_level(s.level), std::to_string(s.model.J), std::to_string(s.model.I)});

    std::vector<std::size_t> width(head.size());
    for (std::size_t c = 0; c < head.size(); ++c) {
        width[c] = head[c].size();
        for (const auto& r : rows)
            width[c] = std::max(width[c], r[c].size());
    }
    auto line = [&](const std::vector<std::string>& r) {
        // name left-aligned, numbers right-aligned
        out << r[0] << std::string(width[0] - r[0].size(), ' ');
        for (std::size_t c = 1; c < r.size(); ++c)
            out << "  " << std::string(width[c] - r[c].size(), ' ') << r[c];
        out << '\n';
    };
    line(head);
    std::size_t total = width[0];
    for (std::size_t c = 1; c < width.size(); ++c)
        total += 2 + width[c];
    out << std::string(total, '-') << '\n';
    for (const auto& r : rows)
        line(r);
}

} // namespace ifx
