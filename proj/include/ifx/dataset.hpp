/**
 * @file dataset.hpp
 * @brief Labelled multivariate time series: data model, readers and writer.
 *
 * Two on-disk formats are supported:
 *  - the TSER archive text format (`@` header lines, then one series per line,
 *    dimensions separated by ':', comma-separated values, target last);
 *  - a long-format CSV pair (series_id,dim,timestamp,value) + (series_id,target).
 *
 * Both readers only return datasets for which validate() reports nothing.
 */
#pragma once

#include "ifx/channel.hpp"
#include "ifx/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ifx {

/// Shortest decimal text that parses back to exactly `x`.
inline std::string format_number(double x)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

struct Series {
    std::int64_t id = 0;
    std::vector<Channel> dims;
};

struct TimeSeriesDataset {
    std::string name;
    std::vector<Series> series;
    std::vector<double> targets;
    std::size_t dim_count = 0;

    std::size_t size() const noexcept { return series.size(); }
};

struct ValidationReport {
    std::vector<std::string> problems;

    bool ok() const noexcept { return problems.empty(); }
};

inline constexpr std::size_t min_channel_length = 3;

inline ValidationReport validate(const TimeSeriesDataset& ds)
{
    ValidationReport report;
    auto add = [&](std::string msg) { report.problems.push_back(std::move(msg)); };

    if (ds.series.empty())
        add("empty dataset");
    if (ds.dim_count == 0)
        add("dim_count must be positive");
    if (ds.series.size() != ds.targets.size())
        add("series count " + std::to_string(ds.series.size()) + " != target count " +
            std::to_string(ds.targets.size()));

    std::unordered_set<std::int64_t> ids;
    for (std::size_t i = 0; i < ds.series.size(); ++i) {
        const Series& s = ds.series[i];
        const std::string where = "series " + std::to_string(s.id);
        if (!ids.insert(s.id).second)
            add(where + ": duplicate id");
        if (s.dims.size() != ds.dim_count)
            add(where + ": has " + std::to_string(s.dims.size()) + " dimensions, expected " +
                std::to_string(ds.dim_count));
        for (std::size_t d = 0; d < s.dims.size(); ++d) {
            const Channel& c = s.dims[d];
            const std::string cw = where + " dim " + std::to_string(d + 1);
            if (c.axis.size() != c.value.size())
                add(cw + ": axis/value size mismatch");
            if (c.size() < min_channel_length)
                add(cw + ": length < 3");
            for (std::size_t k = 1; k < c.axis.size(); ++k) {
                if (!(c.axis[k] > c.axis[k - 1])) {
                    add(cw + ": timestamps not strictly increasing");
                    break;
                }
            }
            if (std::any_of(c.value.begin(), c.value.end(), [](double v) { return !std::isfinite(v); }))
                add(cw + ": non-finite value");
        }
    }
    for (std::size_t i = 0; i < ds.targets.size(); ++i)
        if (!std::isfinite(ds.targets[i]))
            add("target " + std::to_string(i) + ": non-finite target");
    return report;
}

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return out;
}

inline std::optional<double> parse_double(std::string_view s)
{
    s = trim(s);
    if (s.empty())
        return std::nullopt;
    if (s.front() == '+')
        s.remove_prefix(1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s)
{
    s = trim(s);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

inline bool is_missing_token(std::string_view s)
{
    s = trim(s);
    return s == "?" || lower(s) == "nan";
}

/// Split on `sep`, ignoring separators nested inside parentheses.
inline std::vector<std::string_view> split_top(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '(')
            ++depth;
        else if (s[i] == ')')
            --depth;
        else if (s[i] == sep && depth == 0) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    out.push_back(s.substr(start));
    return out;
}

inline std::optional<bool> parse_bool(std::string_view s)
{
    auto l = lower(trim(s));
    if (l == "true")
        return true;
    if (l == "false")
        return false;
    return std::nullopt;
}

inline std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path.string());
    return in;
}

} // namespace detail

/**
 * @brief Parse one channel token of a TSER data line.
 *
 * Missing points ('?' or NaN) are dropped; with implicit timestamps the
 * remaining points keep their original index as time stamp.
 */
inline Channel parse_ts_channel(std::string_view token, bool timestamps, std::size_t line)
{
    Channel c;
    auto parts = detail::split_top(token, ',');
    if (!timestamps) {
        for (std::size_t k = 0; k < parts.size(); ++k) {
            if (detail::is_missing_token(parts[k]))
                continue;
            auto v = detail::parse_double(parts[k]);
            if (!v)
                throw ParseError("non-numeric value '" + std::string(detail::trim(parts[k])) + "'", line);
            c.axis.push_back(static_cast<double>(k));
            c.value.push_back(*v);
        }
        return c;
    }
    for (auto part : parts) {
        auto p = detail::trim(part);
        if (p.size() < 2 || p.front() != '(' || p.back() != ')')
            throw ParseError("expected (timestamp,value) pair, got '" + std::string(p) + "'", line);
        auto inner = p.substr(1, p.size() - 2);
        auto comma = inner.rfind(',');
        if (comma == std::string_view::npos)
            throw ParseError("expected (timestamp,value) pair, got '" + std::string(p) + "'", line);
        if (detail::is_missing_token(inner.substr(comma + 1)))
            continue;
        auto t = detail::parse_double(inner.substr(0, comma));
        auto v = detail::parse_double(inner.substr(comma + 1));
        if (!t)
            throw ParseError("non-numeric timestamp in '" + std::string(p) + "'", line);
        if (!v)
            throw ParseError("non-numeric value in '" + std::string(p) + "'", line);
        c.axis.push_back(*t);
        c.value.push_back(*v);
    }
    return c;
}

inline TimeSeriesDataset parse_ts_stream(std::istream& in, std::string default_name = {})
{
    TimeSeriesDataset ds;
    ds.name = std::move(default_name);

    bool timestamps = false;
    bool target_declared = false;
    bool in_data = false;
    std::optional<std::size_t> declared_dims;

    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        auto line = detail::trim(raw);
        if (line.empty() || line.front() == '#')
            continue;

        if (!in_data) {
            if (line.front() != '@')
                throw ParseError("expected header line starting with '@'", line_no);
            auto sp = line.find_first_of(" \t");
            auto key = detail::lower(line.substr(1, sp == std::string_view::npos ? line.size() - 1 : sp - 1));
            auto val = sp == std::string_view::npos ? std::string_view{} : detail::trim(line.substr(sp));

            auto need_bool = [&](std::string_view v) {
                auto b = detail::parse_bool(v);
                if (!b)
                    throw ParseError("@" + key + " expects true/false, got '" + std::string(v) + "'", line_no);
                return *b;
            };

            if (key == "data") {
                if (!target_declared)
                    throw ParseError("header does not declare a regression target (@targetLabel true)", line_no);
                in_data = true;
            } else if (key == "problemname") {
                ds.name = std::string(val);
            } else if (key == "timestamps") {
                timestamps = need_bool(val);
            } else if (key == "targetlabel") {
                target_declared = need_bool(val);
            } else if (key == "classlabel") {
                auto words = detail::split_top(val, ' ');
                if (need_bool(words.front()))
                    throw ParseError("class-labelled data is not a regression problem", line_no);
            } else if (key == "dimension" || key == "dimensions") {
                auto d = detail::parse_int(val);
                if (!d || *d <= 0)
                    throw ParseError("@" + key + " expects a positive integer", line_no);
                declared_dims = static_cast<std::size_t>(*d);
            } else if (key == "missing" || key == "univariate" || key == "equallength") {
                need_bool(val);
            } else if (key == "serieslength") {
                if (!detail::parse_int(val))
                    throw ParseError("@serieslength expects an integer", line_no);
            }
            // other keywords are informational
            continue;
        }

        auto tokens = detail::split_top(line, ':');
        if (tokens.size() < 2)
            throw ParseError("data line needs at least one dimension and a target", line_no);
        const std::size_t d = tokens.size() - 1;
        if (declared_dims && *declared_dims != d)
            throw ParseError("line has " + std::to_string(d) + " dimensions, header declares " +
                                 std::to_string(*declared_dims),
                             line_no);
        if (ds.dim_count == 0)
            ds.dim_count = d;
        else if (ds.dim_count != d)
            throw ParseError("inconsistent dimension count " + std::to_string(d) + " (expected " +
                                 std::to_string(ds.dim_count) + ")",
                             line_no);

        auto y = detail::parse_double(tokens.back());
        if (!y)
            throw ParseError("non-numeric target '" + std::string(detail::trim(tokens.back())) + "'", line_no);
        if (!std::isfinite(*y))
            throw ParseError("non-finite target", line_no);

        Series s;
        s.id = static_cast<std::int64_t>(ds.series.size());
        for (std::size_t k = 0; k < d; ++k) {
            Channel c = parse_ts_channel(tokens[k], timestamps, line_no);
            if (c.size() < min_channel_length)
                throw ParseError("dimension " + std::to_string(k + 1) + " has length < 3", line_no);
            for (std::size_t t = 1; t < c.size(); ++t)
                if (!(c.axis[t] > c.axis[t - 1]))
                    throw ParseError("dimension " + std::to_string(k + 1) +
                                         " timestamps not strictly increasing",
                                     line_no);
            for (double v : c.value)
                if (!std::isfinite(v))
                    throw ParseError("dimension " + std::to_string(k + 1) + " has a non-finite value", line_no);
            s.dims.push_back(std::move(c));
        }
        ds.series.push_back(std::move(s));
        ds.targets.push_back(*y);
    }

    if (!in_data)
        throw ParseError("missing @data section", line_no);
    if (ds.series.empty())
        throw EmptyDataset("no series after @data");
    return ds;
}

inline TimeSeriesDataset parse_ts_file(const std::filesystem::path& path)
{
    auto in = detail::open_input(path);
    return parse_ts_stream(in, path.stem().string());
}

/// Write in TSER archive format; time stamps are written only when they differ from 0,1,2,...
inline void write_ts(std::ostream& out, const TimeSeriesDataset& ds)
{
    bool explicit_time = false;
    for (const auto& s : ds.series)
        for (const auto& c : s.dims)
            for (std::size_t k = 0; k < c.size(); ++k)
                if (c.axis[k] != static_cast<double>(k))
                    explicit_time = true;

    out << "@problemName " << (ds.name.empty() ? "unnamed" : ds.name) << '\n'
        << "@timeStamps " << (explicit_time ? "true" : "false") << '\n'
        << "@missing false\n"
        << "@univariate " << (ds.dim_count == 1 ? "true" : "false") << '\n';
    if (ds.dim_count > 1)
        out << "@dimensions " << ds.dim_count << '\n';
    out << "@targetLabel true\n@data\n";

    for (std::size_t i = 0; i < ds.series.size(); ++i) {
        for (const auto& c : ds.series[i].dims) {
            for (std::size_t k = 0; k < c.size(); ++k) {
                if (k)
                    out << ',';
                if (explicit_time)
                    out << '(' << format_number(c.axis[k]) << ',' << format_number(c.value[k]) << ')';
                else
                    out << format_number(c.value[k]);
            }
            out << ':';
        }
        out << format_number(ds.targets[i]) << '\n';
    }
}

inline void write_ts_file(const std::filesystem::path& path, const TimeSeriesDataset& ds)
{
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path.string());
    write_ts(out, ds);
}

/**
 * @brief Read a long-format value CSV plus a target CSV.
 *
 * Series are ordered by first appearance in the value file; dimensions by
 * ascending dim label. Every series must carry every dimension.
 */
inline TimeSeriesDataset parse_csv_pair_streams(std::istream& values, std::istream& targets)
{
    struct Pending {
        std::int64_t id;
        std::map<std::int64_t, std::vector<std::pair<double, double>>> dims;
    };
    std::vector<Pending> order;
    std::unordered_map<std::int64_t, std::size_t> pos;
    std::map<std::int64_t, int> all_dims;

    std::string raw;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(values, raw)) {
        ++line_no;
        auto line = detail::trim(raw);
        if (line.empty())
            continue;
        if (!header) {
            header = true;
            continue;
        }
        auto f = detail::split_top(line, ',');
        if (f.size() != 4)
            throw ParseError("expected 4 fields (series_id,dim,timestamp,value)", line_no);
        auto id = detail::parse_int(f[0]);
        auto dim = detail::parse_int(f[1]);
        auto t = detail::parse_double(f[2]);
        auto v = detail::parse_double(f[3]);
        if (!id || !dim)
            throw ParseError("series_id and dim must be integers", line_no);
        if (!t || !v)
            throw ParseError("timestamp and value must be numeric", line_no);
        auto [it, fresh] = pos.try_emplace(*id, order.size());
        if (fresh)
            order.push_back(Pending{*id, {}});
        order[it->second].dims[*dim].emplace_back(*t, *v);
        all_dims[*dim] = 0;
    }
    if (!header)
        throw ParseError("value file has no header row", 0);

    std::unordered_map<std::int64_t, double> target_of;
    header = false;
    line_no = 0;
    while (std::getline(targets, raw)) {
        ++line_no;
        auto line = detail::trim(raw);
        if (line.empty())
            continue;
        if (!header) {
            header = true;
            continue;
        }
        auto f = detail::split_top(line, ',');
        if (f.size() != 2)
            throw ParseError("expected 2 fields (series_id,target)", line_no);
        auto id = detail::parse_int(f[0]);
        auto y = detail::parse_double(f[1]);
        if (!id)
            throw ParseError("series_id must be an integer", line_no);
        if (!y)
            throw ParseError("non-numeric target", line_no);
        if (!target_of.emplace(*id, *y).second)
            throw ConsistencyError("duplicate target for series " + std::to_string(*id));
        if (!pos.count(*id))
            throw ConsistencyError("target for series " + std::to_string(*id) + " which has no values");
    }

    if (order.empty())
        throw EmptyDataset("value file has no records");

    TimeSeriesDataset ds;
    ds.dim_count = all_dims.size();
    for (auto& p : order) {
        auto yt = target_of.find(p.id);
        if (yt == target_of.end())
            throw ConsistencyError("series " + std::to_string(p.id) + " has no target");
        if (p.dims.size() != all_dims.size())
            throw ConsistencyError("series " + std::to_string(p.id) + " lacks some dimensions");
        Series s;
        s.id = p.id;
        for (auto& [dim, pts] : p.dims) {
            std::sort(pts.begin(), pts.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            Channel c;
            for (std::size_t k = 0; k < pts.size(); ++k) {
                if (k && pts[k].first == pts[k - 1].first)
                    throw ConsistencyError("duplicate record (series " + std::to_string(p.id) + ", dim " +
                                           std::to_string(dim) + ", timestamp " +
                                           format_number(pts[k].first) + ")");
                c.axis.push_back(pts[k].first);
                c.value.push_back(pts[k].second);
            }
            s.dims.push_back(std::move(c));
        }
        ds.series.push_back(std::move(s));
        ds.targets.push_back(yt->second);
    }

    auto report = validate(ds);
    if (!report.ok())
        throw ConsistencyError(report.problems.front());
    return ds;
}

inline TimeSeriesDataset parse_csv_pair(const std::filesystem::path& values_path,
                                        const std::filesystem::path& targets_path)
{
    auto values = detail::open_input(values_path);
    auto targets = detail::open_input(targets_path);
    auto ds = parse_csv_pair_streams(values, targets);
    ds.name = values_path.stem().string();
    return ds;
}

/// Dispatch on extension: `.ts` is the archive format, anything else is rejected.
inline TimeSeriesDataset load_dataset(const std::filesystem::path& path)
{
    if (path.extension() == ".ts")
        return parse_ts_file(path);
    throw DataError("unsupported dataset file (expected .ts): " + path.string());
}

} // namespace ifx
