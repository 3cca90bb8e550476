/**
 * @file lang.hpp
 * @brief Aggregate feature language over the relational store.
 *
 * A feature is Agg(Table.Value) or Agg(Selection(Table, lo<attr<=hi).Value)
 * with Agg one of Count, Mean, Median, Min, Max, StdDev, Sum. Features are
 * drawn at random, named canonically, evaluated per series and flattened
 * into a regressor-ready table.
 */
#pragma once

#include "ifx/error.hpp"
#include "ifx/parallel.hpp"
#include "ifx/store.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace ifx {

enum class Aggregate { Count, Mean, Median, Min, Max, StdDev, Sum };

inline constexpr std::array<Aggregate, 7> all_aggregates = {
    Aggregate::Count, Aggregate::Mean, Aggregate::Median, Aggregate::Min,
    Aggregate::Max,   Aggregate::StdDev, Aggregate::Sum};

constexpr std::string_view aggregate_name(Aggregate a) noexcept
{
    switch (a) {
    case Aggregate::Count: return "Count";
    case Aggregate::Mean: return "Mean";
    case Aggregate::Median: return "Median";
    case Aggregate::Min: return "Min";
    case Aggregate::Max: return "Max";
    case Aggregate::StdDev: return "StdDev";
    case Aggregate::Sum: return "Sum";
    }
    return "";
}

/// Empty optional encodes a Missing value (non-Count aggregate over no records).
using FeatureValue = std::optional<double>;

struct FeatureExpr {
    TableId table;
    std::optional<SelectionCriterion> selection;
    Aggregate agg = Aggregate::Count;

    friend bool operator==(const FeatureExpr&, const FeatureExpr&) = default;
};

inline std::string selection_text(TableId table, const SelectionCriterion& c)
{
    const std::string attr = c.attribute == SelectAttribute::Axis ? axis_attribute_name(axis_kind_of(table.kind))
                                                                  : value_attribute_name(table);
    return "Selection(" + table_name(table) + ", " + format_number(c.lower) + "<" + attr +
           "<=" + format_number(c.upper) + ")";
}

inline std::string canonical_name(const FeatureExpr& e)
{
    const std::string source = e.selection ? selection_text(e.table, *e.selection) : table_name(e.table);
    if (e.agg == Aggregate::Count)
        return "Count(" + source + ")";
    return std::string(aggregate_name(e.agg)) + "(" + source + "." + value_attribute_name(e.table) + ")";
}

/// Aggregate over `values`; reorders the buffer (median).
inline FeatureValue aggregate(Aggregate agg, std::vector<double>& values)
{
    const std::size_t n = values.size();
    if (agg == Aggregate::Count)
        return static_cast<double>(n);
    if (n == 0)
        return std::nullopt;

    auto sum = [&] {
        double s = 0.0;
        for (double v : values)
            s += v;
        return s;
    };
    switch (agg) {
    case Aggregate::Sum: return sum();
    case Aggregate::Mean: return sum() / static_cast<double>(n);
    case Aggregate::Min: return *std::min_element(values.begin(), values.end());
    case Aggregate::Max: return *std::max_element(values.begin(), values.end());
    case Aggregate::Median: {
        auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
        std::nth_element(values.begin(), mid, values.end());
        if (n % 2 == 1)
            return *mid;
        const double lo = *std::max_element(values.begin(), mid);
        return 0.5 * (lo + *mid);
    }
    case Aggregate::StdDev: {
        // population convention: divide by the record count
        const double mean = sum() / static_cast<double>(n);
        double ss = 0.0;
        for (double v : values)
            ss += (v - mean) * (v - mean);
        return std::sqrt(ss / static_cast<double>(n));
    }
    case Aggregate::Count: break;
    }
    return std::nullopt;
}

/// Evaluate on a root row, reusing `scratch` for the selected values.
inline FeatureValue evaluate_row(const FeatureExpr& e, const SecondaryTable& t, std::size_t row,
                                 std::vector<double>& scratch)
{
    select_row_records(t, row, e.selection).values(scratch);
    return aggregate(e.agg, scratch);
}

inline FeatureValue evaluate(const FeatureExpr& e, const RelationalStore& store, std::int64_t series_id)
{
    const SecondaryTable& t = store.table(e.table);
    std::vector<double> scratch;
    return evaluate_row(e, t, store.row_of(series_id), scratch);
}

// ---------------------------------------------------------------------------
// Random feature construction
// ---------------------------------------------------------------------------

struct TableSchema {
    TableId id;
    AxisKind axis_kind = AxisKind::Time;
    std::vector<double> axis_quantiles;  ///< distinct, ascending
    std::vector<double> value_quantiles; ///< distinct, ascending
};

struct StoreSchema {
    std::vector<TableSchema> tables;
};

struct SamplerConfig {
    double selection_probability = 0.5;
    std::size_t retry_factor = 10;
    std::size_t quantile_grid = 100;
};

/// Distinct empirical quantiles sorted[floor(r * (len-1) / grid)], r = 0..grid.
inline std::vector<double> empirical_quantiles(std::vector<double> xs, std::size_t grid)
{
    std::vector<double> q;
    if (xs.empty())
        return q;
    std::sort(xs.begin(), xs.end());
    grid = std::max<std::size_t>(grid, 1);
    q.reserve(grid + 1);
    for (std::size_t r = 0; r <= grid; ++r) {
        const std::size_t idx = r * (xs.size() - 1) / grid;
        if (q.empty() || xs[idx] != q.back())
            q.push_back(xs[idx]);
    }
    return q;
}

/// Schema with selection-bound quantiles; build it from the training store only.
inline StoreSchema make_schema(const RelationalStore& store, std::size_t quantile_grid = SamplerConfig{}.quantile_grid)
{
    StoreSchema schema;
    for (const SecondaryTable& t : store.tables()) {
        TableSchema ts;
        ts.id = t.id;
        ts.axis_kind = t.axis_kind;
        ts.axis_quantiles = empirical_quantiles(t.axis, quantile_grid);
        ts.value_quantiles = empirical_quantiles(t.value, quantile_grid);
        schema.tables.push_back(std::move(ts));
    }
    return schema;
}

/**
 * @brief Draw up to K distinct features.
 *
 * Each draw picks a table and an aggregate uniformly; with probability
 * selection_probability it adds a Selection on a uniformly chosen attribute
 * (axis or value) bounded by two distinct quantiles of that attribute.
 * Duplicate names are redrawn; after retry_factor * K rejections sampling
 * stops short.
 */
inline std::vector<FeatureExpr> sample_features(const StoreSchema& schema, std::size_t k, std::uint64_t seed,
                                                const SamplerConfig& config = {})
{
    std::vector<FeatureExpr> out;
    if (k == 0 || schema.tables.empty())
        return out;

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_table(0, schema.tables.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_agg(0, all_aggregates.size() - 1);
    std::bernoulli_distribution with_selection(config.selection_probability);
    std::bernoulli_distribution on_axis(0.5);

    std::unordered_set<std::string> seen;
    const std::size_t cap = config.retry_factor * k;
    std::size_t rejected = 0;
    out.reserve(k);
    while (out.size() < k) {
        const TableSchema& ts = schema.tables[pick_table(rng)];
        FeatureExpr e;
        e.table = ts.id;
        e.agg = all_aggregates[pick_agg(rng)];
        if (with_selection(rng)) {
            const bool axis = on_axis(rng);
            const auto& q = axis ? ts.axis_quantiles : ts.value_quantiles;
            if (q.size() >= 2) {
                std::size_t i = std::uniform_int_distribution<std::size_t>(0, q.size() - 1)(rng);
                std::size_t j = std::uniform_int_distribution<std::size_t>(0, q.size() - 2)(rng);
                if (j >= i)
                    ++j;
                e.selection = SelectionCriterion{axis ? SelectAttribute::Axis : SelectAttribute::Value,
                                                 q[std::min(i, j)], q[std::max(i, j)]};
            }
        }
        if (seen.insert(canonical_name(e)).second)
            out.push_back(std::move(e));
        else if (++rejected > cap)
            break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Flattened table
// ---------------------------------------------------------------------------

struct FlattenedTable {
    std::vector<std::string> names;
    std::vector<FeatureExpr> exprs;
    std::vector<std::vector<FeatureValue>> columns; ///< columns[j][row]
    std::vector<double> targets;
    std::vector<std::int64_t> series_ids;

    std::size_t rows() const noexcept { return targets.size(); }
    std::size_t cols() const noexcept { return columns.size(); }

    std::vector<FeatureValue> row(std::size_t i) const
    {
        std::vector<FeatureValue> r;
        r.reserve(columns.size());
        for (const auto& c : columns)
            r.push_back(c.at(i));
        return r;
    }

    /// Keep only the listed columns, in the given order.
    FlattenedTable project(const std::vector<std::size_t>& keep) const
    {
        FlattenedTable out;
        out.targets = targets;
        out.series_ids = series_ids;
        for (std::size_t j : keep) {
            out.names.push_back(names.at(j));
            if (j < exprs.size())
                out.exprs.push_back(exprs[j]);
            out.columns.push_back(columns.at(j));
        }
        return out;
    }
};

inline FlattenedTable flatten(const RelationalStore& store, const std::vector<FeatureExpr>& exprs,
                              unsigned threads = 1)
{
    for (const auto& e : exprs)
        if (!store.has_table(e.table))
            throw KeyError("feature " + canonical_name(e) + " refers to unknown table " + table_name(e.table));

    FlattenedTable out;
    out.targets = store.targets();
    out.series_ids = store.series_ids();
    out.exprs = exprs;
    out.names.reserve(exprs.size());
    for (const auto& e : exprs)
        out.names.push_back(canonical_name(e));
    out.columns.assign(exprs.size(), std::vector<FeatureValue>(store.size()));

    parallel_for(exprs.size(), threads, [&](std::size_t j) {
        const SecondaryTable& t = store.table(exprs[j].table);
        std::vector<double> scratch;
        for (std::size_t r = 0; r < store.size(); ++r)
            out.columns[j][r] = evaluate_row(exprs[j], t, r, scratch);
    });
    return out;
}

inline std::string csv_field(std::string_view s)
{
    if (s.find_first_of(",\"\n") == std::string_view::npos)
        return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

/// Header of feature names plus "target"; Missing is an empty field.
inline void write_flattened_csv(std::ostream& out, const FlattenedTable& t)
{
    for (const auto& n : t.names)
        out << csv_field(n) << ',';
    out << "target\n";
    for (std::size_t r = 0; r < t.rows(); ++r) {
        for (const auto& c : t.columns) {
            if (c[r])
                out << format_number(*c[r]);
            out << ',';
        }
        out << format_number(t.targets[r]) << '\n';
    }
}

} // namespace ifx
