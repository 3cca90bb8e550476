/**
 * @file store.hpp
 * @brief Relational scheme: a root table (series id, target) and one secondary
 *        table of (series id, axis, value) tuples per dimension and representation.
 */
#pragma once

#include "ifx/dataset.hpp"
#include "ifx/error.hpp"
#include "ifx/transforms.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ifx {

struct TableId {
    std::size_t dim = 0; ///< 0-based dimension index
    ReprKind kind = ReprKind::Orig;

    friend auto operator<=>(const TableId&, const TableId&) = default;
};

/// "TS5D" for the derivative of the fifth dimension.
inline std::string table_name(TableId id)
{
    return "TS" + std::to_string(id.dim + 1) + std::string(repr_suffix(id.kind));
}

/// "Value5D" for the derivative of the fifth dimension.
inline std::string value_attribute_name(TableId id)
{
    return "Value" + std::to_string(id.dim + 1) + std::string(repr_suffix(id.kind));
}

inline std::string axis_attribute_name(AxisKind k)
{
    switch (k) {
    case AxisKind::Time: return "Time";
    case AxisKind::Lag: return "Lag";
    case AxisKind::Frequency: return "Frequency";
    }
    return "Time";
}

inline AxisKind axis_kind_of(ReprKind k)
{
    if (k == ReprKind::ACF)
        return AxisKind::Lag;
    if (k == ReprKind::PS)
        return AxisKind::Frequency;
    return AxisKind::Time;
}

enum class SelectAttribute { Axis, Value };

/// Keeps records with lower < attribute <= upper.
struct SelectionCriterion {
    SelectAttribute attribute = SelectAttribute::Axis;
    double lower = 0.0;
    double upper = 0.0;

    bool contains(double x) const noexcept { return lower < x && x <= upper; }

    friend bool operator==(const SelectionCriterion&, const SelectionCriterion&) = default;
};

struct Record {
    double axis;
    double value;
};

/**
 * @brief Lazily filtered view over the records of one series in one table.
 */
class RecordView {
public:
    class iterator {
    public:
        using iterator_category = std::forward_iterator_tag;
        using value_type = Record;
        using difference_type = std::ptrdiff_t;
        using pointer = void;
        using reference = Record;

        iterator() = default;
        iterator(const RecordView* view, std::size_t i) : view_(view), i_(i) { skip(); }

        Record operator*() const { return {view_->axis_[i_], view_->value_[i_]}; }
        iterator& operator++()
        {
            ++i_;
            skip();
            return *this;
        }
        iterator operator++(int)
        {
            auto tmp = *this;
            ++*this;
            return tmp;
        }
        bool operator==(const iterator& o) const noexcept { return i_ == o.i_; }

    private:
        void skip()
        {
            while (i_ < view_->value_.size() && !view_->keep(i_))
                ++i_;
        }

        const RecordView* view_ = nullptr;
        std::size_t i_ = 0;
    };

    RecordView(std::span<const double> axis, std::span<const double> value,
               std::optional<SelectionCriterion> crit)
        : axis_(axis), value_(value), crit_(crit)
    {
    }

    iterator begin() const { return iterator(this, 0); }
    iterator end() const { return iterator(this, value_.size()); }

    std::size_t size() const
    {
        if (!crit_)
            return value_.size();
        std::size_t n = 0;
        for (std::size_t i = 0; i < value_.size(); ++i)
            n += keep(i);
        return n;
    }
    bool empty() const { return begin() == end(); }

    /// Selected values appended to `out` (cleared first).
    void values(std::vector<double>& out) const
    {
        out.clear();
        for (std::size_t i = 0; i < value_.size(); ++i)
            if (keep(i))
                out.push_back(value_[i]);
    }

private:
    bool keep(std::size_t i) const noexcept
    {
        if (!crit_)
            return true;
        return crit_->contains(crit_->attribute == SelectAttribute::Axis ? axis_[i] : value_[i]);
    }

    std::span<const double> axis_;
    std::span<const double> value_;
    std::optional<SelectionCriterion> crit_;
};

/// Records of every series for one (dimension, representation), grouped by series in root order.
struct SecondaryTable {
    TableId id;
    AxisKind axis_kind = AxisKind::Time;
    std::vector<std::size_t> offsets; ///< size n+1; rows of root row r are [offsets[r], offsets[r+1])
    std::vector<double> axis;
    std::vector<double> value;

    std::size_t row_count() const noexcept { return value.size(); }
    std::string name() const { return table_name(id); }
};

class RelationalStore {
public:
    RelationalStore() = default;

    RelationalStore(std::vector<std::int64_t> ids, std::vector<double> targets, std::vector<SecondaryTable> tables)
        : ids_(std::move(ids)), targets_(std::move(targets)), tables_(std::move(tables))
    {
        for (std::size_t r = 0; r < ids_.size(); ++r)
            position_.emplace(ids_[r], r);
        for (std::size_t t = 0; t < tables_.size(); ++t)
            table_index_.emplace(tables_[t].id, t);
    }

    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<std::int64_t>& series_ids() const noexcept { return ids_; }
    const std::vector<double>& targets() const noexcept { return targets_; }
    const std::vector<SecondaryTable>& tables() const noexcept { return tables_; }

    bool has_table(TableId id) const { return table_index_.count(id) != 0; }

    const SecondaryTable& table(TableId id) const
    {
        auto it = table_index_.find(id);
        if (it == table_index_.end())
            throw KeyError("unknown table " + table_name(id));
        return tables_[it->second];
    }

    /// Root row of a series id.
    std::size_t row_of(std::int64_t series_id) const
    {
        auto it = position_.find(series_id);
        if (it == position_.end())
            throw KeyError("unknown series id " + std::to_string(series_id));
        return it->second;
    }

private:
    std::vector<std::int64_t> ids_;
    std::vector<double> targets_;
    std::vector<SecondaryTable> tables_;
    std::unordered_map<std::int64_t, std::size_t> position_;
    std::map<TableId, std::size_t> table_index_;
};

/// Tables are laid out dimension-major, representations in the order given by `kinds`.
inline RelationalStore build_store(const TimeSeriesDataset& ds, const std::vector<ReprKind>& kinds)
{
    const std::size_t n = ds.size();
    std::vector<SecondaryTable> tables;
    tables.reserve(ds.dim_count * kinds.size());
    for (std::size_t d = 0; d < ds.dim_count; ++d) {
        for (ReprKind k : kinds) {
            SecondaryTable t;
            t.id = {d, k};
            t.axis_kind = axis_kind_of(k);
            t.offsets.reserve(n + 1);
            t.offsets.push_back(0);
            for (const Series& s : ds.series) {
                if (d >= s.dims.size())
                    throw ConsistencyError("series " + std::to_string(s.id) + " lacks dimension " +
                                           std::to_string(d + 1));
                Channel c = transform(s.dims[d], k);
                t.axis.insert(t.axis.end(), c.axis.begin(), c.axis.end());
                t.value.insert(t.value.end(), c.value.begin(), c.value.end());
                t.offsets.push_back(t.value.size());
            }
            tables.push_back(std::move(t));
        }
    }
    std::vector<std::int64_t> ids;
    ids.reserve(n);
    for (const Series& s : ds.series)
        ids.push_back(s.id);
    return RelationalStore(std::move(ids), ds.targets, std::move(tables));
}

/// Records of one root row (no id lookup).
inline RecordView select_row_records(const SecondaryTable& t, std::size_t row,
                                     const std::optional<SelectionCriterion>& crit)
{
    const std::size_t b = t.offsets.at(row);
    const std::size_t e = t.offsets.at(row + 1);
    return RecordView(std::span<const double>(t.axis).subspan(b, e - b),
                      std::span<const double>(t.value).subspan(b, e - b), crit);
}

inline RecordView select_records(const RelationalStore& store, const SecondaryTable& t, std::int64_t series_id,
                                 const std::optional<SelectionCriterion>& crit)
{
    return select_row_records(t, store.row_of(series_id), crit);
}

/// CSV dump (series_id,axis,value) of one secondary table.
inline void write_table_csv(std::ostream& out, const RelationalStore& store, const SecondaryTable& t)
{
    out << "series_id," << axis_attribute_name(t.axis_kind) << ',' << value_attribute_name(t.id) << '\n';
    for (std::size_t r = 0; r < store.size(); ++r)
        for (std::size_t i = t.offsets[r]; i < t.offsets[r + 1]; ++i)
            out << store.series_ids()[r] << ',' << format_number(t.axis[i]) << ',' << format_number(t.value[i])
                << '\n';
}

/// Parse "TS5D"-style table names.
inline std::optional<TableId> parse_table_name(std::string_view s)
{
    if (s.size() < 3 || s.substr(0, 2) != "TS")
        return std::nullopt;
    s.remove_prefix(2);
    std::size_t digits = 0;
    while (digits < s.size() && s[digits] >= '0' && s[digits] <= '9')
        ++digits;
    auto dim = detail::parse_int(s.substr(0, digits));
    if (!digits || !dim || *dim < 1)
        return std::nullopt;
    auto suffix = s.substr(digits);
    for (ReprKind k : all_repr_kinds)
        if (suffix == repr_suffix(k))
            return TableId{static_cast<std::size_t>(*dim - 1), k};
    return std::nullopt;
}

} // namespace ifx
