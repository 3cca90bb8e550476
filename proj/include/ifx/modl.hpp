/**
 * @file modl.hpp
 * @brief Bayesian MAP bivariate discretisation of (feature, target) pairs.
 *
 * A model partitions the ranks of v into I intervals and the ranks of y into
 * J intervals. Its cost in bits is
 *
 *   2 log N + log C(N+I-1, I-1) + sum_i log C(N_i.+J-1, J-1)
 *   + sum_i log(N_i.! / prod_j N_ij!) + sum_j log N_.j!
 *
 * and level = 1 - cost / cost(null), with cost(null) = 2 log N + log N!.
 * All logarithms are base 2. A feature is informative when its best model
 * has a positive level.
 */
#pragma once

#include "ifx/error.hpp"
#include "ifx/lang.hpp"
#include "ifx/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace ifx {

/// log2(n!) and log2 C(n, k) from a cumulative table.
class LogTable {
public:
    explicit LogTable(std::size_t n_max = 0) { reserve(n_max); }

    void reserve(std::size_t n_max)
    {
        if (lf_.empty())
            lf_.push_back(0.0);
        for (std::size_t n = lf_.size(); n <= n_max; ++n) {
            acc_ += std::log2(static_cast<long double>(n));
            lf_.push_back(static_cast<double>(acc_));
        }
    }

    std::size_t capacity() const noexcept { return lf_.empty() ? 0 : lf_.size() - 1; }

    double log_factorial(std::size_t n) const { return lf_.at(n); }

    double log_binomial(std::size_t n, std::size_t k) const
    {
        if (k > n)
            return -std::numeric_limits<double>::infinity();
        return lf_.at(n) - lf_.at(k) - lf_.at(n - k);
    }

private:
    std::vector<double> lf_;
    long double acc_ = 0.0L;
};

struct DiscretisationModel {
    std::size_t I = 1;
    std::size_t J = 1;
    std::vector<std::size_t> v_bounds; ///< I-1 cut ranks: points sorted by v before each cut
    std::vector<std::size_t> y_bounds; ///< J-1 cut ranks on y
    std::vector<std::vector<std::size_t>> counts; ///< I x J

    /// Cut positions on the v scale (midpoints); nullopt for the cut after the Missing block.
    std::vector<std::optional<double>> v_cut_values;
    std::vector<double> y_cut_values;
    std::size_t missing_count = 0;

    std::size_t total() const
    {
        std::size_t n = 0;
        for (const auto& r : counts)
            for (auto c : r)
                n += c;
        return n;
    }

    bool is_null() const noexcept { return I == 1 && J == 1; }
};

struct ScoredFeature {
    std::string name;
    std::size_t column = 0;
    DiscretisationModel model;
    double cost = 0.0;
    double null_cost = 0.0;
    double level = 0.0;
};

inline double null_cost(std::size_t n, const LogTable& lt)
{
    if (n < 1)
        throw DomainError("null_cost needs N >= 1");
    return 2.0 * std::log2(static_cast<double>(n)) + lt.log_factorial(n);
}

inline double null_cost(std::size_t n)
{
    if (n < 1)
        throw DomainError("null_cost needs N >= 1");
    return null_cost(n, LogTable(n));
}

inline double level(double cost, double null_cost_value)
{
    if (!(null_cost_value > 0.0))
        throw DomainError("level needs a positive null cost");
    return 1.0 - cost / null_cost_value;
}

/// Cost in bits of an I x J count matrix over N points.
inline double cost(const std::vector<std::vector<std::size_t>>& counts, std::size_t n, const LogTable& lt)
{
    const std::size_t I = counts.size();
    if (I == 0)
        throw ModelError("model has no v interval");
    const std::size_t J = counts.front().size();
    if (J == 0)
        throw ModelError("model has no y interval");
    std::vector<std::size_t> col(J, 0);
    std::size_t total = 0;
    double row_part = 0.0;
    for (const auto& r : counts) {
        if (r.size() != J)
            throw ModelError("ragged count matrix");
        std::size_t ni = 0;
        double cells = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            ni += r[j];
            col[j] += r[j];
            cells += lt.log_factorial(r[j]);
        }
        if (ni == 0)
            throw ModelError("empty v interval");
        total += ni;
        row_part += lt.log_binomial(ni + J - 1, J - 1) + lt.log_factorial(ni) - cells;
    }
    if (total != n)
        throw ModelError("counts sum to " + std::to_string(total) + ", expected N = " + std::to_string(n));
    double col_part = 0.0;
    for (auto c : col) {
        if (c == 0)
            throw ModelError("empty y interval");
        col_part += lt.log_factorial(c);
    }
    return 2.0 * std::log2(static_cast<double>(n)) + lt.log_binomial(n + I - 1, I - 1) + row_part + col_part;
}

inline double cost(const DiscretisationModel& m, std::size_t n)
{
    if (m.counts.size() != m.I || (m.I && m.counts.front().size() != m.J))
        throw ModelError("count matrix shape does not match I x J");
    LogTable lt(n + m.I + m.J + 1);
    return cost(m.counts, n, lt);
}

namespace detail {

/// Sparse histogram: (label, count) pairs sorted by label.
struct Hist {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> cells;
    std::size_t total = 0;
};

inline Hist merge_hist(const Hist& a, const Hist& b)
{
    Hist out;
    out.total = a.total + b.total;
    out.cells.reserve(a.cells.size() + b.cells.size());
    std::size_t i = 0, j = 0;
    while (i < a.cells.size() || j < b.cells.size()) {
        if (j == b.cells.size() || (i < a.cells.size() && a.cells[i].first < b.cells[j].first))
            out.cells.push_back(a.cells[i++]);
        else if (i == a.cells.size() || b.cells[j].first < a.cells[i].first)
            out.cells.push_back(b.cells[j++]);
        else {
            out.cells.emplace_back(a.cells[i].first, a.cells[i].second + b.cells[j].second);
            ++i;
            ++j;
        }
    }
    return out;
}

/// Sum of cell(c) over the cells of the union of two histograms, without building it.
template <class Cell>
double merged_cells(const Hist& a, const Hist& b, Cell&& cell)
{
    double s = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.cells.size() || j < b.cells.size()) {
        if (j == b.cells.size() || (i < a.cells.size() && a.cells[i].first < b.cells[j].first))
            s += cell(a.cells[i++].second);
        else if (i == a.cells.size() || b.cells[j].first < a.cells[i].first)
            s += cell(b.cells[j++].second);
        else
            s += cell(a.cells[i++].second + b.cells[j++].second);
    }
    return s;
}

/**
 * @brief Bottom-up merging of adjacent units along one axis.
 *
 * An interval with histogram h costs base(h.total) - sum of cell(count);
 * the axis as a whole adds global(#intervals). The best adjacent merge
 * (smallest delta, lowest index on ties) is applied while the full delta is
 * non-positive. Returns interval starts.
 */
template <class Base, class Cell, class Global>
std::vector<std::size_t> greedy_merge(std::vector<Hist> units, Base&& base, Cell&& cell, Global&& global)
{
    const std::size_t n = units.size();
    std::vector<std::size_t> starts;
    if (n == 0)
        return starts;

    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> prev(n), next(n);
    std::vector<double> t(n);
    std::vector<std::uint32_t> version(n, 0);
    auto term = [&](const Hist& h) {
        double s = base(h.total);
        for (const auto& c : h.cells)
            s -= cell(c.second);
        return s;
    };
    for (std::size_t u = 0; u < n; ++u) {
        prev[u] = u ? u - 1 : none;
        next[u] = u + 1 < n ? u + 1 : none;
        t[u] = term(units[u]);
    }

    using Entry = std::tuple<double, std::size_t, std::uint32_t, std::uint32_t>;
    auto entry = [&](std::size_t u) {
        const std::size_t w = next[u];
        const double d = base(units[u].total + units[w].total) - merged_cells(units[u], units[w], cell) - t[u] - t[w];
        return Entry{d, u, version[u], version[w]};
    };
    std::vector<Entry> heap;
    heap.reserve(2 * n);
    for (std::size_t u = 0; u + 1 < n; ++u)
        heap.push_back(entry(u));
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq(std::greater<>{}, std::move(heap));
    auto push = [&](std::size_t u) {
        if (u != none && next[u] != none)
            pq.push(entry(u));
    };

    std::size_t count = n;
    while (!pq.empty() && count > 1) {
        auto [d, u, vu, vw] = pq.top();
        pq.pop();
        const std::size_t w = next[u];
        if (w == none || version[u] != vu || version[w] != vw)
            continue;
        if (d + global(count - 1) - global(count) > 0.0)
            break;
        units[u] = merge_hist(units[u], units[w]);
        units[w] = Hist{};
        t[u] = term(units[u]);
        next[u] = next[w];
        if (next[w] != none)
            prev[next[w]] = u;
        ++version[u];
        ++version[w];
        --count;
        push(prev[u]);
        push(u);
    }

    for (std::size_t u = 0; u != none; u = next[u])
        starts.push_back(u);
    return starts;
}

} // namespace detail

struct OptimizerConfig {
    std::size_t max_alternations = 10;
};

/**
 * @brief Search for the lowest-cost bivariate grid of one feature column.
 *
 * Points are grouped into elementary intervals of tied values on each axis
 * (Missing v values form the lowest v group). From several equal-frequency
 * seed partitions, greedy bottom-up merging alternates between the axes
 * (one axis re-merged from its elementary intervals while the other is
 * fixed) until the cost stops decreasing. The best grid is then refined by
 * single-boundary moves and merges on both axes, and compared with the null
 * model; the cheaper of the two is returned.
 */
class GridOptimizer {
public:
    GridOptimizer(const std::vector<FeatureValue>& v, const std::vector<double>& y, OptimizerConfig config = {})
        : config_(config)
    {
        n_ = y.size();
        if (n_ == 0)
            throw DomainError("optimize needs at least one point");
        if (v.size() != n_)
            throw DomainError("feature and target lengths differ");
        for (double t : y)
            if (!std::isfinite(t))
                throw DomainError("non-finite target value");
        lt_.reserve(2 * n_ + 2);
        group_axis(y, v);
    }

    ScoredFeature run()
    {
        ScoredFeature out;
        out.null_cost = null_cost(n_, lt_);
        State best = null_state();
        double best_cost = full_cost(best);

        if (n_ > 1 && gv_ > 1 && gy_ > 1) {
            for (std::size_t parts : seed_sizes(gy_)) {
                State s = alternate(null_state(), equal_frequency(y_size_, parts), true);
                consider(s, best, best_cost);
            }
            for (std::size_t parts : seed_sizes(gv_)) {
                State s = alternate(null_state(), equal_frequency(v_size_, parts), false);
                consider(s, best, best_cost);
            }
            post_optimize(best);
            best_cost = full_cost(best);
        }

        const double null_c = out.null_cost;
        if (!(best_cost < null_c)) {
            best = null_state();
            best_cost = null_c;
        }
        out.model = to_model(best);
        out.cost = best_cost;
        out.level = null_c > 0.0 ? level(best_cost, null_c) : 0.0;
        return out;
    }

private:
    // An axis partition: label per elementary group plus interval count.
    struct Partition {
        std::vector<std::uint32_t> label;
        std::size_t parts = 1;
    };
    struct State {
        Partition v, y;
    };

    // ---- setup -------------------------------------------------------------

    void group_axis(const std::vector<double>& y, const std::vector<FeatureValue>& v)
    {
        std::vector<std::size_t> idx(n_);
        std::iota(idx.begin(), idx.end(), 0);

        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return y[a] < y[b]; });
        yg_.assign(n_, 0);
        y_values_.clear();
        y_size_.clear();
        for (std::size_t k = 0; k < n_; ++k) {
            const std::size_t p = idx[k];
            if (k == 0 || y[p] != y[idx[k - 1]]) {
                y_values_.push_back(y[p]);
                y_size_.push_back(0);
            }
            yg_[p] = static_cast<std::uint32_t>(y_size_.size() - 1);
            ++y_size_.back();
        }
        gy_ = y_size_.size();

        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
            if (!v[a] || !v[b])
                return !v[a] && v[b];
            return *v[a] < *v[b];
        });
        vg_.assign(n_, 0);
        v_values_.clear();
        v_size_.clear();
        missing_ = 0;
        for (std::size_t k = 0; k < n_; ++k) {
            const std::size_t p = idx[k];
            bool fresh = k == 0;
            if (!fresh) {
                const auto& a = v[idx[k - 1]];
                const auto& b = v[p];
                fresh = a.has_value() != b.has_value() || (a && *a != *b);
            }
            if (fresh) {
                v_values_.push_back(v[p]);
                v_size_.push_back(0);
            }
            if (!v[p])
                ++missing_;
            vg_[p] = static_cast<std::uint32_t>(v_size_.size() - 1);
            ++v_size_.back();
        }
        gv_ = v_size_.size();

        // members of each group, in CSR layout
        auto csr = [&](const std::vector<std::uint32_t>& g, std::size_t groups, std::vector<std::size_t>& start,
                       std::vector<std::uint32_t>& pts) {
            start.assign(groups + 1, 0);
            for (auto x : g)
                ++start[x + 1];
            for (std::size_t i = 0; i < groups; ++i)
                start[i + 1] += start[i];
            pts.assign(n_, 0);
            std::vector<std::size_t> fill(start.begin(), start.end() - 1);
            for (std::size_t p = 0; p < n_; ++p)
                pts[fill[g[p]]++] = static_cast<std::uint32_t>(p);
        };
        csr(vg_, gv_, v_start_, v_pts_);
        csr(yg_, gy_, y_start_, y_pts_);
    }

    State null_state() const
    {
        State s;
        s.v.label.assign(gv_, 0);
        s.y.label.assign(gy_, 0);
        return s;
    }

    static std::vector<std::size_t> seed_sizes(std::size_t groups)
    {
        std::vector<std::size_t> sizes;
        for (std::size_t p : {2, 3, 4, 6, 8, 12, 16, 24, 32})
            if (p < groups)
                sizes.push_back(p);
        return sizes;
    }

    /// Equal-frequency partition of groups into about `parts` intervals.
    Partition equal_frequency(const std::vector<std::size_t>& sizes, std::size_t parts) const
    {
        Partition p;
        p.label.resize(sizes.size());
        std::size_t cum = 0;
        std::uint32_t cur = 0;
        for (std::size_t g = 0; g < sizes.size(); ++g) {
            // group g opens a new interval once the running count passes the next quantile
            if (g > 0 && cum * parts >= (cur + 1) * n_ && cur + 1 < parts)
                ++cur;
            p.label[g] = cur;
            cum += sizes[g];
        }
        p.parts = cur + 1;
        return p;
    }

    // ---- cost ----------------------------------------------------------------

    std::vector<std::size_t> dense_counts(const State& s) const
    {
        std::vector<std::size_t> c(s.v.parts * s.y.parts, 0);
        for (std::size_t p = 0; p < n_; ++p)
            ++c[s.v.label[vg_[p]] * s.y.parts + s.y.label[yg_[p]]];
        return c;
    }

    double full_cost(const State& s) const
    {
        const std::size_t I = s.v.parts, J = s.y.parts;
        auto c = dense_counts(s);
        std::vector<std::size_t> col(J, 0);
        double total = 2.0 * std::log2(static_cast<double>(n_)) + lt_.log_binomial(n_ + I - 1, I - 1);
        for (std::size_t i = 0; i < I; ++i) {
            std::size_t ni = 0;
            double cells = 0.0;
            for (std::size_t j = 0; j < J; ++j) {
                ni += c[i * J + j];
                col[j] += c[i * J + j];
                cells += lt_.log_factorial(c[i * J + j]);
            }
            total += lt_.log_binomial(ni + J - 1, J - 1) + lt_.log_factorial(ni) - cells;
        }
        for (auto cj : col)
            total += lt_.log_factorial(cj);
        return total;
    }

    void consider(const State& s, State& best, double& best_cost) const
    {
        const double c = full_cost(s);
        if (c < best_cost) {
            best = s;
            best_cost = c;
        }
    }

    // ---- greedy phases -------------------------------------------------------

    /// Histograms of each group of one axis over the interval labels of the other.
    std::vector<detail::Hist> unit_hists(const std::vector<std::size_t>& start, const std::vector<std::uint32_t>& pts,
                                         const std::vector<std::uint32_t>& other_group,
                                         const Partition& other) const
    {
        const std::size_t groups = start.size() - 1;
        std::vector<detail::Hist> units(groups);
        std::vector<std::uint32_t> labels;
        for (std::size_t g = 0; g < groups; ++g) {
            labels.clear();
            for (std::size_t k = start[g]; k < start[g + 1]; ++k)
                labels.push_back(other.label[other_group[pts[k]]]);
            std::sort(labels.begin(), labels.end());
            auto& h = units[g];
            h.total = labels.size();
            for (auto l : labels) {
                if (!h.cells.empty() && h.cells.back().first == l)
                    ++h.cells.back().second;
                else
                    h.cells.emplace_back(l, 1);
            }
        }
        return units;
    }

    static Partition from_starts(const std::vector<std::size_t>& starts, std::size_t groups)
    {
        Partition p;
        p.label.resize(groups);
        p.parts = starts.size();
        for (std::size_t k = 0; k < starts.size(); ++k) {
            const std::size_t end = k + 1 < starts.size() ? starts[k + 1] : groups;
            for (std::size_t g = starts[k]; g < end; ++g)
                p.label[g] = static_cast<std::uint32_t>(k);
        }
        return p;
    }

    /// Re-merge the v axis from its elementary groups with y fixed.
    Partition merge_v(const Partition& y) const
    {
        const std::size_t J = y.parts;
        auto units = unit_hists(v_start_, v_pts_, yg_, y);
        auto base = [&](std::size_t r) { return lt_.log_binomial(r + J - 1, J - 1) + lt_.log_factorial(r); };
        auto cell = [&](std::size_t c) { return lt_.log_factorial(c); };
        auto global = [&](std::size_t I) { return lt_.log_binomial(n_ + I - 1, I - 1); };
        return from_starts(detail::greedy_merge(std::move(units), base, cell, global), gv_);
    }

    /// Re-merge the y axis from its elementary groups with v fixed.
    Partition merge_y(const Partition& v) const
    {
        std::vector<std::size_t> row_sum(v.parts, 0);
        for (std::size_t p = 0; p < n_; ++p)
            ++row_sum[v.label[vg_[p]]];
        auto units = unit_hists(y_start_, y_pts_, vg_, v);
        auto base = [&](std::size_t c) { return lt_.log_factorial(c); };
        auto cell = base;
        auto global = [&](std::size_t J) {
            double g = 0.0;
            for (auto r : row_sum)
                g += lt_.log_binomial(r + J - 1, J - 1);
            return g;
        };
        return from_starts(detail::greedy_merge(std::move(units), base, cell, global), gy_);
    }

    /// Alternate single-axis merges starting from a seed on one axis.
    State alternate(State s, Partition seed, bool seed_on_y) const
    {
        if (seed_on_y)
            s.y = std::move(seed);
        else
            s.v = std::move(seed);
        State best = s;
        double best_cost = std::numeric_limits<double>::infinity();
        bool move_v = seed_on_y;
        double last = std::numeric_limits<double>::infinity();
        for (std::size_t it = 0; it < 2 * config_.max_alternations; ++it) {
            if (move_v)
                s.v = merge_v(s.y);
            else
                s.y = merge_y(s.v);
            move_v = !move_v;
            const double c = full_cost(s);
            if (c < best_cost) {
                best = s;
                best_cost = c;
            }
            if (it % 2 == 1) {
                if (!(c < last - 1e-9))
                    break;
                last = c;
            }
        }
        return best;
    }

    // ---- post-optimization ---------------------------------------------------

    struct Grid {
        std::size_t I = 1, J = 1;
        std::vector<std::size_t> cells; // I x J
        std::vector<std::size_t> row, col;

        std::size_t& at(std::size_t i, std::size_t j) { return cells[i * J + j]; }
        std::size_t at(std::size_t i, std::size_t j) const { return cells[i * J + j]; }
    };

    Grid make_grid(const State& s) const
    {
        Grid g;
        g.I = s.v.parts;
        g.J = s.y.parts;
        g.cells = dense_counts(s);
        g.row.assign(g.I, 0);
        g.col.assign(g.J, 0);
        for (std::size_t i = 0; i < g.I; ++i)
            for (std::size_t j = 0; j < g.J; ++j) {
                g.row[i] += g.at(i, j);
                g.col[j] += g.at(i, j);
            }
        return g;
    }

    /// Counts of one elementary group over the other axis' intervals.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> group_hist(const std::vector<std::size_t>& start,
                                                                     const std::vector<std::uint32_t>& pts,
                                                                     std::size_t g,
                                                                     const std::vector<std::uint32_t>& other_group,
                                                                     const Partition& other) const
    {
        std::vector<std::uint32_t> labels;
        for (std::size_t k = start[g]; k < start[g + 1]; ++k)
            labels.push_back(other.label[other_group[pts[k]]]);
        std::sort(labels.begin(), labels.end());
        std::vector<std::pair<std::uint32_t, std::uint32_t>> h;
        for (auto l : labels) {
            if (!h.empty() && h.back().first == l)
                ++h.back().second;
            else
                h.emplace_back(l, 1);
        }
        return h;
    }

    double lf(std::size_t n) const { return lt_.log_factorial(n); }

    /// Delta of moving v-group `g` from row a to row b.
    double v_move_delta(const Grid& gr, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& h, std::size_t s,
                        std::size_t a, std::size_t b) const
    {
        const std::size_t J = gr.J;
        const std::size_t ra = gr.row[a], rb = gr.row[b];
        double d = lt_.log_binomial(ra - s + J - 1, J - 1) - lt_.log_binomial(ra + J - 1, J - 1) +
                   lt_.log_binomial(rb + s + J - 1, J - 1) - lt_.log_binomial(rb + J - 1, J - 1) + lf(ra - s) -
                   lf(ra) + lf(rb + s) - lf(rb);
        for (const auto& [j, c] : h)
            d -= lf(gr.at(a, j) - c) - lf(gr.at(a, j)) + lf(gr.at(b, j) + c) - lf(gr.at(b, j));
        return d;
    }

    /// Delta of moving y-group `g` from column a to column b.
    double y_move_delta(const Grid& gr, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& h, std::size_t s,
                        std::size_t a, std::size_t b) const
    {
        const std::size_t ca = gr.col[a], cb = gr.col[b];
        double d = lf(ca - s) - lf(ca) + lf(cb + s) - lf(cb);
        for (const auto& [i, c] : h)
            d -= lf(gr.at(i, a) - c) - lf(gr.at(i, a)) + lf(gr.at(i, b) + c) - lf(gr.at(i, b));
        return d;
    }

    /// Try moving a single group across each interval boundary of one axis; returns true if anything moved.
    bool boundary_sweep(State& s, bool on_v) const
    {
        Grid gr = make_grid(s);
        Partition& part = on_v ? s.v : s.y;
        const Partition& other = on_v ? s.y : s.v;
        const auto& start = on_v ? v_start_ : y_start_;
        const auto& pts = on_v ? v_pts_ : y_pts_;
        const auto& other_group = on_v ? yg_ : vg_;
        const std::size_t groups = part.label.size();
        bool moved = false;

        std::vector<std::size_t> first(part.parts), last(part.parts);
        auto refresh = [&] {
            for (std::size_t g = 0; g < groups; ++g) {
                if (g == 0 || part.label[g] != part.label[g - 1])
                    first[part.label[g]] = g;
                last[part.label[g]] = g;
            }
        };
        refresh();

        for (std::size_t a = 0; a + 1 < part.parts; ++a) {
            const std::size_t b = a + 1;
            for (;;) {
                double best = -1e-9;
                int dir = 0;
                std::vector<std::pair<std::uint32_t, std::uint32_t>> best_h;
                std::size_t best_s = 0;
                if (first[a] != last[a]) { // a keeps at least one group
                    const std::size_t g = last[a];
                    auto h = group_hist(start, pts, g, other_group, other);
                    const std::size_t sz = start[g + 1] - start[g];
                    const double d = on_v ? v_move_delta(gr, h, sz, a, b) : y_move_delta(gr, h, sz, a, b);
                    if (d < best) {
                        best = d;
                        dir = +1;
                        best_h = std::move(h);
                        best_s = sz;
                    }
                }
                if (first[b] != last[b]) {
                    const std::size_t g = first[b];
                    auto h = group_hist(start, pts, g, other_group, other);
                    const std::size_t sz = start[g + 1] - start[g];
                    const double d = on_v ? v_move_delta(gr, h, sz, b, a) : y_move_delta(gr, h, sz, b, a);
                    if (d < best) {
                        best = d;
                        dir = -1;
                        best_h = std::move(h);
                        best_s = sz;
                    }
                }
                if (dir == 0)
                    break;
                const std::size_t from = dir > 0 ? a : b, to = dir > 0 ? b : a;
                const std::size_t g = dir > 0 ? last[a] : first[b];
                for (const auto& [k, c] : best_h) {
                    if (on_v) {
                        gr.at(from, k) -= c;
                        gr.at(to, k) += c;
                    } else {
                        gr.at(k, from) -= c;
                        gr.at(k, to) += c;
                    }
                }
                auto& sums = on_v ? gr.row : gr.col;
                sums[from] -= best_s;
                sums[to] += best_s;
                part.label[g] = static_cast<std::uint32_t>(to);
                if (dir > 0) {
                    --last[a];
                    --first[b];
                } else {
                    ++last[a];
                    ++first[b];
                }
                moved = true;
            }
        }
        return moved;
    }

    /// Apply the best improving merge of two adjacent intervals on one axis.
    bool merge_step(State& s, bool on_v) const
    {
        Partition& part = on_v ? s.v : s.y;
        if (part.parts < 2)
            return false;
        Grid gr = make_grid(s);
        const std::size_t I = gr.I, J = gr.J;
        double best = -1e-9;
        std::size_t best_k = 0;
        bool found = false;
        if (on_v) {
            const double global = lt_.log_binomial(n_ + I - 2, I - 2) - lt_.log_binomial(n_ + I - 1, I - 1);
            auto row_term = [&](std::size_t r, auto cell) {
                double cells = 0.0;
                for (std::size_t j = 0; j < J; ++j)
                    cells += lf(cell(j));
                return lt_.log_binomial(r + J - 1, J - 1) + lf(r) - cells;
            };
            for (std::size_t i = 0; i + 1 < I; ++i) {
                const double merged = row_term(gr.row[i] + gr.row[i + 1],
                                               [&](std::size_t j) { return gr.at(i, j) + gr.at(i + 1, j); });
                const double d = global + merged - row_term(gr.row[i], [&](std::size_t j) { return gr.at(i, j); }) -
                                 row_term(gr.row[i + 1], [&](std::size_t j) { return gr.at(i + 1, j); });
                if (d < best) {
                    best = d;
                    best_k = i;
                    found = true;
                }
            }
        } else {
            double global = 0.0;
            for (auto r : gr.row)
                global += lt_.log_binomial(r + J - 2, J - 2) - lt_.log_binomial(r + J - 1, J - 1);
            auto col_term = [&](std::size_t c, auto cell) {
                double cells = 0.0;
                for (std::size_t i = 0; i < I; ++i)
                    cells += lf(cell(i));
                return lf(c) - cells;
            };
            for (std::size_t j = 0; j + 1 < J; ++j) {
                const double merged = col_term(gr.col[j] + gr.col[j + 1],
                                               [&](std::size_t i) { return gr.at(i, j) + gr.at(i, j + 1); });
                const double d = global + merged - col_term(gr.col[j], [&](std::size_t i) { return gr.at(i, j); }) -
                                 col_term(gr.col[j + 1], [&](std::size_t i) { return gr.at(i, j + 1); });
                if (d < best) {
                    best = d;
                    best_k = j;
                    found = true;
                }
            }
        }
        if (!found)
            return false;
        for (auto& l : part.label)
            if (l > best_k)
                --l;
        --part.parts;
        return true;
    }

    void post_optimize(State& s) const
    {
        // each accepted step strictly lowers the cost, so the loop terminates; the cap bounds pathological runs
        for (std::size_t round = 0; round < 4 * (gv_ + gy_); ++round) {
            bool changed = false;
            changed |= boundary_sweep(s, true);
            changed |= boundary_sweep(s, false);
            changed |= merge_step(s, true);
            changed |= merge_step(s, false);
            if (!changed)
                break;
        }
    }

    // ---- output --------------------------------------------------------------

    DiscretisationModel to_model(const State& s) const
    {
        DiscretisationModel m;
        m.I = s.v.parts;
        m.J = s.y.parts;
        m.missing_count = missing_;
        auto c = dense_counts(s);
        m.counts.assign(m.I, std::vector<std::size_t>(m.J, 0));
        for (std::size_t i = 0; i < m.I; ++i)
            for (std::size_t j = 0; j < m.J; ++j)
                m.counts[i][j] = c[i * m.J + j];

        std::size_t cum = 0;
        for (std::size_t g = 0; g + 1 < gv_; ++g) {
            cum += v_size_[g];
            if (s.v.label[g] != s.v.label[g + 1]) {
                m.v_bounds.push_back(cum);
                if (v_values_[g] && v_values_[g + 1])
                    m.v_cut_values.emplace_back(0.5 * (*v_values_[g] + *v_values_[g + 1]));
                else
                    m.v_cut_values.emplace_back(std::nullopt);
            }
        }
        cum = 0;
        for (std::size_t g = 0; g + 1 < gy_; ++g) {
            cum += y_size_[g];
            if (s.y.label[g] != s.y.label[g + 1]) {
                m.y_bounds.push_back(cum);
                m.y_cut_values.push_back(0.5 * (y_values_[g] + y_values_[g + 1]));
            }
        }
        return m;
    }

    OptimizerConfig config_;
    std::size_t n_ = 0;
    LogTable lt_;
    std::vector<std::uint32_t> vg_, yg_;
    std::vector<std::optional<double>> v_values_;
    std::vector<double> y_values_;
    std::vector<std::size_t> v_size_, y_size_;
    std::vector<std::size_t> v_start_, y_start_;
    std::vector<std::uint32_t> v_pts_, y_pts_;
    std::size_t gv_ = 0, gy_ = 0, missing_ = 0;
};

/// Best grid model for one (v, y) column; level >= 0 since the null model is always a candidate.
inline ScoredFeature optimize(const std::vector<FeatureValue>& v, const std::vector<double>& y,
                              OptimizerConfig config = {})
{
    return GridOptimizer(v, y, config).run();
}

inline ScoredFeature optimize(const std::vector<double>& v, const std::vector<double>& y, OptimizerConfig config = {})
{
    return optimize(std::vector<FeatureValue>(v.begin(), v.end()), y, config);
}

/// Score every column; sorted by level (descending), ties kept in column order.
inline std::vector<ScoredFeature> select_features(const FlattenedTable& table, unsigned threads = 1,
                                                  OptimizerConfig config = {})
{
    if (table.rows() == 0)
        throw DomainError("select_features needs at least one row");
    std::vector<ScoredFeature> scored(table.cols());
    parallel_for(table.cols(), threads, [&](std::size_t j) {
        scored[j] = optimize(table.columns[j], table.targets, config);
        scored[j].name = table.names.at(j);
        scored[j].column = j;
    });
    std::stable_sort(scored.begin(), scored.end(),
                     [](const ScoredFeature& a, const ScoredFeature& b) { return a.level > b.level; });
    return scored;
}

/// Features whose level is strictly above `min_level`.
inline std::vector<ScoredFeature> informative(const std::vector<ScoredFeature>& scored, double min_level = 0.0)
{
    std::vector<ScoredFeature> out;
    for (const auto& s : scored)
        if (s.level > min_level)
            out.push_back(s);
    return out;
}

} // namespace ifx
