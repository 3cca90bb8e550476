/**
 * @file regress.hpp
 * @brief End regressors over a flattened feature table: CART regression tree,
 *        bagged forest and the mean-of-targets baseline.
 */
#pragma once

#include "ifx/error.hpp"
#include "ifx/lang.hpp"
#include "ifx/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace ifx {

inline double rmse(std::span<const double> preds, std::span<const double> truths)
{
    if (preds.size() != truths.size())
        throw DomainError("rmse: " + std::to_string(preds.size()) + " predictions for " +
                          std::to_string(truths.size()) + " targets");
    if (preds.empty())
        throw DomainError("rmse of empty vectors");
    double ss = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        ss += (preds[i] - truths[i]) * (preds[i] - truths[i]);
    return std::sqrt(ss / static_cast<double>(preds.size()));
}

struct MeanBaseline {
    double mu = 0.0;
};

inline MeanBaseline fit_baseline(std::span<const double> targets)
{
    if (targets.empty())
        throw DomainError("baseline needs at least one target");
    double s = 0.0;
    for (double t : targets)
        s += t;
    return {s / static_cast<double>(targets.size())};
}

struct TreeParams {
    std::size_t max_depth = 0; ///< 0 = unlimited
    std::size_t min_leaf = 1;
};

struct TreeNode {
    int feature = -1; ///< -1 for a leaf
    double threshold = 0.0;
    bool missing_left = true;
    int left = -1;
    int right = -1;
    double value = 0.0; ///< mean training target reaching the node
    std::size_t count = 0;

    bool leaf() const noexcept { return feature < 0; }
};

struct RegressionTree {
    std::vector<std::string> features;
    std::vector<TreeNode> nodes; ///< nodes[0] is the root

    /// `row` is indexed like `features`.
    double predict(std::span<const FeatureValue> row) const
    {
        if (row.size() != features.size())
            throw SchemaError("row has " + std::to_string(row.size()) + " values, tree expects " +
                              std::to_string(features.size()));
        std::size_t k = 0;
        while (!nodes[k].leaf()) {
            const TreeNode& n = nodes[k];
            const FeatureValue& x = row[static_cast<std::size_t>(n.feature)];
            const bool go_left = x ? *x <= n.threshold : n.missing_left;
            k = static_cast<std::size_t>(go_left ? n.left : n.right);
        }
        return nodes[k].value;
    }

    std::size_t depth() const
    {
        std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
        std::size_t d = 0;
        while (!stack.empty()) {
            auto [k, level] = stack.back();
            stack.pop_back();
            d = std::max(d, level);
            if (!nodes[k].leaf()) {
                stack.emplace_back(static_cast<std::size_t>(nodes[k].left), level + 1);
                stack.emplace_back(static_cast<std::size_t>(nodes[k].right), level + 1);
            }
        }
        return d;
    }
};

struct ForestParams {
    std::size_t trees = 100;
    bool bootstrap = true;
    double feature_frac = 1.0; ///< share of features tried at each split
    std::uint64_t seed = 0;
    TreeParams tree;
};

struct ForestModel {
    std::vector<std::string> features;
    std::vector<RegressionTree> trees;
    std::vector<std::uint64_t> tree_seeds;
    double feature_frac = 1.0;
    bool bootstrap = true;

    double predict(std::span<const FeatureValue> row) const
    {
        double s = 0.0;
        for (const auto& t : trees)
            s += t.predict(row);
        return s / static_cast<double>(trees.size());
    }
};

namespace detail {

/// Seed for tree t derived from the master seed (splitmix64 finaliser).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t t)
{
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (t + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class TreeBuilder {
public:
    TreeBuilder(const FlattenedTable& table, TreeParams params, double feature_frac, std::uint64_t seed)
        : table_(table), params_(params), feature_frac_(feature_frac), rng_(seed)
    {
    }

    RegressionTree build(std::vector<std::size_t> rows)
    {
        if (rows.empty())
            throw DomainError("cannot fit a tree on an empty table");
        tree_.features = table_.names;
        tree_.nodes.clear();
        grow(std::move(rows), 0);
        return std::move(tree_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        bool missing_left = true;
        double gain = 0.0;
    };

    int grow(std::vector<std::size_t> rows, std::size_t depth)
    {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double s = 0.0, ss = 0.0;
        for (auto r : rows) {
            s += table_.targets[r];
            ss += table_.targets[r] * table_.targets[r];
        }
        const double n = static_cast<double>(rows.size());
        tree_.nodes[id].value = s / n;
        tree_.nodes[id].count = rows.size();

        const double sse = ss - s * s / n;
        const bool depth_ok = params_.max_depth == 0 || depth < params_.max_depth;
        if (!depth_ok || rows.size() < 2 * params_.min_leaf || sse <= 1e-12 * std::max(1.0, ss))
            return id;

        Split best = find_split(rows, sse);
        if (best.feature < 0)
            return id;

        std::vector<std::size_t> left, right;
        const auto& col = table_.columns[static_cast<std::size_t>(best.feature)];
        for (auto r : rows) {
            const bool go_left = col[r] ? *col[r] <= best.threshold : best.missing_left;
            (go_left ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        tree_.nodes[id].feature = best.feature;
        tree_.nodes[id].threshold = best.threshold;
        tree_.nodes[id].missing_left = best.missing_left;
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        tree_.nodes[id].left = l;
        tree_.nodes[id].right = r;
        return id;
    }

    std::vector<std::size_t> candidate_features()
    {
        std::vector<std::size_t> f(table_.cols());
        std::iota(f.begin(), f.end(), 0);
        if (feature_frac_ >= 1.0 || f.empty())
            return f;
        const auto k = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(feature_frac_ * static_cast<double>(f.size()))));
        for (std::size_t i = 0; i < k && i + 1 < f.size(); ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, f.size() - 1);
            std::swap(f[i], f[pick(rng_)]);
        }
        f.resize(k);
        std::sort(f.begin(), f.end());
        return f;
    }

    static double sse_of(double s, double ss, double n) { return n > 0 ? ss - s * s / n : 0.0; }

    Split find_split(const std::vector<std::size_t>& rows, double parent_sse)
    {
        Split best;
        const double min_gain = 1e-12 * std::max(1.0, parent_sse);
        std::vector<std::pair<double, double>> xs;
        for (std::size_t f : candidate_features()) {
            const auto& col = table_.columns[f];
            xs.clear();
            double ms = 0.0, mss = 0.0;
            std::size_t mn = 0;
            for (auto r : rows) {
                const double y = table_.targets[r];
                if (col[r])
                    xs.emplace_back(*col[r], y);
                else {
                    ms += y;
                    mss += y * y;
                    ++mn;
                }
            }
            if (xs.size() < 2)
                continue;
            std::sort(xs.begin(), xs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            double total_s = 0.0, total_ss = 0.0;
            for (const auto& [x, y] : xs) {
                total_s += y;
                total_ss += y * y;
            }
            double ls = 0.0, lss = 0.0;
            const std::size_t m = xs.size();
            for (std::size_t k = 0; k + 1 < m; ++k) {
                ls += xs[k].second;
                lss += xs[k].second * xs[k].second;
                if (xs[k].first == xs[k + 1].first)
                    continue;
                const std::size_t nl = k + 1, nr = m - nl;
                // Missing values follow the child with more training rows
                const bool miss_left = nl >= nr;
                const std::size_t cl = nl + (miss_left ? mn : 0), cr = nr + (miss_left ? 0 : mn);
                if (cl < params_.min_leaf || cr < params_.min_leaf)
                    continue;
                const double sl = ls + (miss_left ? ms : 0.0), ssl = lss + (miss_left ? mss : 0.0);
                const double sr = total_s - ls + (miss_left ? 0.0 : ms);
                const double ssr = total_ss - lss + (miss_left ? 0.0 : mss);
                const double gain =
                    parent_sse - sse_of(sl, ssl, static_cast<double>(cl)) - sse_of(sr, ssr, static_cast<double>(cr));
                if (gain > best.gain + min_gain || (best.feature < 0 && gain > min_gain)) {
                    double thr = 0.5 * (xs[k].first + xs[k + 1].first);
                    if (!(thr < xs[k + 1].first))
                        thr = xs[k].first;
                    best = Split{static_cast<int>(f), thr, miss_left, gain};
                }
            }
        }
        return best;
    }

    const FlattenedTable& table_;
    TreeParams params_;
    double feature_frac_;
    std::mt19937_64 rng_;
    RegressionTree tree_;
};

} // namespace detail

/**
 * @brief Greedy variance-reduction CART.
 *
 * Thresholds are midpoints between consecutive distinct values; at equal
 * gain the lower feature index and lower threshold win. Missing values are
 * routed to the child holding more training rows.
 */
inline RegressionTree fit_tree(const FlattenedTable& table, TreeParams params = {})
{
    std::vector<std::size_t> rows(table.rows());
    std::iota(rows.begin(), rows.end(), 0);
    return detail::TreeBuilder(table, params, 1.0, 0).build(std::move(rows));
}

inline ForestModel fit_forest(const FlattenedTable& table, ForestParams params = {}, unsigned threads = 1)
{
    if (params.trees == 0)
        throw DomainError("forest needs at least one tree");
    if (table.rows() == 0)
        throw DomainError("cannot fit a forest on an empty table");
    ForestModel forest;
    forest.features = table.names;
    forest.feature_frac = params.feature_frac;
    forest.bootstrap = params.bootstrap;
    forest.trees.resize(params.trees);
    forest.tree_seeds.resize(params.trees);
    for (std::size_t t = 0; t < params.trees; ++t)
        forest.tree_seeds[t] = detail::derive_seed(params.seed, t);

    parallel_for(params.trees, threads, [&](std::size_t t) {
        std::mt19937_64 rng(forest.tree_seeds[t]);
        std::vector<std::size_t> rows(table.rows());
        if (params.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, table.rows() - 1);
            for (auto& r : rows)
                r = pick(rng);
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        detail::TreeBuilder builder(table, params.tree, params.feature_frac, rng());
        forest.trees[t] = builder.build(std::move(rows));
    });
    return forest;
}

using Regressor = std::variant<MeanBaseline, RegressionTree, ForestModel>;

inline const std::vector<std::string>& regressor_features(const Regressor& model)
{
    static const std::vector<std::string> none;
    if (const auto* t = std::get_if<RegressionTree>(&model))
        return t->features;
    if (const auto* f = std::get_if<ForestModel>(&model))
        return f->features;
    return none;
}

/// Predict with columns matched by name; an absent column is a SchemaError.
inline std::vector<double> predict(const Regressor& model, const FlattenedTable& table)
{
    const auto& names = regressor_features(model);
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t j = 0; j < table.names.size(); ++j)
        pos.emplace(table.names[j], j);
    std::vector<std::size_t> map;
    for (const auto& n : names) {
        auto it = pos.find(n);
        if (it == pos.end())
            throw SchemaError("table has no column " + n);
        map.push_back(it->second);
    }
    std::vector<double> out(table.rows());
    std::vector<FeatureValue> row(names.size());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t k = 0; k < map.size(); ++k)
            row[k] = table.columns[map[k]][r];
        out[r] = std::visit(
            [&](const auto& m) -> double {
                using M = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<M, MeanBaseline>)
                    return m.mu;
                else
                    return m.predict(row);
            },
            model);
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON model documents
// ---------------------------------------------------------------------------

inline constexpr int model_format_version = 1;

namespace detail {

inline nlohmann::json tree_json(const RegressionTree& t)
{
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) {
        nlohmann::json j{{"value", n.value}, {"count", n.count}};
        if (!n.leaf()) {
            j["feature"] = n.feature;
            j["threshold"] = n.threshold;
            j["missing_left"] = n.missing_left;
            j["left"] = n.left;
            j["right"] = n.right;
        }
        nodes.push_back(std::move(j));
    }
    return {{"nodes", std::move(nodes)}};
}

inline RegressionTree tree_from_json(const nlohmann::json& j, const std::vector<std::string>& features)
{
    RegressionTree t;
    t.features = features;
    for (const auto& n : j.at("nodes")) {
        TreeNode node;
        node.value = n.at("value").get<double>();
        node.count = n.value("count", std::size_t{0});
        if (n.contains("feature")) {
            node.feature = n.at("feature").get<int>();
            node.threshold = n.at("threshold").get<double>();
            node.missing_left = n.at("missing_left").get<bool>();
            node.left = n.at("left").get<int>();
            node.right = n.at("right").get<int>();
        }
        t.nodes.push_back(node);
    }
    const auto size = static_cast<int>(t.nodes.size());
    if (size == 0)
        throw ModelError("tree without nodes");
    // children always follow their parent, which also rules out cycles
    for (int k = 0; k < size; ++k) {
        const auto& n = t.nodes[static_cast<std::size_t>(k)];
        if (!n.leaf() && (n.left <= k || n.left >= size || n.right <= k || n.right >= size ||
                          n.feature >= static_cast<int>(features.size())))
            throw ModelError("tree node references out of range");
    }
    return t;
}

} // namespace detail

inline nlohmann::json to_json(const Regressor& model)
{
    nlohmann::json j{{"format", "ifx-model"}, {"version", model_format_version}};
    if (const auto* b = std::get_if<MeanBaseline>(&model)) {
        j["kind"] = "baseline";
        j["mean"] = b->mu;
        j["features"] = nlohmann::json::array();
    } else if (const auto* t = std::get_if<RegressionTree>(&model)) {
        j["kind"] = "tree";
        j["features"] = t->features;
        j["tree"] = detail::tree_json(*t);
    } else {
        const auto& f = std::get<ForestModel>(model);
        j["kind"] = "forest";
        j["features"] = f.features;
        j["feature_frac"] = f.feature_frac;
        j["bootstrap"] = f.bootstrap;
        j["tree_seeds"] = f.tree_seeds;
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : f.trees)
            trees.push_back(detail::tree_json(t));
        j["trees"] = std::move(trees);
    }
    return j;
}

inline Regressor regressor_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format").get<std::string>() != "ifx-model")
            throw ModelError("not an ifx model document");
        if (j.at("version").get<int>() != model_format_version)
            throw ModelError("unsupported model version " + j.at("version").dump());
        const auto kind = j.at("kind").get<std::string>();
        const auto features = j.at("features").get<std::vector<std::string>>();
        if (kind == "baseline")
            return MeanBaseline{j.at("mean").get<double>()};
        if (kind == "tree")
            return detail::tree_from_json(j.at("tree"), features);
        if (kind == "forest") {
            ForestModel f;
            f.features = features;
            f.feature_frac = j.at("feature_frac").get<double>();
            f.bootstrap = j.at("bootstrap").get<bool>();
            f.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
            for (const auto& t : j.at("trees"))
                f.trees.push_back(detail::tree_from_json(t, features));
            if (f.trees.empty())
                throw ModelError("forest without trees");
            return f;
        }
        throw ModelError("unknown model kind " + kind);
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed model document: ") + e.what());
    }
}

} // namespace ifx
