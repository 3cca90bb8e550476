/**
 * @file pipeline.hpp
 * @brief End-to-end runs: representations, random features, MAP selection,
 * regressor fit, test evaluation, artifacts; plus benchmark and
 * target-permutation drivers.
 *
 * Everything fitted (quantiles, discretisations, regressor) sees training
 * data only. Test series are evaluated against the features chosen on train.
 */
#pragma once

#include "ifx/dataset.hpp"
#include "ifx/lang.hpp"
#include "ifx/modl.hpp"
#include "ifx/regress.hpp"
#include "ifx/report.hpp"
#include "ifx/store.hpp"
#include "ifx/transforms.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ifx {

enum class RegressorKind { Tree, Forest, Baseline, Export };

constexpr std::string_view regressor_kind_name(RegressorKind k) noexcept
{
    switch (k) {
    case RegressorKind::Tree: return "tree";
    case RegressorKind::Forest: return "forest";
    case RegressorKind::Baseline: return "baseline";
    case RegressorKind::Export: return "export";
    }
    return "";
}

inline std::optional<RegressorKind> parse_regressor_kind(std::string_view s)
{
    for (auto k : {RegressorKind::Tree, RegressorKind::Forest, RegressorKind::Baseline, RegressorKind::Export})
        if (detail::lower(s) == regressor_kind_name(k))
            return k;
    return std::nullopt;
}

/// "all" or a comma-separated list of representation names (Orig, D, DD, S, SS, ACF, PS).
inline std::optional<std::vector<ReprKind>> parse_repr_list(std::string_view s)
{
    if (detail::lower(detail::trim(s)) == "all")
        return std::vector<ReprKind>(all_repr_kinds.begin(), all_repr_kinds.end());
    std::vector<ReprKind> out;
    for (auto tok : detail::split_top(s, ',')) {
        auto k = parse_repr_kind(detail::trim(tok));
        if (!k)
            return std::nullopt;
        if (std::find(out.begin(), out.end(), *k) == out.end())
            out.push_back(*k);
    }
    if (out.empty())
        return std::nullopt;
    return out;
}

struct RunConfig {
    std::filesystem::path train;
    std::filesystem::path train_targets; ///< set for the long CSV format
    std::filesystem::path test;          ///< optional
    std::filesystem::path test_targets;
    std::size_t k = 100;
    std::uint64_t seed = 0;
    std::vector<ReprKind> transforms{all_repr_kinds.begin(), all_repr_kinds.end()};
    RegressorKind regressor = RegressorKind::Tree;
    double min_level = 0.0;
    std::filesystem::path out = "ifx_out";
    unsigned threads = 1;
    SamplerConfig sampler;
    TreeParams tree;
    ForestParams forest;
};

/// Wall-clock seconds per stage.
struct StageTimes {
    double transforms = 0, sampling = 0, evaluation = 0, selection = 0, fit = 0, predict = 0;

    double total() const { return transforms + sampling + evaluation + selection + fit + predict; }

    nlohmann::json to_json() const
    {
        return {{"transforms", transforms}, {"sampling", sampling}, {"evaluation", evaluation},
                {"selection", selection},   {"fit", fit},           {"predict", predict},
                {"total", total()}};
    }
};

namespace detail {

class Stopwatch {
public:
    double lap()
    {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline void require_valid(const TimeSeriesDataset& ds, std::string_view role)
{
    const auto report = validate(ds);
    if (report.ok())
        return;
    std::string msg = std::string(role) + " dataset is invalid:";
    for (const auto& p : report.problems)
        msg += "\n  " + p;
    throw DataError(msg);
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << text;
    if (!out)
        throw Error("write failed: " + path.string());
}

} // namespace detail

/// `.ts` archive file, or a long-format values CSV when `targets` is non-empty.
inline TimeSeriesDataset load_input(const std::filesystem::path& path, const std::filesystem::path& targets = {})
{
    return targets.empty() ? load_dataset(path) : parse_csv_pair(path, targets);
}

/// Output of the train-only part of a run.
struct Selection {
    RelationalStore store;
    std::vector<FeatureExpr> constructed;
    FlattenedTable table;               ///< every constructed feature
    std::vector<ScoredFeature> scored;  ///< level descending
    std::vector<FeatureExpr> chosen;    ///< informative, in ranked order
    FlattenedTable chosen_table;        ///< informative columns only
};

inline Selection select_on_train(const TimeSeriesDataset& train, const RunConfig& cfg, StageTimes& times)
{
    if (cfg.min_level < 0)
        throw DomainError("min_level must be >= 0");
    detail::Stopwatch sw;
    Selection s;
    s.store = build_store(train, cfg.transforms);
    times.transforms += sw.lap();

    const StoreSchema schema = make_schema(s.store, cfg.sampler.quantile_grid);
    s.constructed = sample_features(schema, cfg.k, cfg.seed, cfg.sampler);
    times.sampling += sw.lap();

    s.table = flatten(s.store, s.constructed, cfg.threads);
    times.evaluation += sw.lap();

    s.scored = select_features(s.table, cfg.threads);
    std::vector<std::size_t> keep;
    for (const auto& f : s.scored)
        if (f.level > cfg.min_level)
            keep.push_back(f.column);
    s.chosen_table = s.table.project(keep);
    s.chosen = s.chosen_table.exprs;
    times.selection += sw.lap();
    return s;
}

/// Baseline whenever no feature survived selection.
inline Regressor fit_regressor(RegressorKind kind, const FlattenedTable& table, const RunConfig& cfg)
{
    if (table.cols() == 0 || kind == RegressorKind::Baseline || kind == RegressorKind::Export)
        return fit_baseline(table.targets);
    if (kind == RegressorKind::Forest) {
        ForestParams p = cfg.forest;
        p.seed = cfg.seed;
        p.tree = cfg.tree;
        return fit_forest(table, p, cfg.threads);
    }
    return fit_tree(table, cfg.tree);
}

inline std::string_view regressor_name(const Regressor& m)
{
    switch (m.index()) {
    case 0: return "baseline";
    case 1: return "tree";
    default: return "forest";
    }
}

/// Informative features per representation, every requested kind listed.
inline std::map<std::string, std::size_t> representation_counts(const std::vector<FeatureExpr>& exprs,
                                                                const std::vector<ReprKind>& kinds)
{
    std::map<std::string, std::size_t> out;
    for (auto k : kinds)
        out[std::string(repr_name(k))] = 0;
    for (const auto& e : exprs)
        ++out[std::string(repr_name(e.table.kind))];
    return out;
}

struct RunResult {
    Selection selection;
    Regressor model;
    double train_rmse = 0;
    std::optional<FlattenedTable> test_table;
    std::vector<double> test_predictions;
    std::optional<double> test_rmse;
    std::optional<double> baseline_test_rmse;
    StageTimes times;
};

inline RunResult run_pipeline(const TimeSeriesDataset& train, const TimeSeriesDataset* test, const RunConfig& cfg)
{
    detail::require_valid(train, "training");
    if (test) {
        detail::require_valid(*test, "test");
        if (test->dim_count != train.dim_count)
            throw ConsistencyError("test data has " + std::to_string(test->dim_count) + " dimensions, training data " +
                                   std::to_string(train.dim_count));
    }

    RunResult r;
    r.selection = select_on_train(train, cfg, r.times);

    detail::Stopwatch sw;
    r.model = fit_regressor(cfg.regressor, r.selection.chosen_table, cfg);
    r.train_rmse = rmse(predict(r.model, r.selection.chosen_table), r.selection.chosen_table.targets);
    r.times.fit += sw.lap();

    if (test) {
        const RelationalStore test_store = build_store(*test, cfg.transforms);
        r.test_table = flatten(test_store, r.selection.chosen, cfg.threads);
        r.test_predictions = predict(r.model, *r.test_table);
        r.test_rmse = rmse(r.test_predictions, r.test_table->targets);
        const std::vector<double> mean(test->size(), fit_baseline(train.targets).mu);
        r.baseline_test_rmse = rmse(mean, r.test_table->targets);
        r.times.predict += sw.lap();
    }
    return r;
}

inline nlohmann::json run_report_json(const RunResult& r, const RunConfig& cfg, const TimeSeriesDataset& train,
                                      const TimeSeriesDataset* test)
{
    std::vector<std::string> kinds;
    for (auto k : cfg.transforms)
        kinds.emplace_back(repr_name(k));
    auto opt = [](const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(nullptr); };
    return {{"dataset", train.name},
            {"n_train", train.size()},
            {"n_test", test ? nlohmann::json(test->size()) : nlohmann::json(nullptr)},
            {"dimensions", train.dim_count},
            {"config",
             {{"k", cfg.k},
              {"seed", cfg.seed},
              {"transforms", kinds},
              {"regressor", regressor_kind_name(cfg.regressor)},
              {"min_level", cfg.min_level}}},
            {"secondary_tables", r.selection.store.tables().size()},
            {"constructed", r.selection.constructed.size()},
            {"informative", r.selection.chosen.size()},
            {"informative_by_representation", representation_counts(r.selection.chosen, cfg.transforms)},
            {"model", regressor_name(r.model)},
            {"rmse_train", r.train_rmse},
            {"rmse_test", opt(r.test_rmse)},
            {"rmse_test_baseline", opt(r.baseline_test_rmse)}};
}

/// Write every artifact of a finished run into `cfg.out`.
inline void write_run_artifacts(const RunResult& r, const RunConfig& cfg, const TimeSeriesDataset& train,
                                const TimeSeriesDataset* test)
{
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out);
    std::ostringstream buf;

    write_flattened_csv(buf, r.selection.chosen_table);
    detail::write_text(cfg.out / "features_train.csv", buf.str());
    if (r.test_table) {
        buf.str({});
        write_flattened_csv(buf, *r.test_table);
        detail::write_text(cfg.out / "features_test.csv", buf.str());
    }

    const std::size_t n = r.selection.table.rows();
    detail::write_text(cfg.out / "scored_features.json",
                       scored_features_json(r.selection.scored, n, cfg.min_level).dump(2) + "\n");
    buf.str({});
    write_scored_table(buf, informative(r.selection.scored, cfg.min_level));
    detail::write_text(cfg.out / "scored_features.txt", buf.str());

    if (cfg.regressor != RegressorKind::Export) {
        detail::write_text(cfg.out / "model.json", to_json(r.model).dump(2) + "\n");
        if (r.test_table) {
            buf.str({});
            buf << "series_id,prediction,target\n";
            for (std::size_t i = 0; i < r.test_predictions.size(); ++i)
                buf << r.test_table->series_ids[i] << ',' << format_number(r.test_predictions[i]) << ','
                    << format_number(r.test_table->targets[i]) << '\n';
            detail::write_text(cfg.out / "predictions.csv", buf.str());
        }
    }
    detail::write_text(cfg.out / "report.json", run_report_json(r, cfg, train, test).dump(2) + "\n");
    detail::write_text(cfg.out / "timings.json", r.times.to_json().dump(2) + "\n");
}

inline RunResult cmd_run(const RunConfig& cfg)
{
    const TimeSeriesDataset train = load_input(cfg.train, cfg.train_targets);
    std::optional<TimeSeriesDataset> test;
    if (!cfg.test.empty())
        test = load_input(cfg.test, cfg.test_targets);
    const TimeSeriesDataset* tp = test ? &*test : nullptr;
    RunResult r = run_pipeline(train, tp, cfg);
    write_run_artifacts(r, cfg, train, tp);
    return r;
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

struct BenchmarkInput {
    std::string name;
    std::filesystem::path train, test;
    std::filesystem::path train_targets, test_targets;
};

struct BenchmarkRow {
    std::string name;
    std::size_t n_train = 0;
    std::size_t informative = 0;
    std::map<std::string, std::size_t> by_representation;
    std::vector<std::optional<double>> rmse; ///< one per regressor column
    double seconds = 0;
    std::string error; ///< non-empty when the dataset failed
};

struct WinTieLoss {
    std::size_t win = 0, tie = 0, loss = 0;
};

struct BenchmarkReport {
    std::vector<RegressorKind> regressors;
    std::vector<BenchmarkRow> rows;
    std::vector<WinTieLoss> vs_first; ///< column c against column 0 (lower RMSE wins)

    nlohmann::json to_json() const
    {
        nlohmann::json cols = nlohmann::json::array(), rs = nlohmann::json::array(), wtl = nlohmann::json::array();
        for (auto k : regressors)
            cols.push_back(regressor_kind_name(k));
        for (const auto& r : rows) {
            nlohmann::json rm = nlohmann::json::array();
            for (const auto& x : r.rmse)
                rm.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
            rs.push_back({{"dataset", r.name},
                          {"n_train", r.n_train},
                          {"informative", r.informative},
                          {"informative_by_representation", r.by_representation},
                          {"rmse", rm},
                          {"seconds", r.seconds},
                          {"error", r.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.error)}});
        }
        for (std::size_t c = 1; c < vs_first.size(); ++c)
            wtl.push_back({{"regressor", regressor_kind_name(regressors[c])},
                           {"against", regressor_kind_name(regressors[0])},
                           {"win", vs_first[c].win},
                           {"tie", vs_first[c].tie},
                           {"loss", vs_first[c].loss}});
        return {{"regressors", cols}, {"rows", rs}, {"win_tie_loss", wtl}};
    }
};

inline bool rmse_tie(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

inline void tally_win_tie_loss(BenchmarkReport& rep)
{
    rep.vs_first.assign(rep.regressors.size(), {});
    for (const auto& row : rep.rows) {
        if (!row.error.empty() || row.rmse.empty() || !row.rmse[0])
            continue;
        for (std::size_t c = 1; c < row.rmse.size(); ++c) {
            if (!row.rmse[c])
                continue;
            const double a = *row.rmse[c], b = *row.rmse[0];
            auto& w = rep.vs_first[c];
            if (rmse_tie(a, b))
                ++w.tie;
            else if (a < b)
                ++w.win;
            else
                ++w.loss;
        }
    }
}

/// One benchmark row; selection runs once and every regressor reuses it.
inline BenchmarkRow benchmark_dataset(const std::string& name, const TimeSeriesDataset& train,
                                      const TimeSeriesDataset& test, const std::vector<RegressorKind>& regressors,
                                      const RunConfig& cfg)
{
    BenchmarkRow row;
    row.name = name;
    row.n_train = train.size();
    detail::Stopwatch sw;
    detail::require_valid(train, "training");
    detail::require_valid(test, "test");
    StageTimes times;
    const Selection sel = select_on_train(train, cfg, times);
    row.informative = sel.chosen.size();
    row.by_representation = representation_counts(sel.chosen, cfg.transforms);
    const FlattenedTable test_table = flatten(build_store(test, cfg.transforms), sel.chosen, cfg.threads);
    for (auto kind : regressors) {
        if (kind == RegressorKind::Export) {
            row.rmse.emplace_back();
            continue;
        }
        const Regressor m = fit_regressor(kind, sel.chosen_table, cfg);
        row.rmse.emplace_back(rmse(predict(m, test_table), test_table.targets));
    }
    row.seconds = sw.lap();
    return row;
}

inline BenchmarkReport cmd_benchmark(const std::vector<BenchmarkInput>& inputs,
                                     const std::vector<RegressorKind>& regressors, const RunConfig& cfg)
{
    if (inputs.empty())
        throw DomainError("benchmark needs at least one dataset");
    if (regressors.empty())
        throw DomainError("benchmark needs at least one regressor");
    BenchmarkReport rep;
    rep.regressors = regressors;
    for (const auto& in : inputs) {
        try {
            const auto train = load_input(in.train, in.train_targets);
            const auto test = load_input(in.test, in.test_targets);
            rep.rows.push_back(benchmark_dataset(in.name, train, test, regressors, cfg));
        } catch (const std::exception& e) {
            BenchmarkRow row;
            row.name = in.name;
            row.rmse.assign(regressors.size(), std::nullopt);
            row.error = e.what();
            rep.rows.push_back(std::move(row));
        }
    }
    tally_win_tie_loss(rep);
    return rep;
}

inline void write_benchmark_table(std::ostream& out, const BenchmarkReport& rep)
{
    out << "dataset,n_train,informative";
    for (auto k : rep.regressors)
        out << ",rmse_" << regressor_kind_name(k);
    out << ",seconds,error\n";
    for (const auto& r : rep.rows) {
        out << csv_field(r.name) << ',' << r.n_train << ',' << r.informative;
        for (const auto& x : r.rmse) {
            out << ',';
            if (x)
                out << format_number(*x);
        }
        out << ',' << format_number(r.seconds) << ',' << csv_field(r.error) << '\n';
    }
    for (std::size_t c = 1; c < rep.vs_first.size(); ++c)
        out << "# " << regressor_kind_name(rep.regressors[c]) << " vs " << regressor_kind_name(rep.regressors[0])
            << ": W/T/L " << rep.vs_first[c].win << '/' << rep.vs_first[c].tie << '/' << rep.vs_first[c].loss
            << '\n';
}

// ---------------------------------------------------------------------------
// Target permutation
// ---------------------------------------------------------------------------

struct PermutationReport {
    bool control = false; ///< targets left in place
    std::vector<std::size_t> informative; ///< per trial

    std::size_t zero_trials() const
    {
        return static_cast<std::size_t>(std::count(informative.begin(), informative.end(), 0u));
    }

    nlohmann::json to_json() const
    {
        return {{"trials", informative.size()},
                {"control", control},
                {"informative", informative},
                {"trials_with_zero_informative", zero_trials()}};
    }
};

/**
 * @brief Re-run selection against shuffled training targets.
 *
 * Features are drawn and evaluated once (they do not depend on the target);
 * each trial shuffles the targets with its own derived seed and re-scores.
 * With `control` set the targets stay in their original order.
 */
inline PermutationReport permutation_test(const TimeSeriesDataset& train, const RunConfig& cfg, std::size_t trials,
                                          bool control = false)
{
    if (trials == 0)
        throw DomainError("permutation test needs at least one trial");
    detail::require_valid(train, "training");
    StageTimes times;
    Selection sel = select_on_train(train, cfg, times);
    PermutationReport rep;
    rep.control = control;
    FlattenedTable table = sel.table;
    for (std::size_t t = 0; t < trials; ++t) {
        table.targets = sel.table.targets;
        if (!control) {
            std::mt19937_64 rng(detail::derive_seed(cfg.seed ^ 0x5065726dULL, t));
            std::shuffle(table.targets.begin(), table.targets.end(), rng);
        }
        std::size_t count = 0;
        if (table.cols() > 0)
            for (const auto& f : select_features(table, cfg.threads))
                count += f.level > cfg.min_level;
        rep.informative.push_back(count);
    }
    return rep;
}

inline PermutationReport cmd_permutation_test(const RunConfig& cfg, std::size_t trials, bool control = false)
{
    return permutation_test(load_input(cfg.train, cfg.train_targets), cfg, trials, control);
}

} // namespace ifx
