// Command-line front end: run, benchmark, permtest, dump-store, gen-synth.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include "ifx/pipeline.hpp"
#include "ifx/synth.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <thread>

namespace {

constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_internal = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string transforms = "all";
    unsigned threads = 1;
};

void add_selection_options(CLI::App* sub, ifx::RunConfig& cfg, CommonOptions& common)
{
    sub->add_option("--k", cfg.k, "number of random features to construct")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", cfg.seed, "seed for feature sampling and forests");
    sub->add_option("--transforms", common.transforms, "'all' or a list such as Orig,D,ACF");
    sub->add_option("--min-level", cfg.min_level, "keep features with level strictly above this")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--threads", common.threads, "worker threads (0 = all cores)");
}

void add_regressor_options(CLI::App* sub, ifx::RunConfig& cfg)
{
    sub->add_option("--trees", cfg.forest.trees, "forest size")->check(CLI::PositiveNumber);
    sub->add_option("--feature-frac", cfg.forest.feature_frac, "share of features tried per forest split")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--max-depth", cfg.tree.max_depth, "tree depth limit (0 = none)");
    sub->add_option("--min-leaf", cfg.tree.min_leaf, "minimum rows per leaf")->check(CLI::PositiveNumber);
}

void finish_config(ifx::RunConfig& cfg, const CommonOptions& common)
{
    auto kinds = ifx::parse_repr_list(common.transforms);
    if (!kinds)
        throw UsageError("unknown representation list: " + common.transforms +
                         " (use 'all' or names among Orig,D,DD,S,SS,ACF,PS)");
    cfg.transforms = *kinds;
    cfg.threads = common.threads ? common.threads : std::max(1u, std::thread::hardware_concurrency());
}

std::vector<ifx::RegressorKind> parse_regressors(const std::string& list)
{
    std::vector<ifx::RegressorKind> out;
    for (auto tok : ifx::detail::split_top(list, ',')) {
        auto k = ifx::parse_regressor_kind(ifx::detail::trim(tok));
        if (!k)
            throw UsageError("unknown regressor: " + std::string(tok));
        out.push_back(*k);
    }
    if (out.empty())
        throw UsageError("no regressor given");
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    ifx::detail::write_text(path, text);
}

int run_main(int argc, char** argv)
{
    CLI::App app{"Interpretable feature extraction for time series extrinsic regression"};
    app.require_subcommand(1);

    // run
    ifx::RunConfig run_cfg;
    CommonOptions run_common;
    std::string run_regressor = "tree";
    auto* run = app.add_subcommand("run", "construct, select, fit and evaluate on one train/test split");
    run->add_option("--train", run_cfg.train, "training .ts file (or long-format values CSV)")->required();
    run->add_option("--train-targets", run_cfg.train_targets, "targets CSV for a long-format training file");
    run->add_option("--test", run_cfg.test, "test .ts file (or long-format values CSV)");
    run->add_option("--test-targets", run_cfg.test_targets, "targets CSV for a long-format test file");
    run->add_option("--regressor", run_regressor, "tree, forest, baseline or export");
    run->add_option("--out", run_cfg.out, "output directory");
    add_selection_options(run, run_cfg, run_common);
    add_regressor_options(run, run_cfg);

    // benchmark
    ifx::RunConfig bench_cfg;
    CommonOptions bench_common;
    std::vector<std::string> bench_train, bench_test;
    std::string bench_regressors = "tree,forest,baseline";
    std::filesystem::path bench_out = "ifx_benchmark";
    auto* bench = app.add_subcommand("benchmark", "run several train/test pairs and compare regressors");
    bench->add_option("--train", bench_train, "training files, one per dataset")->required();
    bench->add_option("--test", bench_test, "test files, paired with --train in order")->required();
    bench->add_option("--regressors", bench_regressors, "regressor columns; the first is the reference");
    bench->add_option("--out", bench_out, "output directory");
    add_selection_options(bench, bench_cfg, bench_common);
    add_regressor_options(bench, bench_cfg);

    // permtest
    ifx::RunConfig perm_cfg;
    CommonOptions perm_common;
    std::size_t trials = 10;
    bool control = false;
    std::filesystem::path perm_out;
    auto* perm = app.add_subcommand("permtest", "count informative features against shuffled targets");
    perm->add_option("--train", perm_cfg.train, "training file")->required();
    perm->add_option("--train-targets", perm_cfg.train_targets, "targets CSV for a long-format training file");
    perm->add_option("--trials", trials, "number of shuffles")->check(CLI::PositiveNumber);
    perm->add_flag("--control", control, "keep the targets in place");
    perm->add_option("--out", perm_out, "directory for permtest.json");
    add_selection_options(perm, perm_cfg, perm_common);

    // dump-store
    ifx::RunConfig dump_cfg;
    CommonOptions dump_common;
    std::string table;
    std::filesystem::path dump_out;
    auto* dump = app.add_subcommand("dump-store", "list secondary tables or write one as CSV");
    dump->add_option("--train", dump_cfg.train, "dataset file")->required();
    dump->add_option("--train-targets", dump_cfg.train_targets, "targets CSV for a long-format file");
    dump->add_option("--transforms", dump_common.transforms, "'all' or a list such as Orig,D,ACF");
    dump->add_option("--table", table, "table name such as TS3D; omitted lists all tables");
    dump->add_option("--out", dump_out, "CSV file (default stdout)");

    // gen-synth
    ifx::SynthConfig synth;
    std::size_t target_dim = 1;
    bool no_signal = false;
    std::filesystem::path synth_out;
    auto* gen = app.add_subcommand("gen-synth", "write a seeded synthetic .ts dataset");
    gen->add_option("--n", synth.n, "number of series")->check(CLI::PositiveNumber);
    gen->add_option("--dims", synth.dims, "dimensions")->check(CLI::PositiveNumber);
    gen->add_option("--length", synth.length, "points per channel")->check(CLI::Range(3, 1 << 24));
    gen->add_option("--target-dim", target_dim, "1-based dimension driving the target")->check(CLI::PositiveNumber);
    gen->add_option("--noise", synth.noise, "target noise standard deviation")->check(CLI::NonNegativeNumber);
    gen->add_flag("--no-signal", no_signal, "targets are pure noise");
    gen->add_option("--seed", synth.seed, "generator seed");
    gen->add_option("--out", synth_out, "output .ts file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        if (*run) {
            finish_config(run_cfg, run_common);
            auto kind = ifx::parse_regressor_kind(run_regressor);
            if (!kind)
                throw UsageError("unknown regressor: " + run_regressor);
            run_cfg.regressor = *kind;
            const auto r = ifx::cmd_run(run_cfg);
            std::cout << "constructed " << r.selection.constructed.size() << " features, "
                      << r.selection.chosen.size() << " informative; model " << ifx::regressor_name(r.model) << '\n';
            if (r.test_rmse)
                std::cout << "test RMSE " << *r.test_rmse << " (mean baseline " << *r.baseline_test_rmse << ")\n";
            std::cout << "artifacts in " << run_cfg.out.string() << '\n';
        } else if (*bench) {
            finish_config(bench_cfg, bench_common);
            if (bench_train.size() != bench_test.size())
                throw UsageError("--train and --test must be given the same number of times");
            std::vector<ifx::BenchmarkInput> inputs;
            for (std::size_t i = 0; i < bench_train.size(); ++i)
                inputs.push_back({std::filesystem::path(bench_train[i]).stem().string(), bench_train[i],
                                  bench_test[i], {}, {}});
            const auto rep = ifx::cmd_benchmark(inputs, parse_regressors(bench_regressors), bench_cfg);
            std::ostringstream table_text;
            ifx::write_benchmark_table(table_text, rep);
            std::filesystem::create_directories(bench_out);
            write_file(bench_out / "benchmark.json", rep.to_json().dump(2) + "\n");
            write_file(bench_out / "benchmark.csv", table_text.str());
            std::cout << table_text.str();
        } else if (*perm) {
            finish_config(perm_cfg, perm_common);
            const auto rep = ifx::cmd_permutation_test(perm_cfg, trials, control);
            if (!perm_out.empty())
                write_file(perm_out / "permtest.json", rep.to_json().dump(2) + "\n");
            std::cout << "informative per trial:";
            for (auto c : rep.informative)
                std::cout << ' ' << c;
            std::cout << "\ntrials with none: " << rep.zero_trials() << '/' << rep.informative.size() << '\n';
        } else if (*dump) {
            finish_config(dump_cfg, dump_common);
            const auto ds = ifx::load_input(dump_cfg.train, dump_cfg.train_targets);
            const auto store = ifx::build_store(ds, dump_cfg.transforms);
            std::ostringstream text;
            if (table.empty()) {
                text << "table,rows\n";
                for (const auto& t : store.tables())
                    text << t.name() << ',' << t.row_count() << '\n';
            } else {
                auto id = ifx::parse_table_name(table);
                if (!id)
                    throw UsageError("bad table name: " + table);
                ifx::write_table_csv(text, store, store.table(*id));
            }
            if (dump_out.empty())
                std::cout << text.str();
            else
                write_file(dump_out, text.str());
        } else if (*gen) {
            synth.target_dim = target_dim - 1;
            synth.signal = !no_signal;
            ifx::write_ts_file(synth_out, ifx::make_synthetic(synth));
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const ifx::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const ifx::KeyError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return exit_internal;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    try {
        return run_main(argc, argv);
    } catch (...) {
        std::cerr << "internal error\n";
        return exit_internal;
    }
}
