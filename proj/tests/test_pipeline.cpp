#include "ifx/pipeline.hpp"
#include "ifx/synth.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace ifx;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("ifx_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int cli(const std::string& args)
{
    const std::string cmd = std::string(IFX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TimeSeriesDataset synth(std::uint64_t seed, std::size_t n = 120, bool signal = true)
{
    SynthConfig c;
    c.n = n;
    c.length = 30;
    c.seed = seed;
    c.signal = signal;
    return make_synthetic(c);
}

RunConfig small_config(std::size_t k = 40)
{
    RunConfig cfg;
    cfg.k = k;
    cfg.seed = 3;
    return cfg;
}

std::string scored_json(const RunResult& r, const RunConfig& cfg)
{
    return scored_features_json(r.selection.scored, r.selection.table.rows(), cfg.min_level).dump(2);
}

} // namespace

TEST(Synth, TargetTracksDerivativeSpread)
{
    SynthConfig c;
    c.noise = 0.0;
    c.n = 5;
    const auto ds = make_synthetic(c);
    EXPECT_TRUE(validate(ds).ok());
    std::vector<double> buf;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        buf = derivative(ds.series[i].dims[0]).value;
        EXPECT_NEAR(*aggregate(Aggregate::StdDev, buf), ds.targets[i], 1e-12);
    }
    EXPECT_THROW(make_synthetic(SynthConfig{.n = 3, .dims = 1, .length = 2}), DomainError);
}

TEST(Pipeline, KZeroUsesBaseline)
{
    const auto train = synth(1), test = synth(2, 60);
    auto cfg = small_config(0);
    const auto r = run_pipeline(train, &test, cfg);
    EXPECT_TRUE(std::holds_alternative<MeanBaseline>(r.model));
    ASSERT_TRUE(r.test_rmse);
    EXPECT_EQ(*r.test_rmse, *r.baseline_test_rmse);
}

TEST(Pipeline, NoInformativeFeatureFallsBackToBaseline)
{
    const auto train = synth(1), test = synth(2, 60);
    auto cfg = small_config();
    cfg.min_level = 0.99; // nothing compresses that well
    cfg.regressor = RegressorKind::Forest;
    const auto r = run_pipeline(train, &test, cfg);
    EXPECT_TRUE(r.selection.chosen.empty());
    EXPECT_TRUE(std::holds_alternative<MeanBaseline>(r.model));
    EXPECT_EQ(*r.test_rmse, *r.baseline_test_rmse);
}

TEST(Pipeline, SignalIsFoundAndUsed)
{
    const auto train = synth(1), test = synth(2, 60);
    const auto r = run_pipeline(train, &test, small_config());
    EXPECT_GE(r.selection.chosen.size(), 1u);
    EXPECT_TRUE(std::holds_alternative<RegressionTree>(r.model));
    EXPECT_LT(*r.test_rmse, *r.baseline_test_rmse);
    EXPECT_EQ(r.selection.chosen_table.cols(), r.selection.chosen.size());
    EXPECT_EQ(r.test_table->names, r.selection.chosen_table.names);
}

TEST(Pipeline, DeterministicAcrossThreadCounts)
{
    const auto train = synth(4), test = synth(5, 60);
    auto cfg = small_config();
    cfg.regressor = RegressorKind::Forest;
    cfg.forest.trees = 10;
    const auto a = run_pipeline(train, &test, cfg);
    cfg.threads = 4;
    const auto b = run_pipeline(train, &test, cfg);
    EXPECT_EQ(scored_json(a, cfg), scored_json(b, cfg));
    EXPECT_EQ(a.test_predictions, b.test_predictions);
    EXPECT_EQ(to_json(a.model).dump(), to_json(b.model).dump());
}

TEST(Pipeline, TestDataNeverInfluencesSelectionOrFit)
{
    const auto train = synth(7);
    auto test = synth(8, 60);
    const auto cfg = small_config();
    const auto with = run_pipeline(train, &test, cfg);
    const auto without = run_pipeline(train, nullptr, cfg);
    for (auto& y : test.targets)
        y = -y * 100;
    const auto altered = run_pipeline(train, &test, cfg);
    EXPECT_EQ(scored_json(with, cfg), scored_json(without, cfg));
    EXPECT_EQ(scored_json(with, cfg), scored_json(altered, cfg));
    EXPECT_EQ(to_json(with.model).dump(), to_json(without.model).dump());
    EXPECT_EQ(with.test_predictions, altered.test_predictions);
    EXPECT_FALSE(without.test_rmse);
}

TEST(Pipeline, DimensionMismatchIsDataError)
{
    const auto train = synth(1);
    SynthConfig c;
    c.dims = 3;
    c.n = 10;
    const auto test = make_synthetic(c);
    EXPECT_THROW(run_pipeline(train, &test, small_config()), DataError);
}

TEST(Pipeline, RepresentationCountsCoverRequestedKinds)
{
    const auto train = synth(1);
    auto cfg = small_config();
    cfg.transforms = {ReprKind::D, ReprKind::ACF};
    StageTimes times;
    const auto sel = select_on_train(train, cfg, times);
    const auto counts = representation_counts(sel.chosen, cfg.transforms);
    EXPECT_EQ(counts.size(), 2u);
    EXPECT_EQ(counts.at("D") + counts.at("ACF"), sel.chosen.size());
    EXPECT_EQ(sel.store.tables().size(), 4u);
}

TEST(Benchmark, OneDatasetTwoRegressors)
{
    BenchmarkReport rep;
    rep.regressors = {RegressorKind::Tree, RegressorKind::Baseline};
    rep.rows.push_back(benchmark_dataset("a", synth(1), synth(2, 60), rep.regressors, small_config()));
    tally_win_tie_loss(rep);
    ASSERT_EQ(rep.rows.size(), 1u);
    const auto& w = rep.vs_first[1];
    EXPECT_EQ(w.win + w.tie + w.loss, 1u);
    EXPECT_EQ(w.loss, 1u); // the baseline loses to the tree on signal data
}

TEST(Benchmark, IdenticalColumnsTie)
{
    BenchmarkReport rep;
    rep.regressors = {RegressorKind::Baseline, RegressorKind::Baseline};
    for (std::uint64_t s = 0; s < 3; ++s)
        rep.rows.push_back(benchmark_dataset("d" + std::to_string(s), synth(s, 60), synth(s + 10, 30),
                                             rep.regressors, small_config(10)));
    tally_win_tie_loss(rep);
    EXPECT_EQ(rep.vs_first[1].tie, 3u);
    EXPECT_EQ(rep.vs_first[1].win + rep.vs_first[1].loss, 0u);
}

TEST(Benchmark, FailedDatasetIsRecordedAndRunContinues)
{
    const auto dir = scratch_dir("bench");
    write_ts_file(dir / "tr.ts", synth(1, 60));
    write_ts_file(dir / "te.ts", synth(2, 30));
    const auto rep = cmd_benchmark({{"missing", dir / "nope.ts", dir / "te.ts", {}, {}},
                                    {"ok", dir / "tr.ts", dir / "te.ts", {}, {}}},
                                   {RegressorKind::Tree, RegressorKind::Baseline}, small_config(10));
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_FALSE(rep.rows[0].error.empty());
    EXPECT_TRUE(rep.rows[1].error.empty());
    EXPECT_EQ(rep.vs_first[1].win + rep.vs_first[1].tie + rep.vs_first[1].loss, 1u);
    fs::remove_all(dir);
}

TEST(Permutation, ControlMatchesRun)
{
    const auto train = synth(3);
    const auto cfg = small_config();
    const auto rep = permutation_test(train, cfg, 1, true);
    const auto r = run_pipeline(train, nullptr, cfg);
    ASSERT_EQ(rep.informative.size(), 1u);
    EXPECT_EQ(rep.informative[0], r.selection.chosen.size());
    EXPECT_THROW(permutation_test(train, cfg, 0), DomainError);
}

TEST(Permutation, ShuffledTargetsLoseTheSignal)
{
    const auto rep = permutation_test(synth(3), small_config(), 5);
    EXPECT_GE(rep.zero_trials(), 4u);
}

// ---------------------------------------------------------------------------
// command line
// ---------------------------------------------------------------------------

TEST(Cli, UsageErrors)
{
    EXPECT_EQ(cli(""), 1);
    EXPECT_EQ(cli("frobnicate"), 1);
    EXPECT_EQ(cli("run"), 1); // --train is required
    EXPECT_EQ(cli("run --train x.ts --k -3"), 1);
    EXPECT_EQ(cli("run --train x.ts --min-level -0.1"), 1);
    EXPECT_EQ(cli("--help"), 0);
}

TEST(Cli, DataErrors)
{
    const auto dir = scratch_dir("cli_data");
    EXPECT_EQ(cli("run --train " + (dir / "absent.ts").string() + " --out " + (dir / "o").string()), 2);
    std::ofstream(dir / "bad.ts") << "@targetLabel true\n@data\n1,2,3:abc\n";
    EXPECT_EQ(cli("run --train " + (dir / "bad.ts").string() + " --out " + (dir / "o").string()), 2);
    fs::remove_all(dir);
}

TEST(Cli, RunWritesArtifactsDeterministically)
{
    const auto dir = scratch_dir("cli_run");
    const auto tr = (dir / "train.ts").string(), te = (dir / "test.ts").string();
    ASSERT_EQ(cli("gen-synth --n 120 --length 30 --seed 1 --out " + tr), 0);
    ASSERT_EQ(cli("gen-synth --n 60 --length 30 --seed 2 --out " + te), 0);
    EXPECT_EQ(cli("run --train " + tr + " --test " + te + " --transforms Orig,XX --out " + (dir / "x").string()), 1);

    const std::string base = "run --train " + tr + " --test " + te + " --k 40 --seed 9 --regressor forest --trees 10";
    ASSERT_EQ(cli(base + " --threads 1 --out " + (dir / "a").string()), 0);
    ASSERT_EQ(cli(base + " --threads 3 --out " + (dir / "b").string()), 0);
    for (const char* f : {"features_train.csv", "features_test.csv", "scored_features.json", "scored_features.txt",
                          "model.json", "predictions.csv", "report.json"}) {
        ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    }
    EXPECT_TRUE(fs::exists(dir / "a" / "timings.json"));
    const auto model = regressor_from_json(nlohmann::json::parse(slurp(dir / "a" / "model.json")));
    EXPECT_TRUE(std::holds_alternative<ForestModel>(model));

    // the exported train table holds only informative columns
    const auto report = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
    std::istringstream csv(slurp(dir / "a" / "features_train.csv"));
    std::string header;
    std::getline(csv, header);
    std::size_t fields = 1;
    bool quoted = false;
    for (char ch : header) {
        if (ch == '"')
            quoted = !quoted;
        fields += ch == ',' && !quoted;
    }
    EXPECT_EQ(fields, report.at("informative").get<std::size_t>() + 1); // plus the target column

    // train-only run
    ASSERT_EQ(cli("run --train " + tr + " --k 40 --seed 9 --out " + (dir / "c").string()), 0);
    EXPECT_EQ(slurp(dir / "a" / "scored_features.json"), slurp(dir / "c" / "scored_features.json"));
    EXPECT_FALSE(fs::exists(dir / "c" / "predictions.csv"));
    fs::remove_all(dir);
}

TEST(Cli, OtherSubcommands)
{
    const auto dir = scratch_dir("cli_misc");
    const auto tr = (dir / "train.ts").string(), te = (dir / "test.ts").string();
    ASSERT_EQ(cli("gen-synth --n 60 --dims 3 --length 20 --seed 1 --out " + tr), 0);
    ASSERT_EQ(cli("gen-synth --n 30 --dims 3 --length 20 --seed 2 --out " + te), 0);
    EXPECT_EQ(parse_ts_file(tr).dim_count, 3u);

    ASSERT_EQ(cli("dump-store --train " + tr + " --table TS2D --out " + (dir / "t.csv").string()), 0);
    EXPECT_EQ(slurp(dir / "t.csv").substr(0, 24), "series_id,Time,Value2D\n0");
    EXPECT_EQ(cli("dump-store --train " + tr + " --table TS9 --out " + (dir / "t.csv").string()), 2);
    EXPECT_EQ(cli("dump-store --train " + tr + " --table bogus"), 1);

    ASSERT_EQ(cli("benchmark --train " + tr + " --test " + te + " --k 20 --regressors tree,baseline --out " +
                  (dir / "bench").string()),
              0);
    const auto bench = nlohmann::json::parse(slurp(dir / "bench" / "benchmark.json"));
    EXPECT_EQ(bench.at("rows").size(), 1u);
    EXPECT_EQ(cli("benchmark --train " + tr + " --test " + te + " --regressors svm"), 1);

    ASSERT_EQ(cli("permtest --train " + tr + " --k 20 --trials 2 --out " + (dir / "perm").string()), 0);
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "perm" / "permtest.json")).at("trials"), 2);
    fs::remove_all(dir);
}
