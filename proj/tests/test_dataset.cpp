#include "ifx/dataset.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

using namespace ifx;

namespace {

const char* header = "@problemName toy\n@timeStamps false\n@univariate false\n@dimensions 2\n@targetLabel true\n@data\n";

TimeSeriesDataset parse(const std::string& text)
{
    std::istringstream in(text);
    return parse_ts_stream(in, "toy");
}

TimeSeriesDataset csv_pair(const std::string& values, const std::string& targets)
{
    std::istringstream v(values), t(targets);
    return parse_csv_pair_streams(v, t);
}

std::size_t error_line(const std::string& text)
{
    try {
        parse(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

} // namespace

TEST(ParseTs, TwoDimensionsTargetFromLastToken)
{
    auto ds = parse(std::string(header) + "1,2,3:4,5,6:7.5\n0,0,1:2,2,2:-1\n");
    EXPECT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.dim_count, 2u);
    EXPECT_EQ(ds.targets, (std::vector<double>{7.5, -1.0}));
    EXPECT_EQ(ds.series[0].dims[1].value, (std::vector<double>{4, 5, 6}));
    EXPECT_EQ(ds.name, "toy");
}

TEST(ParseTs, ImplicitTimestampsAreIndices)
{
    auto ds = parse(std::string(header) + "1,2,3:4,5,6:7.5\n");
    for (const auto& c : ds.series[0].dims) {
        EXPECT_EQ(c.size(), 3u);
        EXPECT_EQ(c.axis, (std::vector<double>{0, 1, 2}));
    }
}

TEST(ParseTs, ExplicitTimestamps)
{
    auto ds = parse("@timeStamps true\n@targetLabel true\n@data\n(0.5,1),(2,3),(7,5):9\n");
    EXPECT_EQ(ds.series[0].dims[0].axis, (std::vector<double>{0.5, 2, 7}));
    EXPECT_EQ(ds.series[0].dims[0].value, (std::vector<double>{1, 3, 5}));
}

TEST(ParseTs, MalformedHeaderReportsLine)
{
    EXPECT_EQ(error_line("@problemName x\n@timeStamps maybe\n@targetLabel true\n@data\n1,2,3:1\n"), 2u);
    EXPECT_EQ(error_line("@problemName x\n@data\n1,2,3:1\n"), 2u); // no target declared
    EXPECT_EQ(error_line("@problemName x\nnot a header\n"), 2u);
    EXPECT_EQ(error_line("@classLabel true 0 1\n@targetLabel true\n@data\n1,2,3:1\n"), 1u);
}

TEST(ParseTs, NonNumericTargetIsParseError)
{
    EXPECT_EQ(error_line(std::string(header) + "1,2,3:4,5,6:7\n1,2,3:4,5,6:abc\n"), 8u);
    EXPECT_THROW(parse(std::string(header) + "1,2,3:4,5,6:nan\n"), ParseError);
}

TEST(ParseTs, DataLineViolations)
{
    EXPECT_THROW(parse(std::string(header) + "1,2:4,5,6:7\n"), ParseError);           // length < 3
    EXPECT_THROW(parse(std::string(header) + "1,2,3:7\n"), ParseError);               // dims != header
    EXPECT_THROW(parse("@timeStamps true\n@targetLabel true\n@data\n(1,1),(1,2),(2,3):0\n"), ParseError);
}

TEST(ParseTs, NoSeriesIsEmptyDataset)
{
    EXPECT_THROW(parse(header), EmptyDataset);
    EXPECT_THROW(parse(std::string(header) + "\n\n"), EmptyDataset);
}

TEST(ParseTs, MissingFileIsDataError)
{
    EXPECT_THROW(parse_ts_file("/nonexistent/file.ts"), DataError);
    EXPECT_THROW(load_dataset("values.parquet"), DataError);
}

TEST(CsvPair, SingleSeries)
{
    auto ds = csv_pair("series_id,dim,timestamp,value\n7,1,0,1.5\n7,1,1,2.5\n7,1,2,3.5\n", "series_id,target\n7,0.25\n");
    EXPECT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds.dim_count, 1u);
    EXPECT_EQ(ds.series[0].id, 7);
    EXPECT_EQ(ds.series[0].dims[0].size(), 3u);
    EXPECT_EQ(ds.targets[0], 0.25);
}

TEST(CsvPair, OrderOfFirstAppearanceAndSortedTimestamps)
{
    auto ds = csv_pair("id,dim,t,v\n5,1,2,3\n2,1,0,9\n5,1,0,1\n2,1,1,8\n5,1,1,2\n2,1,2,7\n",
                       "id,y\n2,20\n5,50\n");
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.series[0].id, 5);
    EXPECT_EQ(ds.targets[0], 50);
    EXPECT_EQ(ds.series[0].dims[0].value, (std::vector<double>{1, 2, 3}));
}

TEST(CsvPair, DuplicateRowIsConsistencyError)
{
    EXPECT_THROW(csv_pair("series_id,dim,timestamp,value\n1,1,0,1\n1,1,0,2\n1,1,1,3\n1,1,2,4\n", "series_id,target\n1,0\n"),
                 ConsistencyError);
}

TEST(CsvPair, IdSetsMustMatch)
{
    const std::string values = "series_id,dim,timestamp,value\n1,1,0,1\n1,1,1,2\n1,1,2,3\n";
    EXPECT_THROW(csv_pair(values, "series_id,target\n1,0\n2,5\n"), ConsistencyError);
    EXPECT_THROW(csv_pair(values, "series_id,target\n"), ConsistencyError);
}

TEST(CsvPair, MissingDimensionIsConsistencyError)
{
    EXPECT_THROW(csv_pair("s,d,t,v\n1,1,0,1\n1,1,1,1\n1,1,2,1\n2,2,0,1\n2,2,1,1\n2,2,2,1\n", "s,y\n1,0\n2,0\n"),
                 ConsistencyError);
}

TEST(Validate, ValidDatasetHasEmptyReport)
{
    auto ds = parse(std::string(header) + "1,2,3:4,5,6:7.5\n");
    EXPECT_TRUE(validate(ds).ok());
}

TEST(Validate, ReportsViolations)
{
    TimeSeriesDataset ds;
    ds.dim_count = 1;
    ds.series.push_back({0, {Channel::indexed({1, 2})}});
    ds.targets.push_back(std::numeric_limits<double>::quiet_NaN());
    auto r = validate(ds);
    auto has = [&](const std::string& s) {
        return std::any_of(r.problems.begin(), r.problems.end(),
                           [&](const std::string& p) { return p.find(s) != std::string::npos; });
    };
    EXPECT_TRUE(has("length < 3"));
    EXPECT_TRUE(has("non-finite target"));

    ds.series[0].dims[0] = Channel{{0, 2, 1}, {1, 1, 1}, AxisKind::Time};
    ds.targets[0] = 1;
    r = validate(ds);
    EXPECT_TRUE(has("timestamps not strictly increasing"));
    EXPECT_FALSE(has("non-finite target"));

    EXPECT_FALSE(validate(TimeSeriesDataset{}).ok());
}

TEST(RoundTrip, ParseWriteParseIsIdentity)
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        const bool explicit_time = trial % 2;
        TimeSeriesDataset ds;
        ds.name = "rt";
        ds.dim_count = 1 + trial % 3;
        for (int i = 0; i < 5; ++i) {
            Series s;
            s.id = i;
            for (std::size_t d = 0; d < ds.dim_count; ++d) {
                const std::size_t m = 3 + static_cast<std::size_t>(rng() % 6); // variable length
                Channel c;
                double t = g(rng);
                for (std::size_t k = 0; k < m; ++k) {
                    c.axis.push_back(explicit_time ? t : static_cast<double>(k));
                    t += 0.1 + std::abs(g(rng));
                    c.value.push_back(g(rng) * 1e3);
                }
                s.dims.push_back(c);
            }
            ds.series.push_back(s);
            ds.targets.push_back(g(rng));
        }
        std::ostringstream out;
        write_ts(out, ds);
        auto back = parse(out.str());
        ASSERT_EQ(back.size(), ds.size());
        EXPECT_EQ(back.dim_count, ds.dim_count);
        EXPECT_EQ(back.targets, ds.targets);
        for (std::size_t i = 0; i < ds.size(); ++i)
            for (std::size_t d = 0; d < ds.dim_count; ++d)
                EXPECT_EQ(back.series[i].dims[d], ds.series[i].dims[d]);
        EXPECT_TRUE(validate(back).ok());
    }
}
