#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "invrl/bench.hpp"
#include "oracles.hpp"

using namespace invrl;
using bench::Json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "invrl_bench_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Json tiny_transfer() {
    return Json{{"history", {{"days", 60}}},
                {"forecaster", {{"hidden", {8}}, {"epochs", 2}}},
                {"epochs", 5}};
}

Json tiny_table1() {
    return bench::resolve_config("table1", Json{{"replications", 3},
                                                {"variances", {5.0}},
                                                {"workers", 1},
                                                {"agent", {{"horizon", 20}, {"episodes", 4}}},
                                                {"test", {{"days", 10}}}});
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(INVRL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return status;
}

}  // namespace

TEST(Bench, ImprovementFormula) {
    EXPECT_NEAR(100.0 * bench::improvement(2.338, 1.785), 23.65, 0.005);
    EXPECT_EQ(bench::improvement(2.338, 2.338), 0.0);
    EXPECT_THROW(bench::improvement(0.0, 1.0), std::domain_error);
}

TEST(Bench, SignTestMatchesBinomialTail) {
    const std::vector<double> base{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<double> cand{0, 1, 2, 3, 4, 5, 8, 9};  // 2 of 8 worse
    auto st = bench::sign_test(cand, base);
    EXPECT_EQ(st.n, 8);
    EXPECT_EQ(st.worse, 2);
    EXPECT_NEAR(st.p_value, oracle::binomial_half_upper_tail(8, 2), 1e-12);

    cand[0] = 1;  // tie dropped
    st = bench::sign_test(cand, base);
    EXPECT_EQ(st.n, 7);
    EXPECT_NEAR(st.p_value, oracle::binomial_half_upper_tail(7, 2), 1e-12);
}

TEST(Bench, SampleVariance) {
    EXPECT_EQ(bench::sample_variance({3, 3, 3}), 0.0);
    EXPECT_EQ(bench::sample_variance({1}), 0.0);
    EXPECT_NEAR(bench::sample_variance({1, 2, 3, 4}), 5.0 / 3.0, 1e-15);
}

TEST(Bench, ConfigMergeAndValidation) {
    const auto c = bench::resolve_config("scenario2", Json{{"agent", {{"alpha", 0.2}}}});
    EXPECT_EQ(c["agent"]["alpha"], 0.2);
    EXPECT_EQ(c["agent"]["gamma"], 0.9);
    EXPECT_EQ(c["agent"]["epsilon"]["initial"], 0.3);
    EXPECT_EQ(c["configs"].size(), 5u);

    EXPECT_THROW(bench::resolve_config("table1", Json{{"agent", {{"alhpa", 0.2}}}}), std::invalid_argument);
    EXPECT_THROW(bench::resolve_config("table1", Json{{"seed", "x"}}), std::invalid_argument);
    EXPECT_THROW(bench::resolve_config("table2", Json::object()), std::invalid_argument);

    Json o = bench::default_config("scenario1");
    bench::Overrides off;
    off.transfer = false;
    off.sigma2 = 3.0;
    bench::apply_overrides("scenario1", o, off);
    EXPECT_EQ(o["configs"].size(), 3u);
    EXPECT_EQ(o["demand"]["variance"], 3.0);
}

TEST(Bench, Table1RowsAndRecomputableSummary) {
    const auto config = tiny_table1();
    const auto result = bench::run_experiment("table1", config);
    EXPECT_EQ(result.records.size(), 9u);  // 3 replications x 3 algorithms
    const auto& table = result.tables.front().second;
    EXPECT_EQ(result.tables.front().first, "table1.csv");
    ASSERT_EQ(table.rows.size(), 3u);
    EXPECT_EQ(table.rows[0][2], "q_learning");
    EXPECT_EQ(table.rows[0][5], "0");  // baseline against itself

    // Adjusted planning reduction against classic equals the schedule's prediction.
    const auto agent = bench::make_agent_config(config, Algorithm::adjusted_dyna_q, ModelKind::tabular, 0);
    const double expected = 100.0 * bench::improvement(100.0 * 80, static_cast<double>(agent.planning.cumulative_steps(80)));
    EXPECT_EQ(table.rows[2][7], bench::format_number(expected));

    const auto dir = scratch("table1");
    bench::write_result(result, config, dir);
    const auto again = bench::summarize("table1", bench::read_records(dir / "records.jsonl"));
    for (std::size_t i = 0; i < again.size(); ++i) EXPECT_EQ(again[i].second.to_string(), result.tables[i].second.to_string());
    EXPECT_TRUE(fs::exists(dir / "fig2_episode.csv"));
    EXPECT_TRUE(fs::exists(dir / "table1_timing.csv"));
}

TEST(Bench, ParallelRunsMatchSequential) {
    auto config = tiny_table1();
    const auto one = bench::run_experiment("table1", config);
    config["workers"] = 3;
    const auto three = bench::run_experiment("table1", config);
    ASSERT_EQ(one.records.size(), three.records.size());
    for (std::size_t i = 0; i < one.records.size(); ++i) EXPECT_EQ(one.records[i].dump(), three.records[i].dump());
}

TEST(Bench, ScenarioReportShape) {
    const auto config = bench::resolve_config("scenario2", Json{{"replications", 2},
                                                                {"agent", {{"episodes", 5}}},
                                                                {"test", {{"repetitions", 4}}},
                                                                {"warm_start", tiny_transfer()}});
    const auto result = bench::run_experiment("scenario2", config);
    EXPECT_EQ(result.records.size(), 10u);
    const auto& table = result.tables.front().second;
    ASSERT_EQ(table.rows.size(), 5u);
    EXPECT_EQ(table.rows[0][1], "adjusted_dyna_q+transfer");
    // Every replication has at least one lowest-cost config; ties count for each.
    double share = 0.0;
    const auto col = static_cast<std::size_t>(std::find(table.header.begin(), table.header.end(), "lowest_test_cost_share") -
                                              table.header.begin());
    for (const auto& row : table.rows) {
        EXPECT_LE(std::stod(row[col]), 1.0);
        share += std::stod(row[col]);
    }
    EXPECT_GE(share, 1.0);
    for (const auto& r : result.records) {
        EXPECT_EQ(r["train_total_costs"].size(), 5u);
        EXPECT_EQ(r["test_total_costs"].size(), 4u);
        EXPECT_GE(r["train_shortage_pct"].get<double>(), 0.0);
        EXPECT_LE(r["train_shortage_pct"].get<double>(), 1.0);
        EXPECT_EQ(r.contains("offline_demand"), r["transfer"].get<bool>());
    }
}

TEST(Bench, Fig3SeriesLengthAndTruth) {
    const auto config = bench::resolve_config("fig3", Json{{"replications", 3}, {"warm_start", tiny_transfer()}});
    const auto result = bench::run_experiment("fig3", config);
    EXPECT_EQ(result.records.size(), 15u);
    const double truth = bench::make_demand(config)[2];
    for (const auto& r : result.records) {
        EXPECT_EQ(r["estimates"].size(), 30u);
        EXPECT_EQ(r["truth"].get<double>(), truth);
        for (const auto& e : r["estimates"]) {
            EXPECT_GE(e.get<double>(), 0.0);
            EXPECT_LE(e.get<double>(), 1.0);
        }
    }
    EXPECT_EQ(result.tables[0].second.rows.size(), 150u);
}

TEST(Cli, UnknownSubcommandFails) {
    const auto dir = scratch("cli_unknown");
    EXPECT_NE(run_cli("table9 --out " + (dir / "x").string(), dir / "log.txt"), 0);
    EXPECT_NE(slurp(dir / "log.txt").find("Usage"), std::string::npos);
    EXPECT_NE(run_cli("", dir / "log2.txt"), 0);
}

TEST(Cli, BadConfigFails) {
    const auto dir = scratch("cli_bad");
    {
        std::ofstream(dir / "c.json") << R"({"agent": {"alhpa": 0.2}})";
    }
    EXPECT_NE(run_cli("table1 --config " + (dir / "c.json").string() + " --out " + (dir / "o").string(), dir / "log.txt"), 0);
    EXPECT_NE(slurp(dir / "log.txt").find("agent.alhpa"), std::string::npos);
    EXPECT_NE(run_cli("table1 --config " + (dir / "missing.json").string() + " --out " + (dir / "o").string(), dir / "log2.txt"), 0);
}

TEST(Cli, SameSeedSameRecords) {
    const auto dir = scratch("cli_seed");
    {
        std::ofstream(dir / "c.json") << tiny_table1().dump();
    }
    const std::string base = "table1 --config " + (dir / "c.json").string() + " --seed 42 --out ";
    ASSERT_EQ(run_cli(base + (dir / "a").string(), dir / "a.log"), 0) << slurp(dir / "a.log");
    ASSERT_EQ(run_cli(base + (dir / "b").string(), dir / "b.log"), 0);
    EXPECT_EQ(slurp(dir / "a" / "records.jsonl"), slurp(dir / "b" / "records.jsonl"));
    EXPECT_EQ(slurp(dir / "a" / "table1.csv"), slurp(dir / "b" / "table1.csv"));
    EXPECT_FALSE(slurp(dir / "a" / "records.jsonl").empty());
}

TEST(Cli, TrainThenEvaluate) {
    const auto dir = scratch("cli_train");
    {
        std::ofstream(dir / "c.json") << Json{{"agent", {{"horizon", 20}, {"episodes", 5}}}}.dump();
    }
    ASSERT_EQ(run_cli("train --config " + (dir / "c.json").string() + " --out " + (dir / "t").string(), dir / "t.log"), 0)
        << slurp(dir / "t.log");
    EXPECT_TRUE(fs::exists(dir / "t" / "qtable.json"));
    EXPECT_TRUE(fs::exists(dir / "t" / "model.bin"));
    ASSERT_EQ(run_cli("evaluate --qtable " + (dir / "t" / "qtable.json").string() + " --out " + (dir / "e").string(),
                      dir / "e.log"),
              0)
        << slurp(dir / "e.log");
    EXPECT_EQ(bench::read_records(dir / "e" / "records.jsonl").size(), 100u);
}
