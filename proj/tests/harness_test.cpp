#include <algorithm>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "emguard/harness.hpp"
#include "emguard/trace_io.hpp"
#include "oracles.hpp"

using namespace emguard;

namespace {

Scenario attack(std::string name, std::string payload, double period, std::uint64_t seed) {
    Scenario s;
    s.name = std::move(name);
    s.mode = ScenarioMode::attack;
    s.payload = std::move(payload);
    s.true_period = period;
    s.modulation.bit_period = period;
    s.modulation.sample_rate = 2000.0;
    s.benign_threads = 3;
    s.seed = seed;
    return s;
}

Scenario normal(std::string name, std::uint64_t seed) {
    Scenario s;
    s.name = std::move(name);
    s.mode = ScenarioMode::normal;
    s.modulation.sample_rate = 2000.0;
    s.benign_threads = 4;
    s.duration = 0.5;
    s.seed = seed;
    return s;
}

const AnomalyBand kBand = nominal_band(ModulationParams{});

SweepConfig short_sweep() {
    SweepConfig s;
    s.period_max = 0.05;
    return s;
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("emguard_harness_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST(Scenario, Validation) {
    auto s = attack("a", "x", 0.01, 1);
    EXPECT_NO_THROW(s.validate());
    s.payload.reset();
    EXPECT_THROW(s.validate(), InvalidScenario);
    s = attack("a", "x", 0.01, 1);
    s.modulation.bit_period = 0.02;
    EXPECT_THROW(s.validate(), InvalidScenario);
    auto n = normal("n", 1);
    EXPECT_NO_THROW(n.validate());
    n.payload = "x";
    EXPECT_THROW(n.validate(), InvalidScenario);
    n = normal("n", 1);
    n.true_period = 0.01;
    EXPECT_THROW(n.validate(), InvalidScenario);
}

TEST(Scenario, JsonRoundTripAndDefaults) {
    const auto a = attack("atk", "pwd", 0.025, 9);
    const auto back = scenario_from_json(scenario_to_json(a));
    EXPECT_EQ(back.name, a.name);
    EXPECT_EQ(back.payload, a.payload);
    EXPECT_EQ(back.true_period, a.true_period);
    EXPECT_EQ(back.modulation, a.modulation);
    EXPECT_EQ(back.seed, a.seed);

    const auto parsed = scenarios_from_json(Json::parse(R"([
        {"name": "x", "mode": "attack", "payload": "hi", "true_period": 0.005,
         "modulation": {"sample_rate": 4000}},
        {"name": "y", "mode": "normal", "duration": 0.25}
    ])"));
    ASSERT_EQ(parsed.size(), 2u);
    EXPECT_EQ(parsed[0].modulation.bit_period, 0.005);
    EXPECT_EQ(parsed[0].modulation.sample_rate, 4000.0);
    EXPECT_EQ(parsed[1].mode, ScenarioMode::normal);
    EXPECT_EQ(parsed[1].duration, 0.25);
    EXPECT_THROW(scenario_from_json(Json::parse(R"({"name": "z", "mode": "sideways"})")), ParseError);
    EXPECT_THROW(scenario_from_json(Json::parse(R"({"name": "z", "mode": "normal", "payload": "p"})")),
                 InvalidScenario);
}

TEST(RunScenario, AttackNormalAndDeterminism) {
    const WatchList watch({"pwd"});
    const auto a = attack("a", "pwd", 0.004, 1);
    const auto r = run_scenario(a, kBand, watch, short_sweep());
    EXPECT_TRUE(r.alarm);
    EXPECT_EQ(*r.decoded_text, "pwd");
    EXPECT_EQ(r, run_scenario(a, kBand, watch, short_sweep()));

    EXPECT_FALSE(run_scenario(normal("n", 2), kBand, watch, short_sweep()).alarm);
}

TEST(RunScenario, WhitelistedTransmitter) {
    auto a = attack("a", "pwd", 0.004, 1);
    a.whitelist_transmitter = true;
    const auto r = run_scenario(a, kBand, WatchList({"pwd"}), short_sweep());
    EXPECT_FALSE(r.alarm);
    EXPECT_GT(r.anomaly_stage, 0.0);
}

TEST(RunBatch, NoiselessAttacksAndNormals) {
    std::vector<Scenario> scenarios;
    std::mt19937_64 rng(3);
    std::vector<std::string> payloads;
    for (int i = 0; i < 10; ++i) {
        payloads.push_back(oracle::random_printable(rng, 1, 4));
        scenarios.push_back(attack("a" + std::to_string(i), payloads.back(), 0.001 * (2 + i % 5), i));
        scenarios.push_back(normal("n" + std::to_string(i), 100 + i));
    }
    const auto result = run_batch(scenarios, kBand, WatchList(payloads), short_sweep());
    EXPECT_EQ(result.metrics.runs, 20u);
    EXPECT_EQ(result.metrics.detection_rate, 1.0);
    EXPECT_EQ(result.metrics.false_alarm_rate, 0.0);
    EXPECT_EQ(result.metrics.period_error_mean, 0.0);
    EXPECT_GT(result.metrics.mean_runtime, 0.0);
}

TEST(RunBatch, UndefinedRatesAreAbsent) {
    const auto only_normals = run_batch({normal("n1", 1), normal("n2", 2)}, kBand, WatchList({"q"}), short_sweep());
    EXPECT_FALSE(only_normals.metrics.detection_rate.has_value());
    EXPECT_FALSE(only_normals.metrics.period_error_mean.has_value());
    EXPECT_EQ(only_normals.metrics.false_alarm_rate, 0.0);

    const auto only_attacks = run_batch({attack("a", "q", 0.003, 1)}, kBand, WatchList({"q"}), short_sweep());
    EXPECT_FALSE(only_attacks.metrics.false_alarm_rate.has_value());
    EXPECT_EQ(only_attacks.metrics.detection_rate, 1.0);
    EXPECT_THROW(run_batch({}, kBand, WatchList({"q"})), InvalidConfig);
}

TEST(RunBatch, RunErrorsCountAsNonDetections) {
    auto broken = attack("broken", "ok", 0.003, 1);
    broken.payload = "tab\there";  // not encodable
    const auto result = run_batch({broken, attack("fine", "ok", 0.003, 2)}, kBand, WatchList({"ok"}), short_sweep());
    ASSERT_EQ(result.runs.size(), 2u);
    EXPECT_TRUE(result.runs[0].error.has_value());
    EXPECT_FALSE(result.runs[0].report.has_value());
    EXPECT_EQ(result.metrics.detection_rate, 0.5);
}

TEST(RunBatch, MetricsRecomputeFromEmittedRecordsAndIgnoreOrder) {
    std::vector<Scenario> scenarios;
    for (int i = 0; i < 6; ++i) {
        scenarios.push_back(attack("a" + std::to_string(i), i % 2 ? "on" : "off", 0.002 + 0.001 * i, i));
        scenarios.push_back(normal("n" + std::to_string(i), i));
    }
    scenarios.push_back(attack("missing", "gone", 0.003, 50));  // not on the watch list
    const WatchList watch({"on", "off"});
    const auto result = run_batch(scenarios, kBand, watch, short_sweep());
    EXPECT_NEAR(*result.metrics.detection_rate, 6.0 / 7.0, 1e-15);

    std::vector<RunRecord> reloaded;
    for (const auto& r : result.runs)
        reloaded.push_back(run_record_from_json(Json::parse(run_record_to_json(r).dump())));
    EXPECT_EQ(compute_metrics(reloaded), result.metrics);

    auto shuffled = result.runs;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 5; ++i) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        EXPECT_EQ(compute_metrics(shuffled), result.metrics);
    }

    const auto parallel = run_batch(scenarios, kBand, watch, short_sweep(), {4});
    for (std::size_t i = 0; i < scenarios.size(); ++i) EXPECT_EQ(parallel.runs[i].report, result.runs[i].report);
}

TEST(ExportFigures, AttackRun) {
    const auto s = attack("a", "pwd", 0.004, 3);
    const auto run = simulate_scenario(s, kBand);
    const auto report = run_detection(run.trace, run.records, kBand, run.whitelist, WatchList({"pwd"}), short_sweep());
    ASSERT_TRUE(report.alarm);
    const auto dir = scratch("figs_attack");
    const auto paths = export_figure_data(run.trace, run.records, kBand, report, dir);

    const auto fig4 = detail::lines(detail::read_file(paths.anomalous_emissions));
    EXPECT_EQ(fig4.size() - 1, count_anomalous(run.trace, kBand));

    const auto fig5 = detail::lines(detail::read_file(paths.thread_screen));
    ASSERT_EQ(fig5.size() - 1, s.benign_threads + 1);
    int flagged = 0;
    for (std::size_t i = 1; i < fig5.size(); ++i) flagged += fig5[i].ends_with(",1");
    EXPECT_EQ(flagged, 1);

    const auto fig6 = detail::lines(detail::read_file(paths.string_match));
    std::string matched_bits;
    std::size_t preamble_rows = 0;
    for (std::size_t i = 1; i < fig6.size(); ++i) {
        const auto cols = detail::split(fig6[i], ',');
        if (cols[3] == "1") matched_bits += std::string(cols[1]);
        preamble_rows += cols[2] == "1";
    }
    EXPECT_EQ(matched_bits, build_frame(encode_payload("pwd")).to_string());
    EXPECT_EQ(preamble_rows, 4u);
    std::filesystem::remove_all(dir);
}

TEST(ExportFigures, NormalRunHasNoAnomalousRows) {
    const auto s = normal("n", 3);
    const auto run = simulate_scenario(s, kBand);
    const auto report = run_detection(run.trace, run.records, kBand, run.whitelist, WatchList({"pwd"}), short_sweep());
    const auto dir = scratch("figs_normal");
    const auto paths = export_figure_data(run.trace, run.records, kBand, report, dir);
    EXPECT_EQ(detail::lines(detail::read_file(paths.anomalous_emissions)).size(), 1u);
    EXPECT_EQ(detail::lines(detail::read_file(paths.thread_screen)).size(), s.benign_threads + 1);
    EXPECT_EQ(detail::lines(detail::read_file(paths.string_match)).size(), 1u);
    std::filesystem::remove_all(dir);
}

TEST(ExportedFiles, ReimportReproducesReport) {
    auto s = attack("a", "file", 0.003, 5);
    s.modulation.noise_sigma = 0.5;
    const auto run = simulate_scenario(s, kBand);
    const WatchList watch({"file"});
    const auto report = run_detection(run.trace, run.records, kBand, run.whitelist, watch, short_sweep());
    ASSERT_TRUE(report.alarm);

    const auto dir = scratch("reimport");
    write_trace(run.trace, dir / "t.csv");
    write_records(run.records, dir / "r.csv");
    write_band(kBand, dir / "band.json");
    write_report(report, dir / "report.json");
    const auto again = run_detection(read_trace(dir / "t.csv"), read_records(dir / "r.csv"),
                                     read_band(dir / "band.json"), run.whitelist, watch, short_sweep());
    EXPECT_EQ(again, report);
    EXPECT_EQ(read_report(dir / "report.json"), report);
    std::filesystem::remove_all(dir);
}

TEST(ReportDocument, FieldsAndNulls) {
    const auto j = report_to_json(DetectionReport{});
    for (const char* key : {"thread_stage", "anomaly_stage", "alarm", "matched_label", "estimated_period",
                            "estimated_offset", "decoded_frame", "decoded_text"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_EQ(j.size(), 8u);
    EXPECT_TRUE(j["matched_label"].is_null());
    EXPECT_THROW(report_from_json(Json::parse(R"({"alarm": true})")), ParseError);
}
