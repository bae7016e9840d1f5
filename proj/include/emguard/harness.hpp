#pragma once

// Experiment harness: scenario simulation, batch runs with aggregate metrics, and
// CSV export of the anomalous-emission, thread-screen and string-match series.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emguard/bits.hpp"
#include "emguard/detector.hpp"
#include "emguard/monitor.hpp"
#include "emguard/report_io.hpp"
#include "emguard/transmitter.hpp"

namespace emguard {

enum class ScenarioMode { attack, normal };

struct Scenario {
    std::string name;
    ScenarioMode mode = ScenarioMode::attack;
    std::optional<std::string> payload;
    std::optional<double> true_period;
    ModulationParams modulation;
    std::uint64_t benign_threads = 0;
    bool whitelist_transmitter = false;
    std::uint64_t seed = 0;
    /// Length of the benign trace in normal mode, seconds.
    double duration = 1.0;

    void validate() const {
        if (mode == ScenarioMode::attack) {
            if (!payload || !true_period)
                throw InvalidScenario("attack scenario '" + name + "' needs payload and true_period");
            if (*true_period != modulation.bit_period)
                throw InvalidScenario("scenario '" + name +
                                      "': true_period must equal modulation.bit_period");
        } else {
            if (payload || true_period)
                throw InvalidScenario("normal scenario '" + name +
                                      "' must not set payload or true_period");
            if (!(duration > 0.0)) throw InvalidScenario("scenario '" + name + "': duration must be positive");
        }
        modulation.validate();
    }
};

/// Everything the detector would observe for one scenario.
struct SimulatedRun {
    EmissionTrace trace;
    std::vector<InstructionRecord> records;
    Whitelist whitelist;
    /// Ground-truth transmitter thread (attack mode only).
    std::optional<std::string> transmitter_id;
};

/// Band centred on the carrier (+-0.1%) with the threshold halfway between the on and
/// off amplitudes. Used to shape benign traces before a calibrated band exists.
inline AnomalyBand nominal_band(const ModulationParams& m) {
    const double half = m.carrier_frequency * kDegenerateBandWidening;
    return {m.carrier_frequency - half, m.carrier_frequency + half,
            m.amplitude_off + (m.amplitude_on - m.amplitude_off) / 2.0};
}

inline TransmitterConfig transmitter_for(const Scenario& s) {
    TransmitterConfig cfg;
    cfg.modulation = s.modulation;
    cfg.frame = build_frame(encode_payload(*s.payload));
    return cfg;
}

inline SimulatedRun simulate_scenario(const Scenario& s, const AnomalyBand& band) {
    s.validate();
    SimulatedRun run;
    if (s.mode == ScenarioMode::attack) {
        const auto cfg = transmitter_for(s);
        run.trace = modulate(cfg, s.seed);
        run.records = emit_instruction_records(cfg, s.benign_threads, s.seed);
        run.transmitter_id = cfg.thread_id;
        if (s.whitelist_transmitter) run.whitelist.add(cfg.thread_id);
    } else {
        run.trace = generate_normal_trace(band, s.duration, s.modulation.sample_rate, s.seed);
        run.records = emit_background_records(s.benign_threads, s.duration, s.seed);
    }
    return run;
}

inline DetectionReport run_scenario(const Scenario& s, const AnomalyBand& band,
                                    const WatchList& watch, const SweepConfig& sweep = {},
                                    const DetectionOptions& options = {}) {
    const auto run = simulate_scenario(s, band);
    return run_detection(run.trace, run.records, band, run.whitelist, watch, sweep, options);
}

/// Outcome of one scenario inside a batch.
struct RunRecord {
    std::string name;
    ScenarioMode mode = ScenarioMode::attack;
    std::optional<double> true_period;
    std::optional<DetectionReport> report;
    std::optional<std::string> error;
    double runtime = 0.0;  // seconds

    bool alarmed() const { return report && report->alarm; }
};

struct BatchMetrics {
    std::uint64_t runs = 0;
    std::optional<double> detection_rate;    // absent without attack runs
    std::optional<double> false_alarm_rate;  // absent without normal runs
    std::optional<double> period_error_mean; // absent without alarmed attack runs
    double mean_runtime = 0.0;

    friend bool operator==(const BatchMetrics&, const BatchMetrics&) = default;
};

struct BatchResult {
    BatchMetrics metrics;
    std::vector<RunRecord> runs;
};

/// Pure aggregation over run records. Sums are taken in a fixed canonical order
/// (sorted values) so the result does not depend on run order.
inline BatchMetrics compute_metrics(const std::vector<RunRecord>& runs) {
    BatchMetrics m;
    m.runs = runs.size();
    std::uint64_t attacks = 0, detections = 0, normals = 0, false_alarms = 0;
    std::vector<double> period_errors, runtimes;
    for (const auto& r : runs) {
        runtimes.push_back(r.runtime);
        if (r.mode == ScenarioMode::attack) {
            ++attacks;
            if (r.alarmed()) {
                ++detections;
                if (r.true_period && r.report->estimated_period)
                    period_errors.push_back(std::abs(*r.report->estimated_period - *r.true_period));
            }
        } else {
            ++normals;
            if (r.alarmed()) ++false_alarms;
        }
    }
    auto ordered_mean = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        double sum = 0.0;
        for (double x : v) sum += x;
        return sum / static_cast<double>(v.size());
    };
    if (attacks > 0) m.detection_rate = static_cast<double>(detections) / static_cast<double>(attacks);
    if (normals > 0) m.false_alarm_rate = static_cast<double>(false_alarms) / static_cast<double>(normals);
    if (!period_errors.empty()) m.period_error_mean = ordered_mean(period_errors);
    if (!runtimes.empty()) m.mean_runtime = ordered_mean(runtimes);
    return m;
}

struct BatchOptions {
    /// Scenarios evaluated concurrently. Each detection itself runs single-threaded.
    unsigned threads = 1;
};

inline RunRecord run_one(const Scenario& s, const AnomalyBand& band, const WatchList& watch,
                         const SweepConfig& sweep) {
    RunRecord rec;
    rec.name = s.name;
    rec.mode = s.mode;
    rec.true_period = s.true_period;
    const auto start = std::chrono::steady_clock::now();
    try {
        rec.report = run_scenario(s, band, watch, sweep);
    } catch (const std::exception& e) {
        rec.error = e.what();
    }
    rec.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

/// Runs every scenario; a failing scenario is recorded and counted as a non-detection.
inline BatchResult run_batch(const std::vector<Scenario>& scenarios, const AnomalyBand& band,
                             const WatchList& watch, const SweepConfig& sweep = {},
                             const BatchOptions& options = {}) {
    if (scenarios.empty()) throw InvalidConfig("batch needs at least one scenario");
    BatchResult out;
    out.runs.resize(scenarios.size());
    if (options.threads <= 1) {
        for (std::size_t i = 0; i < scenarios.size(); ++i)
            out.runs[i] = run_one(scenarios[i], band, watch, sweep);
    } else {
        for (std::size_t base = 0; base < scenarios.size(); base += options.threads) {
            std::vector<std::future<RunRecord>> inflight;
            const std::size_t end = std::min(scenarios.size(), base + options.threads);
            for (std::size_t i = base; i < end; ++i)
                inflight.push_back(std::async(std::launch::async, run_one, std::cref(scenarios[i]),
                                              std::cref(band), std::cref(watch), std::cref(sweep)));
            for (std::size_t i = base; i < end; ++i) out.runs[i] = inflight[i - base].get();
        }
    }
    out.metrics = compute_metrics(out.runs);
    return out;
}

// ---- structured-text documents ----

inline const char* to_string(ScenarioMode m) {
    return m == ScenarioMode::attack ? "attack" : "normal";
}

inline ScenarioMode scenario_mode_from(const std::string& s) {
    if (s == "attack") return ScenarioMode::attack;
    if (s == "normal") return ScenarioMode::normal;
    throw ParseError("scenario mode must be 'attack' or 'normal', got '" + s + "'");
}

inline Json modulation_to_json(const ModulationParams& m) {
    return Json{{"carrier_frequency", m.carrier_frequency}, {"bit_period", m.bit_period},
                {"amplitude_on", m.amplitude_on},           {"amplitude_off", m.amplitude_off},
                {"sample_rate", m.sample_rate},             {"noise_sigma", m.noise_sigma}};
}

inline ModulationParams modulation_from_json(const Json& j) {
    ModulationParams m;
    m.carrier_frequency = j.value("carrier_frequency", m.carrier_frequency);
    m.bit_period = j.value("bit_period", m.bit_period);
    m.amplitude_on = j.value("amplitude_on", m.amplitude_on);
    m.amplitude_off = j.value("amplitude_off", m.amplitude_off);
    m.sample_rate = j.value("sample_rate", m.sample_rate);
    m.noise_sigma = j.value("noise_sigma", m.noise_sigma);
    return m;
}

inline Json scenario_to_json(const Scenario& s) {
    Json j{{"name", s.name},
           {"mode", to_string(s.mode)},
           {"payload", detail::optional_to_json(s.payload)},
           {"true_period", detail::optional_to_json(s.true_period)},
           {"modulation", modulation_to_json(s.modulation)},
           {"benign_threads", s.benign_threads},
           {"whitelist_transmitter", s.whitelist_transmitter},
           {"seed", s.seed}};
    if (s.mode == ScenarioMode::normal) j["duration"] = s.duration;
    return j;
}

/// Missing modulation fields take their defaults; `true_period` also sets the bit period.
inline Scenario scenario_from_json(const Json& j) {
    try {
        Scenario s;
        s.name = detail::require(j, "name").get<std::string>();
        s.mode = scenario_mode_from(detail::require(j, "mode").get<std::string>());
        if (j.contains("payload") && !j.at("payload").is_null())
            s.payload = j.at("payload").get<std::string>();
        if (j.contains("true_period") && !j.at("true_period").is_null())
            s.true_period = j.at("true_period").get<double>();
        if (j.contains("modulation")) s.modulation = modulation_from_json(j.at("modulation"));
        if (s.true_period && !(j.contains("modulation") && j.at("modulation").contains("bit_period")))
            s.modulation.bit_period = *s.true_period;
        s.benign_threads = j.value("benign_threads", std::uint64_t{0});
        s.whitelist_transmitter = j.value("whitelist_transmitter", false);
        s.seed = j.value("seed", std::uint64_t{0});
        s.duration = j.value("duration", 1.0);
        s.validate();
        return s;
    } catch (const Json::exception& e) {
        throw ParseError(std::string("bad scenario document: ") + e.what());
    }
}

/// Accepts a single scenario object or an array of them.
inline std::vector<Scenario> scenarios_from_json(const Json& j) {
    std::vector<Scenario> out;
    if (j.is_array()) {
        for (const auto& item : j) out.push_back(scenario_from_json(item));
    } else {
        out.push_back(scenario_from_json(j));
    }
    return out;
}

inline std::vector<Scenario> read_scenarios(const std::filesystem::path& path) {
    return scenarios_from_json(detail::parse_json(detail::read_file(path)));
}

inline Json metrics_to_json(const BatchMetrics& m) {
    return Json{{"runs", m.runs},
                {"detection_rate", detail::optional_to_json(m.detection_rate)},
                {"false_alarm_rate", detail::optional_to_json(m.false_alarm_rate)},
                {"period_error_mean", detail::optional_to_json(m.period_error_mean)},
                {"mean_runtime", m.mean_runtime}};
}

inline Json run_record_to_json(const RunRecord& r) {
    return Json{{"name", r.name},
                {"mode", to_string(r.mode)},
                {"true_period", detail::optional_to_json(r.true_period)},
                {"report", r.report ? report_to_json(*r.report) : Json(nullptr)},
                {"error", detail::optional_to_json(r.error)},
                {"runtime", r.runtime}};
}

inline RunRecord run_record_from_json(const Json& j) {
    try {
        RunRecord r;
        r.name = detail::require(j, "name").get<std::string>();
        r.mode = scenario_mode_from(detail::require(j, "mode").get<std::string>());
        r.true_period = detail::optional_from_json<double>(j, "true_period");
        if (!detail::require(j, "report").is_null()) r.report = report_from_json(j.at("report"));
        r.error = detail::optional_from_json<std::string>(j, "error");
        r.runtime = detail::require(j, "runtime").get<double>();
        return r;
    } catch (const Json::exception& e) {
        throw ParseError(std::string("bad run record: ") + e.what());
    }
}

// ---- figure series ----

struct FigurePaths {
    std::filesystem::path anomalous_emissions;  // fig4
    std::filesystem::path thread_screen;        // fig5
    std::filesystem::path string_match;         // fig6
};

/// Writes the three CSV series for one detection run into `dir`.
///
/// fig4: time_s,frequency_hz,amplitude of every anomalous sample.
/// fig5: thread_id,movntdq_calls,flagged for every thread record.
/// fig6: index,bit,preamble,matched over the stream demodulated at the reported
///       period and offset; empty (header only) when the report has no alarm.
inline FigurePaths export_figure_data(const EmissionTrace& trace,
                                      const std::vector<InstructionRecord>& records,
                                      const AnomalyBand& band, const DetectionReport& report,
                                      const std::filesystem::path& dir) {
    band.validate();
    std::filesystem::create_directories(dir);
    FigurePaths paths{dir / "fig4_anomalous_emissions.csv", dir / "fig5_thread_screen.csv",
                      dir / "fig6_string_match.csv"};

    std::string fig4 = "time_s,frequency_hz,amplitude\n";
    for (const auto& s : trace.samples())
        if (classify_emission(s, band) == EmissionClass::anomalous)
            fig4 += detail::format_double(s.time) + ',' + detail::format_double(s.frequency) + ',' +
                    detail::format_double(s.amplitude) + '\n';
    detail::write_file(paths.anomalous_emissions, fig4);

    std::string fig5 = "thread_id,movntdq_calls,flagged\n";
    for (const auto& r : records) {
        const bool flagged = std::find(report.thread_stage.begin(), report.thread_stage.end(),
                                       r.thread_id) != report.thread_stage.end();
        fig5 += r.thread_id + ',' + std::to_string(r.movntdq_calls) + ',' + (flagged ? "1" : "0") + '\n';
    }
    detail::write_file(paths.thread_screen, fig5);

    std::string fig6 = "index,bit,preamble,matched\n";
    if (report.alarm && report.estimated_period && report.estimated_offset && report.decoded_frame) {
        const auto stream = demodulate_at(trace, band, *report.estimated_period, *report.estimated_offset);
        const auto& frame = *report.decoded_frame;
        std::optional<std::size_t> at;
        for (const std::size_t p : find_preamble(stream)) {
            if (p + frame.size() <= stream.size() && stream.slice(p, frame.size()) == frame) {
                at = p;
                break;
            }
        }
        for (std::size_t i = 0; i < stream.size(); ++i) {
            const bool pre = at && i >= *at && i < *at + 4;
            const bool matched = at && i >= *at && i < *at + frame.size();
            fig6 += std::to_string(i) + ',' + (stream[i] ? "1" : "0") + ',' + (pre ? "1" : "0") +
                    ',' + (matched ? "1" : "0") + '\n';
        }
    }
    detail::write_file(paths.string_match, fig6);
    return paths;
}

}  // namespace emguard
