// emguard: simulate covert-channel scenarios, calibrate an anomaly band, run the
// detector and export figure data.
//
// Exit codes: 0 = completed without alarm, 2 = completed with alarm, 1 = error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emguard/emguard.hpp"

namespace fs = std::filesystem;
using namespace emguard;

namespace {

constexpr int kExitClean = 0;
constexpr int kExitError = 1;
constexpr int kExitAlarm = 2;

struct SweepFlags {
    SweepConfig sweep;
    bool no_refine = false;
    unsigned threads = 1;
    std::uint64_t min_calls = 1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--sweep-min", sweep.period_min, "Shortest candidate bit period (s)");
        cmd->add_option("--sweep-max", sweep.period_max, "Longest candidate bit period (s)");
        cmd->add_option("--sweep-step", sweep.period_step, "Period grid step (s)");
        cmd->add_option("--offsets", sweep.offsets_per_period, "Bit-boundary offsets per period");
        cmd->add_option("--hamming", sweep.max_hamming_distance, "Max payload bit errors");
        cmd->add_flag("--no-refine", no_refine, "Report the first matching period as-is");
        cmd->add_option("--threads", threads, "Worker threads");
    }

    SweepConfig resolved() const {
        auto s = sweep;
        s.refine = !no_refine;
        return s;
    }
};

WatchList watch_list_from_scenarios(const std::vector<Scenario>& scenarios) {
    WatchList wl;
    std::vector<std::string> seen;
    for (const auto& s : scenarios) {
        if (!s.payload) continue;
        if (std::find(seen.begin(), seen.end(), *s.payload) != seen.end()) continue;
        seen.push_back(*s.payload);
        wl.add(*s.payload);
    }
    return wl;
}

void print_report(const DetectionReport& r) {
    std::cout << "threads flagged : " << r.thread_stage.size() << "\n"
              << "anomalous share : " << r.anomaly_stage << "\n"
              << "alarm           : " << (r.alarm ? "YES" : "no") << "\n";
    if (r.alarm) {
        std::cout << "matched         : " << *r.matched_label << "\n"
                  << "bit period      : " << *r.estimated_period << " s\n"
                  << "offset          : " << *r.estimated_offset << " s\n"
                  << "frame           : " << r.decoded_frame->to_string() << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Air-gap EM covert channel simulator and detector"};
    app.require_subcommand(1);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Scenario file -> trace + thread records");
    fs::path sim_scenarios, sim_out, sim_band;
    std::string sim_name;
    std::optional<std::uint64_t> sim_seed;
    simulate->add_option("--scenario", sim_scenarios, "Scenario JSON (object or array)")->required();
    simulate->add_option("--name", sim_name, "Only simulate the scenario with this name");
    simulate->add_option("--band", sim_band, "Band JSON used to shape benign traces");
    simulate->add_option("--seed", sim_seed, "Override scenario seeds");
    simulate->add_option("--out", sim_out, "Output directory")->required();

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "normal/ + attack/ trace dirs -> band JSON");
    fs::path cal_dir, cal_out;
    calibrate->add_option("--calibration-dir", cal_dir, "Directory with normal/ and attack/")->required();
    calibrate->add_option("--out", cal_out, "Band JSON to write")->required();

    // detect
    auto* detect = app.add_subcommand("detect", "Run the detector on one trace");
    fs::path det_trace, det_records, det_band, det_whitelist, det_watch, det_out;
    SweepFlags det_flags;
    detect->add_option("--trace", det_trace, "Emission trace file")->required();
    detect->add_option("--records", det_records, "Instruction records CSV")->required();
    detect->add_option("--band", det_band, "Anomaly band JSON")->required();
    detect->add_option("--whitelist", det_whitelist, "Whitelisted thread ids");
    detect->add_option("--watch-list", det_watch, "Sensitive strings, one per line")->required();
    detect->add_option("--min-calls", det_flags.min_calls, "MOVNTDQ calls needed to flag a thread");
    detect->add_option("--out", det_out, "Report JSON to write");
    det_flags.attach(detect);

    // batch
    auto* batch = app.add_subcommand("batch", "Scenario file -> metrics + per-run reports");
    fs::path bat_scenarios, bat_band, bat_watch, bat_out;
    SweepFlags bat_flags;
    std::optional<std::uint64_t> bat_seed;
    batch->add_option("--scenarios", bat_scenarios, "Scenario JSON (object or array)")->required();
    batch->add_option("--band", bat_band, "Anomaly band JSON (default: nominal band of the first scenario)");
    batch->add_option("--watch-list", bat_watch, "Sensitive strings (default: attack payloads)");
    batch->add_option("--seed", bat_seed, "Base seed; scenario i uses seed + i");
    batch->add_option("--out", bat_out, "Directory for metrics.json and runs.json");
    bat_flags.attach(batch);

    // export-figs
    auto* figs = app.add_subcommand("export-figs", "Run artifacts -> figure CSV series");
    fs::path fig_trace, fig_records, fig_band, fig_report, fig_out;
    figs->add_option("--trace", fig_trace, "Emission trace file")->required();
    figs->add_option("--records", fig_records, "Instruction records CSV")->required();
    figs->add_option("--band", fig_band, "Anomaly band JSON")->required();
    figs->add_option("--report", fig_report, "Detection report JSON")->required();
    figs->add_option("--out", fig_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) {
            auto scenarios = read_scenarios(sim_scenarios);
            int written = 0;
            for (auto& s : scenarios) {
                if (!sim_name.empty() && s.name != sim_name) continue;
                if (sim_seed) s.seed = *sim_seed;
                const auto band = sim_band.empty() ? nominal_band(s.modulation) : read_band(sim_band);
                const auto run = simulate_scenario(s, band);
                write_trace(run.trace, sim_out / (s.name + ".trace.csv"));
                write_records(run.records, sim_out / (s.name + ".records.csv"));
                detail::write_file(sim_out / (s.name + ".whitelist.txt"), format_whitelist(run.whitelist));
                std::cout << s.name << ": " << run.trace.size() << " samples, "
                          << run.records.size() << " thread records";
                if (run.transmitter_id) std::cout << ", transmitter " << *run.transmitter_id;
                std::cout << "\n";
                ++written;
            }
            if (written == 0) throw Error("no scenario named '" + sim_name + "'");
            return kExitClean;
        }

        if (*calibrate) {
            const auto band = derive_anomaly_band(read_calibration_set(cal_dir));
            write_band(band, cal_out);
            std::cout << band_to_json(band).dump(2) << "\n";
            return kExitClean;
        }

        if (*detect) {
            const auto trace = read_trace(det_trace);
            const auto records = read_records(det_records);
            const auto band = read_band(det_band);
            const auto whitelist = det_whitelist.empty() ? Whitelist{} : read_whitelist(det_whitelist);
            const auto watch = read_watch_list(det_watch);
            const auto report = run_detection(trace, records, band, whitelist, watch,
                                              det_flags.resolved(),
                                              {det_flags.threads, det_flags.min_calls});
            if (!det_out.empty()) write_report(report, det_out);
            print_report(report);
            return report.alarm ? kExitAlarm : kExitClean;
        }

        if (*batch) {
            auto scenarios = read_scenarios(bat_scenarios);
            if (bat_seed)
                for (std::size_t i = 0; i < scenarios.size(); ++i) scenarios[i].seed = *bat_seed + i;
            const auto band =
                bat_band.empty() ? nominal_band(scenarios.front().modulation) : read_band(bat_band);
            const auto watch =
                bat_watch.empty() ? watch_list_from_scenarios(scenarios) : read_watch_list(bat_watch);
            if (watch.empty()) throw Error("no watch list given and no attack payloads to derive one");
            const auto result = run_batch(scenarios, band, watch, bat_flags.resolved(),
                                          {bat_flags.threads});
            const auto metrics = metrics_to_json(result.metrics);
            if (!bat_out.empty()) {
                detail::write_file(bat_out / "metrics.json", metrics.dump(2) + "\n");
                Json runs = Json::array();
                for (const auto& r : result.runs) runs.push_back(run_record_to_json(r));
                detail::write_file(bat_out / "runs.json", runs.dump(2) + "\n");
            }
            std::cout << metrics.dump(2) << "\n";
            bool any_alarm = false;
            for (const auto& r : result.runs) any_alarm = any_alarm || r.alarmed();
            return any_alarm ? kExitAlarm : kExitClean;
        }

        if (*figs) {
            const auto paths = export_figure_data(read_trace(fig_trace), read_records(fig_records),
                                                  read_band(fig_band), read_report(fig_report), fig_out);
            std::cout << paths.anomalous_emissions.string() << "\n"
                      << paths.thread_screen.string() << "\n"
                      << paths.string_match.string() << "\n";
            return kExitClean;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitClean;
}
