#pragma once

// Host-side screening: anomaly-band calibration, per-sample emission
// classification and the MOVNTDQ thread screen.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "emguard/emission.hpp"
#include "emguard/text_io.hpp"
#include "emguard/trace_io.hpp"
#include "emguard/transmitter.hpp"

namespace emguard {

enum class EmissionClass { normal, anomalous };

/// Thread identifiers permitted to use MOVNTDQ. Matching is exact and case-sensitive.
class Whitelist {
public:
    Whitelist() = default;
    Whitelist(std::initializer_list<std::string> ids) : entries_(ids) {}

    void add(std::string id) { entries_.insert(std::move(id)); }
    bool contains(std::string_view id) const { return entries_.find(std::string(id)) != entries_.end(); }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::set<std::string>& entries() const noexcept { return entries_; }

private:
    std::set<std::string> entries_;
};

/// One identifier per line; blank lines and `#` comments are ignored.
inline Whitelist parse_whitelist(std::string_view text) {
    Whitelist wl;
    for (auto line : detail::lines(text)) {
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (!line.empty()) wl.add(std::string(line));
    }
    return wl;
}

inline Whitelist read_whitelist(const std::filesystem::path& path) {
    return parse_whitelist(detail::read_file(path));
}

inline std::string format_whitelist(const Whitelist& wl) {
    std::string out;
    for (const auto& e : wl.entries()) out += e + '\n';
    return out;
}

struct CalibrationSet {
    std::vector<EmissionTrace> normal_traces;
    std::vector<EmissionTrace> attack_traces;

    void validate() const {
        if (normal_traces.empty() || attack_traces.empty())
            throw InvalidConfig("calibration needs at least one normal and one attack trace");
        const double ref = normal_traces.front().sample_rate();
        auto compatible = [ref](const EmissionTrace& t) {
            return std::abs(t.sample_rate() - ref) <= 1e-9 * ref;
        };
        if (!std::all_of(normal_traces.begin(), normal_traces.end(), compatible) ||
            !std::all_of(attack_traces.begin(), attack_traces.end(), compatible))
            throw InvalidConfig("calibration traces have incompatible sample rates");
    }
};

/// Loads `<dir>/normal/*` and `<dir>/attack/*` trace files in lexical order.
inline CalibrationSet read_calibration_set(const std::filesystem::path& dir) {
    auto load = [](const std::filesystem::path& sub) {
        if (!std::filesystem::is_directory(sub))
            throw Error("calibration directory missing " + sub.string());
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(sub))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        std::vector<EmissionTrace> traces;
        for (const auto& f : files) traces.push_back(read_trace(f));
        return traces;
    };
    return {load(dir / "normal"), load(dir / "attack")};
}

/// Relative half-width used to widen a single-frequency attack band.
inline constexpr double kDegenerateBandWidening = 1e-3;

inline EmissionClass classify_emission(const EmissionSample& sample, const AnomalyBand& band) {
    return band.contains_frequency(sample.frequency) &&
                   sample.amplitude >= band.amplitude_threshold
               ? EmissionClass::anomalous
               : EmissionClass::normal;
}

inline std::size_t count_anomalous(const EmissionTrace& trace, const AnomalyBand& band) {
    return static_cast<std::size_t>(
        std::count_if(trace.samples().begin(), trace.samples().end(), [&](const auto& s) {
            return classify_emission(s, band) == EmissionClass::anomalous;
        }));
}

/// A trace is anomalous when any of its samples is.
inline EmissionClass classify_trace(const EmissionTrace& trace, const AnomalyBand& band) {
    return std::any_of(trace.samples().begin(), trace.samples().end(),
                       [&](const auto& s) {
                           return classify_emission(s, band) == EmissionClass::anomalous;
                       })
               ? EmissionClass::anomalous
               : EmissionClass::normal;
}

/// Frequency span of the attack traces and the midpoint amplitude threshold between
/// the loudest normal sample and the quietest attack-trace peak.
inline AnomalyBand derive_anomaly_band(const CalibrationSet& cal) {
    cal.validate();
    double max_normal = 0.0;
    for (const auto& t : cal.normal_traces)
        for (const auto& s : t.samples()) max_normal = std::max(max_normal, s.amplitude);

    double min_attack_peak = std::numeric_limits<double>::infinity();
    double f_lo = std::numeric_limits<double>::infinity();
    double f_hi = -std::numeric_limits<double>::infinity();
    for (const auto& t : cal.attack_traces) {
        if (t.empty()) throw InvalidConfig("calibration attack trace is empty");
        double peak = 0.0;
        for (const auto& s : t.samples()) {
            peak = std::max(peak, s.amplitude);
            f_lo = std::min(f_lo, s.frequency);
            f_hi = std::max(f_hi, s.frequency);
        }
        min_attack_peak = std::min(min_attack_peak, peak);
    }
    if (max_normal >= min_attack_peak) throw InseparableCalibration(max_normal, min_attack_peak);

    if (f_lo == f_hi) {
        const double half = f_lo * kDegenerateBandWidening;
        f_lo -= half;
        f_hi += half;
    }
    AnomalyBand band{f_lo, f_hi, max_normal + (min_attack_peak - max_normal) / 2.0};
    band.validate();
    return band;
}

/// Identifiers of non-whitelisted threads with at least `min_calls` MOVNTDQ calls, in input order.
inline std::vector<std::string> screen_threads(const std::vector<InstructionRecord>& records,
                                               const Whitelist& whitelist,
                                               std::uint64_t min_calls = 1) {
    if (min_calls < 1) throw InvalidConfig("min_calls must be >= 1");
    std::vector<std::string> flagged;
    for (const auto& r : records)
        if (r.movntdq_calls >= min_calls && !whitelist.contains(r.thread_id))
            flagged.push_back(r.thread_id);
    return flagged;
}

}  // namespace emguard
