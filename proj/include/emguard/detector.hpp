#pragma once

// Detection pipeline: thread screen, anomalous-emission check, then a sweep over
// candidate bit periods and bit-boundary offsets that demodulates the trace, looks
// for the 1010 preamble and matches the following bits against a watch list.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "emguard/bits.hpp"
#include "emguard/emission.hpp"
#include "emguard/monitor.hpp"
#include "emguard/text_io.hpp"
#include "emguard/transmitter.hpp"

namespace emguard {

/// Grid values are snapped to this resolution so that e.g. the 25th step of a 1 ms
/// grid is the same double as the literal 0.025.
inline constexpr double kPeriodResolution = 1e-9;
inline constexpr double kPeriodTicksPerSecond = 1e9;

struct SweepConfig {
    double period_min = 0.001;
    double period_max = 1.000;
    double period_step = 0.001;
    std::uint64_t offsets_per_period = 4;
    std::uint64_t max_hamming_distance = 0;
    /// After the first match, keep scanning the neighbouring periods that decode the
    /// same entry and report the one whose windows fit the samples best.
    bool refine = true;

    void validate() const {
        if (!(period_min > 0.0) || !(period_min <= period_max))
            throw InvalidConfig("sweep needs 0 < period_min <= period_max");
        if (!(period_step >= kPeriodResolution))
            throw InvalidConfig("sweep period_step must be at least 1 ns");
        if (offsets_per_period < 1) throw InvalidConfig("offsets_per_period must be >= 1");
    }

    std::size_t period_count() const {
        validate();
        // tolerance absorbs representation error in (max - min) / step
        return static_cast<std::size_t>(
                   std::floor((period_max - period_min) / period_step + 1e-9)) +
               1;
    }

    double period_at(std::size_t k) const {
        const double raw = period_min + static_cast<double>(k) * period_step;
        return std::round(raw * kPeriodTicksPerSecond) / kPeriodTicksPerSecond;
    }

    std::vector<double> periods() const {
        std::vector<double> out(period_count());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = period_at(k);
        return out;
    }

    double offset_at(double period, std::uint64_t k) const {
        return static_cast<double>(k) * period / static_cast<double>(offsets_per_period);
    }
};

struct WatchEntry {
    std::string label;
    BitString payload_bits;
};

class WatchList {
public:
    WatchList() = default;

    explicit WatchList(const std::vector<std::string>& sensitive_strings) {
        for (const auto& s : sensitive_strings) add(s);
    }

    void add(const std::string& sensitive) { entries_.push_back({sensitive, encode_payload(sensitive)}); }
    void add(WatchEntry entry) {
        if (entry.payload_bits.empty()) throw EmptyPayload();
        entries_.push_back(std::move(entry));
    }

    const std::vector<WatchEntry>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::vector<WatchEntry> entries_;
};

/// One sensitive string per line; empty lines are skipped.
inline WatchList parse_watch_list(std::string_view text) {
    WatchList wl;
    for (auto line : detail::lines(text))
        if (!line.empty()) wl.add(std::string(line));
    return wl;
}

inline WatchList read_watch_list(const std::filesystem::path& path) {
    return parse_watch_list(detail::read_file(path));
}

struct DetectionReport {
    std::vector<std::string> thread_stage;
    double anomaly_stage = 0.0;
    bool alarm = false;
    std::optional<std::string> matched_label;
    std::optional<double> estimated_period;
    std::optional<double> estimated_offset;
    std::optional<BitString> decoded_frame;
    std::optional<std::string> decoded_text;

    friend bool operator==(const DetectionReport&, const DetectionReport&) = default;
};

struct WatchMatch {
    std::string label;
    std::size_t entry_index = 0;
    std::size_t preamble_index = 0;

    friend bool operator==(const WatchMatch&, const WatchMatch&) = default;
};

namespace detail {

/// In-band view of a trace: amplitudes with out-of-band samples zeroed, plus a
/// prefix count of in-band samples.
struct BandMask {
    double sample_rate = 1.0;
    double threshold = 0.0;
    std::vector<double> amplitude;
    std::vector<std::size_t> in_band_prefix;
    std::vector<std::uint8_t> in_band;

    BandMask(const EmissionTrace& trace, const AnomalyBand& band)
        : sample_rate(trace.sample_rate()), threshold(band.amplitude_threshold) {
        const auto& s = trace.samples();
        amplitude.resize(s.size());
        in_band.resize(s.size());
        in_band_prefix.resize(s.size() + 1);
        in_band_prefix[0] = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const bool in = band.contains_frequency(s[i].frequency);
            in_band[i] = in ? 1 : 0;
            amplitude[i] = in ? s[i].amplitude : 0.0;
            in_band_prefix[i + 1] = in_band_prefix[i] + (in ? 1 : 0);
        }
    }

    std::size_t size() const noexcept { return amplitude.size(); }
};

inline std::size_t window_edge(double offset, double period, std::size_t k, double sample_rate) {
    return static_cast<std::size_t>(
        std::llround((offset + static_cast<double>(k) * period) * sample_rate));
}

inline void check_demod_args(double period, double offset, double sample_rate) {
    if (!(period * sample_rate >= 2.0)) throw PeriodTooShort(period, sample_rate);
    if (!(offset >= 0.0 && offset < period))
        throw InvalidConfig("offset must satisfy 0 <= offset < period");
}

inline bool window_bit(const BandMask& m, std::size_t begin, std::size_t end) {
    const std::size_t count = m.in_band_prefix[end] - m.in_band_prefix[begin];
    if (count == 0) return false;
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += m.amplitude[i];
    return sum / static_cast<double>(count) >= m.threshold;
}

inline BitString demodulate(const BandMask& m, double period, double offset) {
    BitString out;
    const std::size_t n = m.size();
    std::size_t begin = window_edge(offset, period, 0, m.sample_rate);
    if (n > begin) out.reserve(static_cast<std::size_t>((n - begin) / (period * m.sample_rate)) + 1);
    for (std::size_t k = 0;; ++k) {
        const std::size_t end = window_edge(offset, period, k + 1, m.sample_rate);
        if (end > n) break;
        out.push_back(window_bit(m, begin, end));
        begin = end;
    }
    return out;
}

/// Mean squared deviation of in-band samples from their window mean over windows
/// [first, first + count). Lower means the window grid fits the bit boundaries better.
inline double window_fit_error(const BandMask& m, double period, double offset, std::size_t first,
                               std::size_t count) {
    double total = 0.0;
    std::size_t samples = 0;
    for (std::size_t k = first; k < first + count; ++k) {
        const auto begin = window_edge(offset, period, k, m.sample_rate);
        const auto end = window_edge(offset, period, k + 1, m.sample_rate);
        const std::size_t in = m.in_band_prefix[end] - m.in_band_prefix[begin];
        if (in == 0) continue;
        double sum = 0.0;
        for (std::size_t i = begin; i < end; ++i) sum += m.amplitude[i];
        const double mean = sum / static_cast<double>(in);
        for (std::size_t i = begin; i < end; ++i) {
            if (!m.in_band[i]) continue;
            const double d = m.amplitude[i] - mean;
            total += d * d;
        }
        samples += in;
    }
    return samples == 0 ? std::numeric_limits<double>::infinity()
                        : total / static_cast<double>(samples);
}

}  // namespace detail

/// Demodulates `trace` with windows of `period` seconds starting at `offset`.
///
/// A window yields 1 when the mean amplitude of its in-band samples reaches the band
/// threshold; windows without in-band samples yield 0. A trailing partial window is
/// dropped.
inline BitString demodulate_at(const EmissionTrace& trace, const AnomalyBand& band, double period,
                               double offset) {
    band.validate();
    detail::check_demod_args(period, offset, trace.sample_rate());
    return detail::demodulate(detail::BandMask(trace, band), period, offset);
}

/// Every index where 1010 starts, overlapping occurrences included.
inline std::vector<std::size_t> find_preamble(const BitString& stream) {
    std::vector<std::size_t> out;
    if (stream.size() < 4) return out;
    const auto bits = stream.view();
    for (std::size_t i = 0; i + 4 <= bits.size(); ++i)
        if (bits[i] == 1 && bits[i + 1] == 0 && bits[i + 2] == 1 && bits[i + 3] == 0)
            out.push_back(i);
    return out;
}

/// First (preamble, entry) pair, earliest preamble then list order, whose payload
/// immediately follows the preamble within `max_hamming` bit errors.
inline std::optional<WatchMatch> match_watchlist(const BitString& stream, const WatchList& watch,
                                                 std::uint64_t max_hamming = 0) {
    if (watch.empty()) throw InvalidConfig("watch list is empty");
    const auto bits = stream.view();
    for (const std::size_t p : find_preamble(stream)) {
        const std::size_t start = p + 4;
        for (std::size_t e = 0; e < watch.size(); ++e) {
            const auto payload = watch.entries()[e].payload_bits.view();
            if (start + payload.size() > bits.size()) continue;
            std::uint64_t distance = 0;
            for (std::size_t j = 0; j < payload.size() && distance <= max_hamming; ++j)
                distance += bits[start + j] != payload[j] ? 1 : 0;
            if (distance <= max_hamming) return WatchMatch{watch.entries()[e].label, e, p};
        }
    }
    return std::nullopt;
}

struct DetectionOptions {
    /// Worker threads for the period sweep. Results never depend on this value.
    unsigned threads = 1;
    std::uint64_t min_calls = 1;
};

namespace detail {

struct SweepHit {
    std::size_t period_index = 0;
    std::uint64_t offset_index = 0;
    double period = 0.0;
    double offset = 0.0;
    BitString stream;
    WatchMatch match;
};

inline std::optional<SweepHit> evaluate_candidate(const BandMask& m, const WatchList& watch,
                                                  const SweepConfig& sweep, std::size_t period_index,
                                                  std::uint64_t offset_index) {
    const double period = sweep.period_at(period_index);
    const double offset = sweep.offset_at(period, offset_index);
    auto stream = demodulate(m, period, offset);
    auto match = match_watchlist(stream, watch, sweep.max_hamming_distance);
    if (!match) return std::nullopt;
    return SweepHit{period_index, offset_index, period, offset, std::move(stream), std::move(*match)};
}

/// Earliest hit in (period ascending, offset ascending) order among periods [first, last).
inline std::optional<SweepHit> first_hit_serial(const BandMask& m, const WatchList& watch,
                                                const SweepConfig& sweep, std::size_t first,
                                                std::size_t last) {
    for (std::size_t k = first; k < last; ++k) {
        if (sweep.period_at(k) * m.sample_rate < 2.0) continue;
        for (std::uint64_t o = 0; o < sweep.offsets_per_period; ++o)
            if (auto hit = evaluate_candidate(m, watch, sweep, k, o)) return hit;
    }
    return std::nullopt;
}

inline std::optional<SweepHit> first_hit(const BandMask& m, const WatchList& watch,
                                         const SweepConfig& sweep, unsigned threads) {
    const std::size_t count = sweep.period_count();
    if (threads <= 1) return first_hit_serial(m, watch, sweep, 0, count);

    // Blocks of periods are split across workers; the earliest block with a hit wins,
    // and inside it the lowest period index, so the answer matches the serial scan.
    const std::size_t block = static_cast<std::size_t>(threads) * 8;
    for (std::size_t base = 0; base < count; base += block) {
        const std::size_t end = std::min(count, base + block);
        std::vector<std::future<std::optional<SweepHit>>> parts;
        const std::size_t stride = (end - base + threads - 1) / threads;
        for (std::size_t lo = base; lo < end; lo += stride)
            parts.push_back(std::async(std::launch::async, first_hit_serial, std::cref(m),
                                       std::cref(watch), std::cref(sweep), lo,
                                       std::min(end, lo + stride)));
        std::optional<SweepHit> best;
        for (auto& f : parts) {
            auto hit = f.get();
            if (hit && !best) best = std::move(hit);
        }
        if (best) return best;
    }
    return std::nullopt;
}

/// Periods within (1 + 3/frame_bits) of the first hit can still decode the same frame.
inline std::size_t refine_period_limit(const SweepConfig& sweep, const SweepHit& first,
                                       std::size_t frame_bits) {
    const double limit = first.period * (1.0 + 3.0 / static_cast<double>(frame_bits));
    std::size_t k = first.period_index;
    const std::size_t count = sweep.period_count();
    while (k + 1 < count && sweep.period_at(k + 1) <= limit) ++k;
    return k + 1;
}

inline SweepHit refine_hit(const BandMask& m, const WatchList& watch, const SweepConfig& sweep,
                           SweepHit first) {
    const std::size_t frame_bits = 4 + watch.entries()[first.match.entry_index].payload_bits.size();
    const std::size_t last = refine_period_limit(sweep, first, frame_bits);

    double best_err = window_fit_error(m, first.period, first.offset, first.match.preamble_index,
                                       frame_bits);
    SweepHit best = std::move(first);
    for (std::size_t k = best.period_index; k < last; ++k) {
        for (std::uint64_t o = 0; o < sweep.offsets_per_period; ++o) {
            if (k == best.period_index && o <= best.offset_index) continue;
            auto hit = evaluate_candidate(m, watch, sweep, k, o);
            if (!hit || hit->match.entry_index != best.match.entry_index) continue;
            const double err =
                window_fit_error(m, hit->period, hit->offset, hit->match.preamble_index, frame_bits);
            if (err < best_err) {
                best_err = err;
                best = std::move(*hit);
            }
        }
    }
    return best;
}

}  // namespace detail

/// Runs the three detection stages and stops at the first watch-list match.
///
/// Stage 1 screens thread records for non-whitelisted MOVNTDQ use, stage 2 measures
/// the fraction of anomalous samples. Both are always recorded; if either comes up
/// empty the report carries alarm = false. Stage 3 sweeps the period grid ascending,
/// each period at `offsets_per_period` evenly spaced offsets. Grid periods shorter
/// than two samples are skipped.
inline DetectionReport run_detection(const EmissionTrace& trace,
                                     const std::vector<InstructionRecord>& records,
                                     const AnomalyBand& band, const Whitelist& whitelist,
                                     const WatchList& watch, const SweepConfig& sweep = {},
                                     const DetectionOptions& options = {}) {
    band.validate();
    sweep.validate();
    if (watch.empty()) throw InvalidConfig("watch list is empty");

    DetectionReport report;
    report.thread_stage = screen_threads(records, whitelist, options.min_calls);
    report.anomaly_stage = trace.empty() ? 0.0
                                         : static_cast<double>(count_anomalous(trace, band)) /
                                               static_cast<double>(trace.size());
    if (report.thread_stage.empty() || report.anomaly_stage == 0.0) return report;

    const detail::BandMask mask(trace, band);
    auto hit = detail::first_hit(mask, watch, sweep, std::max(1u, options.threads));
    if (!hit) return report;
    if (sweep.refine) hit = detail::refine_hit(mask, watch, sweep, std::move(*hit));

    const auto& entry = watch.entries()[hit->match.entry_index];
    const std::size_t frame_bits = 4 + entry.payload_bits.size();
    report.alarm = true;
    report.matched_label = hit->match.label;
    report.estimated_period = hit->period;
    report.estimated_offset = hit->offset;
    report.decoded_frame = hit->stream.slice(hit->match.preamble_index, frame_bits);
    try {
        report.decoded_text =
            decode_bits_to_text(report.decoded_frame->slice(4, entry.payload_bits.size()));
    } catch (const Error&) {
        report.decoded_text = std::nullopt;
    }
    return report;
}

}  // namespace emguard
