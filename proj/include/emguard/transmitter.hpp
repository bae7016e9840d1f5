#pragma once

// Simulated host-side transmitter: an on-off keyed emission trace plus the
// per-thread instruction counters a host monitor would observe while it runs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "emguard/bits.hpp"
#include "emguard/emission.hpp"
#include "emguard/text_io.hpp"

namespace emguard {

/// Bytes written by one MOVNTDQ store.
inline constexpr std::uint64_t kStoreWidthBytes = 16;

struct TransmitterConfig {
    ModulationParams modulation;
    BitString frame;
    std::uint64_t repeat_count = 1;
    double lead_silence = 0.0;
    std::uint64_t buffer_bytes = 4096;
    std::string thread_id = "tx-0";
    /// Extra non-transmitting threads that legitimately use MOVNTDQ (candidates for a whitelist).
    std::uint64_t legitimate_movntdq_threads = 0;

    void validate() const {
        modulation.validate();
        if (repeat_count < 1) throw InvalidConfig("repeat_count must be >= 1");
        if (!(lead_silence >= 0.0)) throw InvalidConfig("lead_silence must be >= 0");
        if (buffer_bytes == 0) throw InvalidConfig("buffer_bytes must be positive");
        if (thread_id.empty()) throw InvalidConfig("thread_id must be non-empty");
    }

    std::uint64_t transmitted_bits() const { return repeat_count * frame.size(); }

    /// Seconds from trace start to the end of the last frame.
    double transmission_duration() const {
        return lead_silence +
               static_cast<double>(transmitted_bits()) * modulation.bit_period;
    }
};

struct InstructionRecord {
    std::string thread_id;
    std::uint64_t movntdq_calls = 0;
    double window = 1.0;  // seconds
    std::uint64_t total_instructions = 0;

    friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

namespace detail {

/// Independent generator per (seed, stream) so trace noise and thread records never share state.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      stream};
    return std::mt19937_64(seq);
}

inline constexpr std::uint32_t kNoiseStream = 1;
inline constexpr std::uint32_t kNormalStream = 2;
inline constexpr std::uint32_t kRecordStream = 3;

inline std::size_t grid_index(double t, double sample_rate) {
    return static_cast<std::size_t>(std::llround(t * sample_rate));
}

}  // namespace detail

/// Renders the configured frames as an on-off keyed trace at the carrier frequency.
///
/// Bit k (counted across all repeats) occupies samples
/// [round((lead + k*T) * fs), round((lead + (k+1)*T) * fs)). Lead silence is sent at
/// amplitude_off. Noise is additive Gaussian per sample, clamped at 0.
inline EmissionTrace modulate(const TransmitterConfig& config, std::uint64_t seed) {
    config.validate();
    const auto& m = config.modulation;
    const double fs = m.sample_rate;
    const std::size_t total = detail::grid_index(config.transmission_duration(), fs);

    std::vector<EmissionSample> samples(total);
    for (std::size_t i = 0; i < total; ++i) {
        samples[i].time = grid_time(i, fs);
        samples[i].frequency = m.carrier_frequency;
        samples[i].amplitude = m.amplitude_off;
    }

    const std::size_t n_frame = config.frame.size();
    const std::uint64_t n_bits = config.transmitted_bits();
    for (std::uint64_t k = 0; k < n_bits; ++k) {
        if (!config.frame[static_cast<std::size_t>(k % n_frame)]) continue;
        const auto begin = detail::grid_index(
            config.lead_silence + static_cast<double>(k) * m.bit_period, fs);
        const auto end = std::min(
            total, detail::grid_index(
                       config.lead_silence + static_cast<double>(k + 1) * m.bit_period, fs));
        for (std::size_t i = begin; i < end; ++i) samples[i].amplitude = m.amplitude_on;
    }

    if (m.noise_sigma > 0.0) {
        auto rng = detail::make_rng(seed, detail::kNoiseStream);
        std::normal_distribution<double> noise(0.0, m.noise_sigma);
        for (auto& s : samples) s.amplitude = std::max(0.0, s.amplitude + noise(rng));
    }
    return EmissionTrace(fs, std::move(samples));
}

struct NormalTraceOptions {
    /// Benign frequency range; defaults to the band widened by its own width on both sides.
    std::optional<double> freq_low;
    std::optional<double> freq_high;
    /// Amplitudes are uniform over [0, amplitude_fraction * threshold).
    double amplitude_fraction = 0.8;
};

/// Benign background emissions that never reach the band's amplitude threshold.
inline EmissionTrace generate_normal_trace(const AnomalyBand& band, double duration,
                                           double sample_rate, std::uint64_t seed,
                                           const NormalTraceOptions& options = {}) {
    band.validate();
    if (!(duration > 0.0) || !std::isfinite(duration)) throw InvalidDuration(duration);
    if (!(sample_rate > 0.0)) throw InvalidConfig("sample_rate must be positive");
    if (!(options.amplitude_fraction > 0.0 && options.amplitude_fraction < 1.0))
        throw InvalidConfig("amplitude_fraction must lie in (0, 1)");

    const double width = band.freq_high - band.freq_low;
    const double f_lo = options.freq_low.value_or(std::max(band.freq_low - width, width * 1e-3));
    const double f_hi = options.freq_high.value_or(band.freq_high + width);
    if (!(f_lo > 0.0 && f_lo < f_hi)) throw InvalidConfig("benign frequency range is empty");

    auto rng = detail::make_rng(seed, detail::kNormalStream);
    std::uniform_real_distribution<double> freq(f_lo, f_hi);
    std::uniform_real_distribution<double> amp(0.0,
                                               options.amplitude_fraction * band.amplitude_threshold);

    const std::size_t total = detail::grid_index(duration, sample_rate);
    std::vector<EmissionSample> samples(total);
    for (std::size_t i = 0; i < total; ++i) {
        samples[i].time = grid_time(i, sample_rate);
        samples[i].frequency = freq(rng);
        samples[i].amplitude = amp(rng);
    }
    return EmissionTrace(sample_rate, std::move(samples));
}

/// Per-thread counters for the transmitter plus `benign_threads` idle-of-MOVNTDQ threads.
///
/// The transmitter issues one burst per transmitted 1-bit, each burst sweeping its
/// working buffer with 16-byte non-temporal stores. Record order is shuffled per seed.
inline std::vector<InstructionRecord> emit_instruction_records(const TransmitterConfig& config,
                                                               std::uint64_t benign_threads,
                                                               std::uint64_t seed) {
    config.validate();
    auto rng = detail::make_rng(seed, detail::kRecordStream);
    const double window = std::max(config.transmission_duration(), 1.0 / config.modulation.sample_rate);

    const std::uint64_t ones = config.frame.count_ones() * config.repeat_count;
    const std::uint64_t calls_per_burst =
        std::max<std::uint64_t>(1, config.buffer_bytes / kStoreWidthBytes);

    std::vector<InstructionRecord> records;
    records.reserve(1 + benign_threads + config.legitimate_movntdq_threads);

    std::uniform_int_distribution<std::uint64_t> overhead(0, 1000);
    const std::uint64_t tx_calls = ones * calls_per_burst;
    // store + pointer increment + loop branch per call
    records.push_back({config.thread_id, tx_calls, window, tx_calls * 3 + overhead(rng)});

    std::unordered_set<std::string> used{config.thread_id};
    auto fresh_id = [&](std::string_view prefix) {
        std::uniform_int_distribution<std::uint32_t> tid(1000, 999999);
        while (true) {
            std::string id = std::string(prefix) + std::to_string(tid(rng));
            if (used.insert(id).second) return id;
        }
    };

    std::uniform_int_distribution<std::uint64_t> busy(10'000, 50'000'000);
    for (std::uint64_t i = 0; i < benign_threads; ++i)
        records.push_back({fresh_id("thread-"), 0, window, busy(rng)});

    std::uniform_int_distribution<std::uint64_t> legit_calls(1'000, 1'000'000);
    for (std::uint64_t i = 0; i < config.legitimate_movntdq_threads; ++i) {
        const auto calls = legit_calls(rng);
        records.push_back({fresh_id("memcpy-"), calls, window, calls * 4 + busy(rng)});
    }

    std::shuffle(records.begin(), records.end(), rng);
    return records;
}

/// Counters for a host with no transmitter: `benign_threads` threads that never issue MOVNTDQ.
inline std::vector<InstructionRecord> emit_background_records(std::uint64_t benign_threads,
                                                              double window, std::uint64_t seed) {
    if (!(window > 0.0)) throw InvalidConfig("observation window must be positive");
    auto rng = detail::make_rng(seed, detail::kRecordStream);
    std::uniform_int_distribution<std::uint32_t> tid(1000, 999999);
    std::uniform_int_distribution<std::uint64_t> busy(10'000, 50'000'000);
    std::unordered_set<std::string> used;
    std::vector<InstructionRecord> records;
    records.reserve(benign_threads);
    while (records.size() < benign_threads) {
        std::string id = "thread-" + std::to_string(tid(rng));
        if (used.insert(id).second) records.push_back({std::move(id), 0, window, busy(rng)});
    }
    return records;
}

// Instruction records CSV: header `thread_id,movntdq_calls,window_s,total_instructions`.

inline std::string format_records(const std::vector<InstructionRecord>& records) {
    std::string out = "thread_id,movntdq_calls,window_s,total_instructions\n";
    for (const auto& r : records) {
        out += r.thread_id;
        out += ',' + std::to_string(r.movntdq_calls) + ',' + detail::format_double(r.window) + ',' +
               std::to_string(r.total_instructions) + '\n';
    }
    return out;
}

inline std::vector<InstructionRecord> parse_records(std::string_view text) {
    std::vector<InstructionRecord> out;
    const auto rows = detail::lines(text);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto row = detail::trim(rows[i]);
        if (row.empty()) continue;
        if (i == 0 && row.starts_with("thread_id,")) continue;
        const auto cols = detail::split(row, ',');
        if (cols.size() != 4)
            throw ParseError("records line " + std::to_string(i + 1) + " needs 4 columns");
        InstructionRecord r{std::string(detail::trim(cols[0])),
                            detail::parse_count(cols[1], "movntdq_calls"),
                            detail::parse_double(cols[2], "window_s"),
                            detail::parse_count(cols[3], "total_instructions")};
        if (r.thread_id.empty()) throw ParseError("records line " + std::to_string(i + 1) + " has empty thread_id");
        if (r.movntdq_calls > r.total_instructions)
            throw ParseError("records line " + std::to_string(i + 1) +
                             ": movntdq_calls exceeds total_instructions");
        if (!(r.window > 0.0))
            throw ParseError("records line " + std::to_string(i + 1) + ": window must be positive");
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_records(const std::vector<InstructionRecord>& records,
                          const std::filesystem::path& path) {
    detail::write_file(path, format_records(records));
}

inline std::vector<InstructionRecord> read_records(const std::filesystem::path& path) {
    return parse_records(detail::read_file(path));
}

}  // namespace emguard
