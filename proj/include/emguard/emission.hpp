#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "emguard/errors.hpp"

namespace emguard {

struct EmissionSample {
    double time = 0.0;       // seconds from trace start
    double frequency = 0.0;  // Hz
    double amplitude = 0.0;  // linear magnitude

    friend bool operator==(const EmissionSample&, const EmissionSample&) = default;
};

/// Time of sample `index` on the uniform grid of `sample_rate`.
inline double grid_time(std::size_t index, double sample_rate) {
    return static_cast<double>(index) / sample_rate;
}

/// Uniformly sampled emission record. Sample i sits at time i / sample_rate.
class EmissionTrace {
public:
    EmissionTrace() = default;

    EmissionTrace(double sample_rate, std::vector<EmissionSample> samples)
        : sample_rate_(sample_rate), samples_(std::move(samples)) {
        if (!(sample_rate_ > 0.0) || !std::isfinite(sample_rate_))
            throw InvalidTrace("sample_rate must be positive and finite");
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            const auto& s = samples_[i];
            const double expected = grid_time(i, sample_rate_);
            // one representable unit either way
            if (s.time != expected && s.time != std::nextafter(expected, -1.0) &&
                s.time != std::nextafter(expected, std::numeric_limits<double>::infinity()))
                throw InvalidTrace("sample " + std::to_string(i) + " is off the uniform grid");
            if (!(s.frequency > 0.0) || !std::isfinite(s.frequency))
                throw InvalidTrace("sample " + std::to_string(i) + " has non-positive frequency");
            if (!(s.amplitude >= 0.0) || !std::isfinite(s.amplitude))
                throw InvalidTrace("sample " + std::to_string(i) + " has negative amplitude");
        }
    }

    double sample_rate() const noexcept { return sample_rate_; }
    const std::vector<EmissionSample>& samples() const noexcept { return samples_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    double duration() const noexcept {
        return static_cast<double>(samples_.size()) / sample_rate_;
    }

    friend bool operator==(const EmissionTrace&, const EmissionTrace&) = default;

private:
    double sample_rate_ = 1.0;
    std::vector<EmissionSample> samples_;
};

/// Frequency interval plus amplitude threshold that marks an emission as anomalous.
struct AnomalyBand {
    double freq_low = 0.0;
    double freq_high = 0.0;
    double amplitude_threshold = 0.0;

    void validate() const {
        if (!(freq_low < freq_high)) throw InvalidConfig("anomaly band needs freq_low < freq_high");
        if (!(amplitude_threshold > 0.0))
            throw InvalidConfig("anomaly band needs a positive amplitude threshold");
    }

    bool contains_frequency(double f) const noexcept { return freq_low <= f && f <= freq_high; }

    friend bool operator==(const AnomalyBand&, const AnomalyBand&) = default;
};

inline constexpr double kMinBitPeriod = 0.001;
inline constexpr double kMaxBitPeriod = 1.000;

/// On-off keying parameters of the simulated transmitter.
struct ModulationParams {
    double carrier_frequency = 850e6;
    double bit_period = 0.025;
    double amplitude_on = 10.0;
    double amplitude_off = 0.0;
    double sample_rate = 10000.0;
    double noise_sigma = 0.0;

    void validate() const {
        if (!(carrier_frequency > 0.0)) throw InvalidConfig("carrier_frequency must be positive");
        if (!(sample_rate > 0.0)) throw InvalidConfig("sample_rate must be positive");
        if (!(bit_period > 0.0)) throw InvalidConfig("bit_period must be positive");
        if (!(amplitude_off >= 0.0)) throw InvalidConfig("amplitude_off must be >= 0");
        if (!(amplitude_on > amplitude_off))
            throw InvalidConfig("amplitude_on must exceed amplitude_off");
        if (!(noise_sigma >= 0.0)) throw InvalidConfig("noise_sigma must be >= 0");
        if (bit_period * sample_rate < 2.0)
            throw InvalidConfig("bit_period must span at least 2 samples");
    }

    /// True when the bit period lies inside the default 1 ms .. 1000 ms sweep range.
    bool in_sweep_range() const noexcept {
        return bit_period >= kMinBitPeriod && bit_period <= kMaxBitPeriod;
    }

    friend bool operator==(const ModulationParams&, const ModulationParams&) = default;
};

}  // namespace emguard
