#pragma once

// EmissionTrace text format:
//   sample_rate_hz=<float>
//   time_s,frequency_hz,amplitude      (one row per sample, no column header)

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "emguard/emission.hpp"
#include "emguard/text_io.hpp"

namespace emguard {

inline std::string format_trace(const EmissionTrace& trace) {
    std::string out;
    out.reserve(32 + trace.size() * 40);
    out += "sample_rate_hz=";
    out += detail::format_double(trace.sample_rate());
    out += '\n';
    for (const auto& s : trace.samples()) {
        out += detail::format_double(s.time);
        out += ',';
        out += detail::format_double(s.frequency);
        out += ',';
        out += detail::format_double(s.amplitude);
        out += '\n';
    }
    return out;
}

inline EmissionTrace parse_trace(std::string_view text) {
    const auto rows = detail::lines(text);
    if (rows.empty()) throw ParseError("trace file is empty");
    constexpr std::string_view key = "sample_rate_hz=";
    const auto header = detail::trim(rows.front());
    if (header.substr(0, key.size()) != key)
        throw ParseError("trace file must start with 'sample_rate_hz='");
    const double rate = detail::parse_double(header.substr(key.size()), "sample_rate_hz");

    std::vector<EmissionSample> samples;
    samples.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (detail::trim(rows[i]).empty()) continue;
        const auto cols = detail::split(rows[i], ',');
        if (cols.size() != 3)
            throw ParseError("trace line " + std::to_string(i + 1) + " needs 3 columns");
        samples.push_back({detail::parse_double(cols[0], "time_s"),
                           detail::parse_double(cols[1], "frequency_hz"),
                           detail::parse_double(cols[2], "amplitude")});
    }
    return EmissionTrace(rate, std::move(samples));
}

inline void write_trace(const EmissionTrace& trace, const std::filesystem::path& path) {
    detail::write_file(path, format_trace(trace));
}

inline EmissionTrace read_trace(const std::filesystem::path& path) {
    return parse_trace(detail::read_file(path));
}

}  // namespace emguard
