#pragma once

// JSON documents for anomaly bands and detection reports.

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "emguard/detector.hpp"
#include "emguard/emission.hpp"
#include "emguard/text_io.hpp"

namespace emguard {

using Json = nlohmann::json;

namespace detail {

template <typename T>
Json optional_to_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> optional_from_json(const Json& j, const char* key) {
    if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<T>();
}

inline const Json& require(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key))
        throw ParseError(std::string("missing field '") + key + "'");
    return j.at(key);
}

inline Json parse_json(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace detail

inline Json band_to_json(const AnomalyBand& band) {
    return Json{{"freq_low", band.freq_low},
                {"freq_high", band.freq_high},
                {"amplitude_threshold", band.amplitude_threshold}};
}

inline AnomalyBand band_from_json(const Json& j) {
    try {
        AnomalyBand band{detail::require(j, "freq_low").get<double>(),
                         detail::require(j, "freq_high").get<double>(),
                         detail::require(j, "amplitude_threshold").get<double>()};
        band.validate();
        return band;
    } catch (const Json::exception& e) {
        throw ParseError(std::string("bad band document: ") + e.what());
    }
}

inline void write_band(const AnomalyBand& band, const std::filesystem::path& path) {
    detail::write_file(path, band_to_json(band).dump(2) + "\n");
}

inline AnomalyBand read_band(const std::filesystem::path& path) {
    return band_from_json(detail::parse_json(detail::read_file(path)));
}

inline Json report_to_json(const DetectionReport& r) {
    Json j;
    j["thread_stage"] = r.thread_stage;
    j["anomaly_stage"] = r.anomaly_stage;
    j["alarm"] = r.alarm;
    j["matched_label"] = detail::optional_to_json(r.matched_label);
    j["estimated_period"] = detail::optional_to_json(r.estimated_period);
    j["estimated_offset"] = detail::optional_to_json(r.estimated_offset);
    j["decoded_frame"] = r.decoded_frame ? Json(r.decoded_frame->to_string()) : Json(nullptr);
    j["decoded_text"] = detail::optional_to_json(r.decoded_text);
    return j;
}

inline DetectionReport report_from_json(const Json& j) {
    try {
        DetectionReport r;
        r.thread_stage = detail::require(j, "thread_stage").get<std::vector<std::string>>();
        r.anomaly_stage = detail::require(j, "anomaly_stage").get<double>();
        r.alarm = detail::require(j, "alarm").get<bool>();
        r.matched_label = detail::optional_from_json<std::string>(j, "matched_label");
        r.estimated_period = detail::optional_from_json<double>(j, "estimated_period");
        r.estimated_offset = detail::optional_from_json<double>(j, "estimated_offset");
        if (auto frame = detail::optional_from_json<std::string>(j, "decoded_frame"))
            r.decoded_frame = BitString::from_string(*frame);
        r.decoded_text = detail::optional_from_json<std::string>(j, "decoded_text");
        return r;
    } catch (const Json::exception& e) {
        throw ParseError(std::string("bad report document: ") + e.what());
    }
}

inline void write_report(const DetectionReport& report, const std::filesystem::path& path) {
    detail::write_file(path, report_to_json(report).dump(2) + "\n");
}

inline DetectionReport read_report(const std::filesystem::path& path) {
    return report_from_json(detail::parse_json(detail::read_file(path)));
}

}  // namespace emguard
