#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emguard {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyPayload : public Error {
public:
    EmptyPayload() : Error("payload is empty") {}
};

class NonEncodableCharacter : public Error {
public:
    NonEncodableCharacter(std::size_t index, int code_point)
        : Error("character at index " + std::to_string(index) + " (code point " +
                std::to_string(code_point) + ") is outside the printable range 32-126"),
          index_(index),
          code_point_(code_point) {}

    std::size_t index() const noexcept { return index_; }
    int code_point() const noexcept { return code_point_; }

private:
    std::size_t index_;
    int code_point_;
};

class LengthNotByteAligned : public Error {
public:
    explicit LengthNotByteAligned(std::size_t length)
        : Error("bit string of length " + std::to_string(length) +
                " is not a positive multiple of 8") {}
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

class InvalidTrace : public Error {
public:
    using Error::Error;
};

class InvalidDuration : public Error {
public:
    explicit InvalidDuration(double duration)
        : Error("duration must be positive, got " + std::to_string(duration)) {}
};

class InseparableCalibration : public Error {
public:
    InseparableCalibration(double max_normal, double min_attack_peak)
        : Error("calibration is not separable: max normal amplitude " +
                std::to_string(max_normal) + " >= min attack peak " +
                std::to_string(min_attack_peak)),
          max_normal_(max_normal),
          min_attack_peak_(min_attack_peak) {}

    double max_normal() const noexcept { return max_normal_; }
    double min_attack_peak() const noexcept { return min_attack_peak_; }

private:
    double max_normal_;
    double min_attack_peak_;
};

class PeriodTooShort : public Error {
public:
    PeriodTooShort(double period, double sample_rate)
        : Error("period " + std::to_string(period) + " s spans fewer than 2 samples at " +
                std::to_string(sample_rate) + " Hz") {}
};

class InvalidScenario : public Error {
public:
    using Error::Error;
};

/// Malformed input file (trace, records, band, report, scenario).
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace emguard
