#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emguard/errors.hpp"

namespace emguard {

/// Ordered sequence of binary symbols. Every stored symbol is 0 or 1.
class BitString {
public:
    BitString() = default;

    BitString(std::initializer_list<int> bits) {
        bits_.reserve(bits.size());
        for (int b : bits) push_back(b != 0);
    }

    /// Parses a string of '0'/'1' characters. Throws ParseError on anything else.
    static BitString from_string(std::string_view text) {
        BitString out;
        out.bits_.reserve(text.size());
        for (std::size_t i = 0; i < text.size(); ++i) {
            if (text[i] == '0') {
                out.bits_.push_back(0);
            } else if (text[i] == '1') {
                out.bits_.push_back(1);
            } else {
                throw ParseError("invalid bit character at index " + std::to_string(i));
            }
        }
        return out;
    }

    void push_back(bool bit) { bits_.push_back(bit ? 1 : 0); }
    void reserve(std::size_t n) { bits_.reserve(n); }
    void append(const BitString& other) {
        bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end());
    }

    std::size_t size() const noexcept { return bits_.size(); }
    bool empty() const noexcept { return bits_.empty(); }
    bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }

    std::span<const std::uint8_t> view() const noexcept { return bits_; }

    BitString slice(std::size_t pos, std::size_t count) const {
        BitString out;
        out.bits_.assign(bits_.begin() + static_cast<std::ptrdiff_t>(pos),
                         bits_.begin() + static_cast<std::ptrdiff_t>(pos + count));
        return out;
    }

    std::size_t count_ones() const noexcept {
        std::size_t n = 0;
        for (auto b : bits_) n += b;
        return n;
    }

    std::string to_string() const {
        std::string s;
        s.reserve(bits_.size());
        for (auto b : bits_) s.push_back(b ? '1' : '0');
        return s;
    }

    friend bool operator==(const BitString&, const BitString&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

inline constexpr int kMinEncodable = 32;
inline constexpr int kMaxEncodable = 126;

/// Fixed frame preamble, 1010.
inline const BitString& preamble() {
    static const BitString p{1, 0, 1, 0};
    return p;
}

/// Each character becomes its 8-bit code, most significant bit first.
inline BitString encode_payload(std::string_view text) {
    if (text.empty()) throw EmptyPayload();
    BitString out;
    out.reserve(text.size() * 8);
    for (std::size_t i = 0; i < text.size(); ++i) {
        const int code = static_cast<unsigned char>(text[i]);
        if (code < kMinEncodable || code > kMaxEncodable) throw NonEncodableCharacter(i, code);
        for (int bit = 7; bit >= 0; --bit) out.push_back(((code >> bit) & 1) != 0);
    }
    return out;
}

inline BitString build_frame(const BitString& payload) {
    if (payload.empty()) throw EmptyPayload();
    BitString out;
    out.reserve(payload.size() + preamble().size());
    out.append(preamble());
    out.append(payload);
    return out;
}

inline std::string decode_bits_to_text(const BitString& bits) {
    if (bits.empty() || bits.size() % 8 != 0) throw LengthNotByteAligned(bits.size());
    std::string out;
    out.reserve(bits.size() / 8);
    for (std::size_t c = 0; c < bits.size() / 8; ++c) {
        int code = 0;
        for (std::size_t j = 0; j < 8; ++j) code = (code << 1) | (bits[c * 8 + j] ? 1 : 0);
        if (code < kMinEncodable || code > kMaxEncodable) throw NonEncodableCharacter(c, code);
        out.push_back(static_cast<char>(code));
    }
    return out;
}

}  // namespace emguard
