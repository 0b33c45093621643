#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "escrowsim/error.hpp"

namespace escrowsim {

using u128 = unsigned __int128;

/// Non-negative amount in wei (1 ether = 10^18 wei). Arithmetic is checked:
/// overflow and underflow throw instead of wrapping.
struct Wei {
    u128 value = 0;

    constexpr Wei() = default;
    constexpr explicit Wei(u128 v) : value(v) {}

    static constexpr Wei zero() { return Wei(0); }

    auto operator<=>(const Wei&) const = default;

    Wei operator+(Wei rhs) const {
        u128 r = value + rhs.value;
        if (r < value) throw Error(Errc::Overflow, "wei addition overflow");
        return Wei(r);
    }
    Wei operator-(Wei rhs) const {
        if (rhs.value > value) throw Error(Errc::Overflow, "wei subtraction underflow");
        return Wei(value - rhs.value);
    }
    Wei& operator+=(Wei rhs) { return *this = *this + rhs; }
    Wei& operator-=(Wei rhs) { return *this = *this - rhs; }

    /// Checked scale, used for fee = gas_used * gas_price.
    Wei times(std::uint64_t k) const {
        if (k != 0 && value > max_u128() / k) throw Error(Errc::Overflow, "wei multiplication overflow");
        return Wei(value * k);
    }

    /// Floor of value * numerator / denominator; numerator/denominator fit in 64 bits.
    Wei mul_div(std::uint64_t num, std::uint64_t den) const {
        if (den == 0) throw Error(Errc::Overflow, "division by zero");
        if (num != 0 && value > max_u128() / num) throw Error(Errc::Overflow, "wei mul_div overflow");
        return Wei(value * num / den);
    }

    bool is_zero() const { return value == 0; }

    std::string to_string() const;
    static Wei from_string(std::string_view dec);

    double to_ether() const { return static_cast<double>(value) / 1e18; }

private:
    static constexpr u128 max_u128() { return ~static_cast<u128>(0); }
};

inline Wei gwei(std::uint64_t n) { return Wei(static_cast<u128>(n) * 1'000'000'000ull); }
inline Wei ether(std::uint64_t n) {
    return Wei(static_cast<u128>(n) * 1'000'000'000ull * 1'000'000'000ull);
}

inline std::string Wei::to_string() const {
    if (value == 0) return "0";
    std::string out;
    u128 v = value;
    while (v > 0) {
        out.push_back(static_cast<char>('0' + static_cast<unsigned>(v % 10)));
        v /= 10;
    }
    return {out.rbegin(), out.rend()};
}

inline Wei Wei::from_string(std::string_view dec) {
    if (dec.empty()) throw Error(Errc::Decode, "empty wei literal");
    u128 v = 0;
    for (char c : dec) {
        if (c < '0' || c > '9') throw Error(Errc::Decode, "non-digit in wei literal");
        u128 next = v * 10 + static_cast<unsigned>(c - '0');
        if (next / 10 != v) throw Error(Errc::Overflow, "wei literal too large");
        v = next;
    }
    return Wei(v);
}

}  // namespace escrowsim
