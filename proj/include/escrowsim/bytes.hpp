#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "escrowsim/error.hpp"

namespace escrowsim {

using Bytes = std::vector<std::uint8_t>;
using Hash32 = std::array<std::uint8_t, 32>;

// Semantic aliases. A sample id is, by protocol construction, the hash of
// the key-request transaction.
using TxHash = Hash32;
using ContentId = Hash32;
using SampleId = Hash32;

/// 20-byte opaque account identifier for all on-chain actors.
struct Address {
    std::array<std::uint8_t, 20> bytes{};

    auto operator<=>(const Address&) const = default;

    bool is_zero() const {
        for (auto b : bytes)
            if (b != 0) return false;
        return true;
    }

    std::string hex() const;
};

std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex(std::string_view hex);

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

template <std::size_t N>
std::array<std::uint8_t, N> array_from_hex(std::string_view hex) {
    Bytes raw = from_hex(hex);
    if (raw.size() != N) throw Error(Errc::Decode, "unexpected hex length");
    std::array<std::uint8_t, N> out{};
    std::memcpy(out.data(), raw.data(), N);
    return out;
}

inline std::string hash_hex(const Hash32& h) {
    return to_hex(std::span<const std::uint8_t>(h.data(), h.size()));
}

/// Canonical encoding writer: integers big-endian, dynamic byte strings
/// prefixed by a 4-byte big-endian length, fixed-width fields raw.
class ByteWriter {
public:
    ByteWriter& u8(std::uint8_t v) {
        out_.push_back(v);
        return *this;
    }
    ByteWriter& u64be(std::uint64_t v) {
        for (int i = 7; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        return *this;
    }
    ByteWriter& u128be(unsigned __int128 v) {
        for (int i = 15; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        return *this;
    }
    ByteWriter& raw(std::span<const std::uint8_t> data) {
        out_.insert(out_.end(), data.begin(), data.end());
        return *this;
    }
    ByteWriter& len_bytes(std::span<const std::uint8_t> data) {
        if (data.size() > 0xffffffffull) throw Error(Errc::Decode, "byte string too long");
        u64be_trunc32(static_cast<std::uint32_t>(data.size()));
        return raw(data);
    }
    ByteWriter& len_bytes(std::string_view s) {
        return len_bytes(std::span<const std::uint8_t>(
            reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    }

    Bytes take() { return std::move(out_); }
    const Bytes& view() const { return out_; }

private:
    void u64be_trunc32(std::uint32_t v) {
        for (int i = 3; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    Bytes out_;
};

/// Mirror of ByteWriter; throws Errc::Decode on malformed input.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint64_t u64be() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
        return v;
    }
    unsigned __int128 u128be() {
        need(16);
        unsigned __int128 v = 0;
        for (int i = 0; i < 16; ++i) v = (v << 8) | data_[pos_++];
        return v;
    }
    std::span<const std::uint8_t> raw(std::size_t n) {
        need(n);
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    Bytes len_bytes() {
        need(4);
        std::uint32_t n = 0;
        for (int i = 0; i < 4; ++i) n = (n << 8) | data_[pos_++];
        auto s = raw(n);
        return Bytes(s.begin(), s.end());
    }
    template <std::size_t N>
    std::array<std::uint8_t, N> fixed() {
        auto s = raw(N);
        std::array<std::uint8_t, N> out{};
        std::memcpy(out.data(), s.data(), N);
        return out;
    }
    bool done() const { return pos_ == data_.size(); }
    void expect_done() const {
        if (!done()) throw Error(Errc::Decode, "trailing bytes in encoding");
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw Error(Errc::Decode, "encoding truncated");
    }
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

}  // namespace escrowsim
