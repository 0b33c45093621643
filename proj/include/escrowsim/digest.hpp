#pragma once

#include <initializer_list>
#include <span>
#include <string_view>

#include "escrowsim/bytes.hpp"

namespace escrowsim {

/// SHA-256 of the input bytes.
Hash32 sha256(std::span<const std::uint8_t> data);
Hash32 sha256(std::string_view data);

/// SHA-256 over the concatenation of an ASCII domain tag and the parts.
/// The tags ("addr", "sk", "pk", "sym", ...) keep digests from different
/// roles from ever colliding.
Hash32 tagged_digest(std::string_view tag,
                     std::initializer_list<std::span<const std::uint8_t>> parts);

inline std::span<const std::uint8_t> as_span(const Bytes& b) {
    return {b.data(), b.size()};
}
inline std::span<const std::uint8_t> as_span(const Hash32& h) {
    return {h.data(), h.size()};
}
inline std::span<const std::uint8_t> as_span(const Address& a) {
    return {a.bytes.data(), a.bytes.size()};
}
inline std::span<const std::uint8_t> as_span(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace escrowsim
