#pragma once

#include <array>
#include <cstdint>
#include <span>

// Test-only SHA-256 written directly from the FIPS 180-4 description.
// Deliberately independent of the library's OpenSSL-backed digest so the
// two implementations check each other.
namespace testref {

std::array<std::uint8_t, 32> sha256_ref(std::span<const std::uint8_t> data);

}  // namespace testref
