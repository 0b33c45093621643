#pragma once

#include <optional>
#include <utility>

#include "escrowsim/bytes.hpp"
#include "escrowsim/digest.hpp"

namespace escrowsim::symcrypto {

// Symbolic (Dolev-Yao) cryptography. Ciphertexts are inert records holding
// the payload verbatim; they open only when the presented key matches the
// recorded tag. Deliberately useless as real cryptography: the protocol's
// correctness is about key possession, and that is all this models.

struct SecretKey {
    Hash32 v{};
    auto operator<=>(const SecretKey&) const = default;
};

struct PublicKey {
    Hash32 v{};
    auto operator<=>(const PublicKey&) const = default;
};

struct SymKey {
    Hash32 v{};
    auto operator<=>(const SymKey&) const = default;
};

/// pk = digest("pk" || sk): computable from sk, never the reverse.
PublicKey public_key_of(const SecretKey& sk);

/// Derives the per-sample keypair from the key-request transaction hash.
/// sk = digest("sk" || seed), pk = digest("pk" || sk). Pure function of seed.
std::pair<SecretKey, PublicKey> kdf_keypair(const TxHash& seed);

/// Sealed-to-a-public-key record. Opens iff digest("pk" || sk) == pk_tag.
struct AsymCiphertext {
    Hash32 pk_tag{};  // the pk this was sealed to
    Bytes payload;    // stored verbatim (symbolic model)

    Bytes encode() const;
    static AsymCiphertext decode(std::span<const std::uint8_t> data);
};

AsymCiphertext seal(const PublicKey& pk, Bytes payload);
std::optional<Bytes> open(const SecretKey& sk, const AsymCiphertext& ct);

/// Locked-under-a-symmetric-key record. key_tag = digest("sym" || key), so
/// the tag itself reveals nothing that recovers the key.
struct SymCiphertext {
    Hash32 key_tag{};
    Bytes payload;
};

SymCiphertext lock(const SymKey& key, Bytes asset);
std::optional<Bytes> unlock(const SymKey& key, const SymCiphertext& ct);

}  // namespace escrowsim::symcrypto
