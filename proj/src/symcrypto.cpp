#include "escrowsim/symcrypto.hpp"

namespace escrowsim::symcrypto {

PublicKey public_key_of(const SecretKey& sk) {
    return PublicKey{tagged_digest("pk", {as_span(sk.v)})};
}

std::pair<SecretKey, PublicKey> kdf_keypair(const TxHash& seed) {
    SecretKey sk{tagged_digest("sk", {as_span(seed)})};
    return {sk, public_key_of(sk)};
}

Bytes AsymCiphertext::encode() const {
    ByteWriter w;
    w.raw(as_span(pk_tag));
    w.len_bytes(std::span<const std::uint8_t>(payload.data(), payload.size()));
    return w.take();
}

AsymCiphertext AsymCiphertext::decode(std::span<const std::uint8_t> data) {
    ByteReader r(data);
    AsymCiphertext ct;
    ct.pk_tag = r.fixed<32>();
    ct.payload = r.len_bytes();
    r.expect_done();
    return ct;
}

AsymCiphertext seal(const PublicKey& pk, Bytes payload) {
    return AsymCiphertext{pk.v, std::move(payload)};
}

std::optional<Bytes> open(const SecretKey& sk, const AsymCiphertext& ct) {
    if (public_key_of(sk).v != ct.pk_tag) return std::nullopt;
    return ct.payload;
}

SymCiphertext lock(const SymKey& key, Bytes asset) {
    return SymCiphertext{tagged_digest("sym", {as_span(key.v)}), std::move(asset)};
}

std::optional<Bytes> unlock(const SymKey& key, const SymCiphertext& ct) {
    if (tagged_digest("sym", {as_span(key.v)}) != ct.key_tag) return std::nullopt;
    return ct.payload;
}

}  // namespace escrowsim::symcrypto
