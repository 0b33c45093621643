#include "escrowsim/digest.hpp"

#include <openssl/evp.h>

#include <memory>

namespace escrowsim {

namespace {

struct CtxFree {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using CtxPtr = std::unique_ptr<EVP_MD_CTX, CtxFree>;

void update(EVP_MD_CTX* ctx, std::span<const std::uint8_t> part) {
    if (part.empty()) return;
    if (EVP_DigestUpdate(ctx, part.data(), part.size()) != 1)
        throw Error(Errc::IoError, "digest update failed");
}

Hash32 finish(EVP_MD_CTX* ctx) {
    Hash32 out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != out.size())
        throw Error(Errc::IoError, "digest finalization failed");
    return out;
}

CtxPtr fresh_ctx() {
    CtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw Error(Errc::IoError, "digest init failed");
    return ctx;
}

}  // namespace

Hash32 sha256(std::span<const std::uint8_t> data) {
    CtxPtr ctx = fresh_ctx();
    update(ctx.get(), data);
    return finish(ctx.get());
}

Hash32 sha256(std::string_view data) {
    return sha256(as_span(data));
}

Hash32 tagged_digest(std::string_view tag,
                     std::initializer_list<std::span<const std::uint8_t>> parts) {
    CtxPtr ctx = fresh_ctx();
    update(ctx.get(), as_span(tag));
    for (auto part : parts) update(ctx.get(), part);
    return finish(ctx.get());
}

}  // namespace escrowsim
