#include "procsight/hash.hpp"

#include <openssl/evp.h>

#include "procsight/error.hpp"

namespace procsight {

namespace {

std::string digest_hex(const EVP_MD* md, std::string_view a, std::string_view b = {}) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) fail(ErrorKind::io, "digest context allocation failed");
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    const bool ok = EVP_DigestInit_ex(ctx, md, nullptr) == 1 && EVP_DigestUpdate(ctx, a.data(), a.size()) == 1 &&
                    EVP_DigestUpdate(ctx, b.data(), b.size()) == 1 && EVP_DigestFinal_ex(ctx, digest, &n) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) fail(ErrorKind::io, "digest computation failed");
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(2 * n, '0');
    for (unsigned int i = 0; i < n; ++i) {
        out[2 * i] = kDigits[digest[i] >> 4];
        out[2 * i + 1] = kDigits[digest[i] & 0xF];
    }
    return out;
}

} // namespace

std::string sha256_hex(std::string_view data) { return digest_hex(EVP_sha256(), data); }

std::string git_blob_hash(std::string_view content) {
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    return digest_hex(EVP_sha1(), header, content);
}

} // namespace procsight
