#include "sha256.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <memory>

#include "error.hpp"

namespace pws {

std::string Digest::hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (unsigned char b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

std::uint64_t Digest::prefix_u64() const {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
    return v;
}

Digest sha256(std::string_view data) {
    Digest d;
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != d.bytes.size()) {
        throw Error(ErrorCode::Internal, "sha256 digest failed");
    }
    return d;
}

Digest sha256_file(const std::string& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!f) throw Error(ErrorCode::Io, "cannot open file: " + path);

    std::unique_ptr<EVP_MD_CTX, void (*)(EVP_MD_CTX*)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::Internal, "sha256 init failed");

    char buf[1 << 16];
    std::size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof buf, f.get())) > 0) {
        if (EVP_DigestUpdate(ctx.get(), buf, got) != 1)
            throw Error(ErrorCode::Internal, "sha256 update failed");
    }
    if (std::ferror(f.get())) throw Error(ErrorCode::Io, "read error: " + path);

    Digest d;
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), d.bytes.data(), &len) != 1 || len != d.bytes.size())
        throw Error(ErrorCode::Internal, "sha256 final failed");
    return d;
}

}  // namespace pws
