#include "natsel/hash.hpp"

#include "natsel/errors.hpp"
#include "natsel/util.hpp"

#include <openssl/evp.h>

#include <cstdint>
#include <memory>

namespace natsel::hash {

namespace {

struct DigestCtx {
    EVP_MD_CTX* ctx;
    DigestCtx() : ctx(EVP_MD_CTX_new()) {
        if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
            throw Error("sha256: init failed");
        }
    }
    ~DigestCtx() { EVP_MD_CTX_free(ctx); }
    void update(std::string_view data) {
        if (EVP_DigestUpdate(ctx, data.data(), data.size()) != 1) {
            throw Error("sha256: update failed");
        }
    }
    std::string finish() {
        unsigned char out[EVP_MAX_MD_SIZE];
        unsigned int n = 0;
        if (EVP_DigestFinal_ex(ctx, out, &n) != 1) throw Error("sha256: final failed");
        return util::to_hex(out, n);
    }
};

std::string u64_le(std::uint64_t v) {
    std::string out(8, '\0');
    for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    return out;
}

} // namespace

std::string sha256_hex(std::string_view data) {
    DigestCtx d;
    d.update(data);
    return d.finish();
}

std::string sha256_hex(std::initializer_list<std::string_view> parts) {
    DigestCtx d;
    for (const auto& p : parts) {
        d.update(u64_le(p.size()));
        d.update(p);
    }
    return d.finish();
}

std::string sha256_file_hex(const std::filesystem::path& path) {
    return sha256_hex(std::string_view(util::read_file(path)));
}

} // namespace natsel::hash
