#include "kkl/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>

#include "kkl/error.hpp"
#include "kkl/io.hpp"

namespace kkl {

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    std::string hex;
    hex.reserve(2 * length);
    char buf[3];
    for (unsigned int i = 0; i < length; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string sha256_hex(std::span<const double> values) {
    return sha256_hex(std::string_view(reinterpret_cast<const char*>(values.data()), values.size_bytes()));
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(io::read_text(path)); }

}  // namespace kkl
