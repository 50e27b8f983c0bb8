#include "embfair/common.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "embfair/errors.hpp"

namespace embfair {

void atomic_write_file(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write file: " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("short write: " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::string to_hex(std::span<const unsigned char> bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

Sha256::Sha256() {
    EVP_MD_CTX* c = EVP_MD_CTX_new();
    if (!c || EVP_DigestInit_ex(c, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 init failed");
    }
    ctx_ = c;
}

Sha256::~Sha256() {
    if (ctx_) EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Sha256::update(const void* data, size_t n) {
    if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, n) != 1) {
        throw Error("sha256 update failed");
    }
}

void Sha256::update_u64(uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    update(buf, 8);
}

void Sha256::update_f64(double v) {
    static_assert(sizeof(double) == 8);
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    unsigned char buf[8];
    std::memcpy(buf, &bits, 8);
    update(buf, 8);
}

void Sha256::update_str(const std::string& s) {
    update_u64(s.size());
    update(s.data(), s.size());
}

std::vector<unsigned char> Sha256::finish() {
    std::vector<unsigned char> out(32);
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.data(), &len) != 1 || len != 32) {
        throw Error("sha256 final failed");
    }
    return out;
}

std::string sha256_hex(std::span<const unsigned char> data) {
    Sha256 h;
    h.update(data.data(), data.size());
    auto d = h.finish();
    return to_hex(d);
}

std::string sha256_hex_str(const std::string& data) {
    return sha256_hex(
        std::span(reinterpret_cast<const unsigned char*>(data.data()), data.size()));
}

std::string sha256_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for digest: " + path);
    Sha256 h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize n = in.gcount();
        if (n > 0) h.update(buf, static_cast<size_t>(n));
    }
    auto d = h.finish();
    return to_hex(d);
}

}  // namespace embfair
