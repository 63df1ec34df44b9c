#include "branchwm/crypto.hpp"

#include "branchwm/error.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace bwm {

std::string to_hex(ByteView bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0x0f]);
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0) throw ConfigError("hex string has odd length");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(hex[2 * i]);
        int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw ConfigError("invalid hex digit");
        out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return out;
}

} // namespace bwm

namespace bwm::crypto {

namespace {

bool allowed_key_bits(int bits) {
    return std::find(kAllowedKeyBits.begin(), kAllowedKeyBits.end(), bits) != kAllowedKeyBits.end();
}

} // namespace

std::array<std::uint8_t, 64> hmac_sha512(ByteView key, ByteView message) {
    std::array<std::uint8_t, 64> out{};
    unsigned int len = 0;
    if (HMAC(EVP_sha512(), key.data(), static_cast<int>(key.size()), message.data(), message.size(),
             out.data(), &len) == nullptr ||
        len != out.size()) {
        throw std::runtime_error("HMAC-SHA512 failed");
    }
    return out;
}

SecretKey::SecretKey(Bytes bytes) : bytes_(std::move(bytes)) {
    if (!allowed_key_bits(bit_length())) {
        throw ConfigError("unsupported key length: " + std::to_string(bit_length()) + " bits");
    }
}

Tag::Tag(Bytes bytes, int bit_length) : bytes_(std::move(bytes)), bit_length_(bit_length) {
    if (bit_length <= 0 || bit_length % 8 != 0 || bit_length > kDigestBits ||
        static_cast<std::size_t>(bit_length / 8) != bytes_.size()) {
        throw ConfigError("invalid tag length: " + std::to_string(bit_length) + " bits");
    }
}

std::vector<int> Tag::bits() const {
    std::vector<int> out(bit_length_);
    for (int i = 0; i < bit_length_; ++i) out[i] = bit(i);
    return out;
}

Tag Tag::from_bits(std::span<const int> bits) {
    Bytes bytes((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) bytes[i / 8] |= static_cast<std::uint8_t>(0x80 >> (i % 8));
    }
    return Tag(std::move(bytes), static_cast<int>(bits.size()));
}

SecretKey keygen(int security_bits) {
    if (!allowed_key_bits(security_bits)) {
        throw ConfigError("unsupported security parameter: " + std::to_string(security_bits));
    }
    Bytes bytes(security_bits / 8);
    if (RAND_bytes(bytes.data(), static_cast<int>(bytes.size())) != 1) {
        throw std::runtime_error("CSPRNG failure");
    }
    return SecretKey(std::move(bytes));
}

Tag mac(const SecretKey& key, ByteView message, int tag_bits) {
    if (tag_bits <= 0 || tag_bits % 8 != 0 || tag_bits > kDigestBits) {
        throw ConfigError("invalid tag length: " + std::to_string(tag_bits) + " bits");
    }
    auto digest = hmac_sha512(key.bytes(), message);
    return Tag(Bytes(digest.begin(), digest.begin() + tag_bits / 8), tag_bits);
}

bool veri(const SecretKey& key, ByteView message, const Tag& tag) {
    if (tag.bit_length() <= 0 || tag.bit_length() % 8 != 0 || tag.bit_length() > kDigestBits) return false;
    auto digest = hmac_sha512(key.bytes(), message);
    return CRYPTO_memcmp(digest.data(), tag.bytes().data(), tag.bytes().size()) == 0;
}

std::uint64_t keyed_hash(const SecretKey& key, std::uint8_t domain, ByteView message) {
    Bytes buf;
    buf.reserve(message.size() + 1);
    buf.push_back(domain);
    buf.insert(buf.end(), message.begin(), message.end());
    auto digest = hmac_sha512(key.bytes(), buf);
    std::uint64_t seed = 0;
    for (int i = 0; i < 8; ++i) seed = seed << 8 | digest[i];
    return seed;
}

std::array<std::uint8_t, 64> sha512(ByteView message) {
    std::array<std::uint8_t, 64> out{};
    unsigned int len = 0;
    if (EVP_Digest(message.data(), message.size(), out.data(), &len, EVP_sha512(), nullptr) != 1) {
        throw std::runtime_error("SHA-512 failed");
    }
    return out;
}

SecretKey read_key_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read key file: " + path.string());
    std::string line;
    std::getline(in, line);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) throw ConfigError("empty key file: " + path.string());
    return SecretKey(from_hex(line));
}

void write_key_file(const std::filesystem::path& path, const SecretKey& key) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write key file: " + path.string());
    out << to_hex(key.bytes()) << '\n';
}

} // namespace bwm::crypto
