#pragma once

/**
 * Symmetric MAC scheme used for trigger patterns.
 *
 * Mac is HMAC-SHA512. Tags are the leading bytes of the 512-bit digest;
 * truncation is a deployment choice (default: no truncation). keyed_hash
 * derives domain-separated 64-bit seeds from the same construction and is
 * the only hashing primitive the embedding schemes use.
 */

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bwm {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string to_hex(ByteView bytes);
Bytes from_hex(std::string_view hex); // throws ConfigError

} // namespace bwm

namespace bwm::crypto {

inline constexpr int kDigestBits = 512;
inline constexpr std::array<int, 4> kAllowedKeyBits = {128, 256, 512, 1024};

// Domain bytes for keyed_hash.
inline constexpr std::uint8_t kDomainTriggerSplit = 0x01;
inline constexpr std::uint8_t kDomainEvidenceSplit = 0x01;
inline constexpr std::uint8_t kDomainEvidenceChunk = 0x02;
inline constexpr std::uint8_t kDomainEvidenceBind = 0x10;

class SecretKey {
public:
    // Wraps existing key material; bit length must be in kAllowedKeyBits.
    explicit SecretKey(Bytes bytes);

    const Bytes& bytes() const { return bytes_; }
    int bit_length() const { return static_cast<int>(bytes_.size() * 8); }

    friend bool operator==(const SecretKey&, const SecretKey&) = default;

private:
    Bytes bytes_;
};

class Tag {
public:
    Tag() = default;
    // bit_length must be a positive multiple of 8 not exceeding 512 and equal to 8 * bytes.size().
    Tag(Bytes bytes, int bit_length);

    const Bytes& bytes() const { return bytes_; }
    int bit_length() const { return bit_length_; }
    bool empty() const { return bytes_.empty(); }

    // MSB of byte 0 is bit 0.
    bool bit(int i) const { return (bytes_[i / 8] >> (7 - i % 8)) & 1; }
    std::vector<int> bits() const;
    static Tag from_bits(std::span<const int> bits);

    friend bool operator==(const Tag&, const Tag&) = default;

private:
    Bytes bytes_;
    int bit_length_ = 0;
};

// Draws lambda bits from the OS CSPRNG. Throws ConfigError for an unsupported lambda.
SecretKey keygen(int security_bits);

// HMAC-SHA512, truncated to the leading tag_bits / 8 bytes.
Tag mac(const SecretKey& key, ByteView message, int tag_bits = kDigestBits);
inline Tag mac(const SecretKey& key, std::string_view message, int tag_bits = kDigestBits) {
    return mac(key, as_bytes(message), tag_bits);
}

// Constant-time comparison of the tag against the leading bytes of the recomputed MAC.
// Tags with an invalid length are rejected.
bool veri(const SecretKey& key, ByteView message, const Tag& tag);
inline bool veri(const SecretKey& key, std::string_view message, const Tag& tag) {
    return veri(key, as_bytes(message), tag);
}

// Leading 8 bytes (big-endian) of mac(key, domain || message).
std::uint64_t keyed_hash(const SecretKey& key, std::uint8_t domain, ByteView message);

// HMAC-SHA512 over arbitrary key bytes. mac() is this with a validated SecretKey;
// the raw form exists for published test vectors, whose keys have other lengths.
std::array<std::uint8_t, 64> hmac_sha512(ByteView key, ByteView message);

// Plain SHA-512 digest, used by the benchmark baseline.
std::array<std::uint8_t, 64> sha512(ByteView message);

// Key file: one line of lowercase hex.
SecretKey read_key_file(const std::filesystem::path& path);
void write_key_file(const std::filesystem::path& path, const SecretKey& key);

} // namespace bwm::crypto
