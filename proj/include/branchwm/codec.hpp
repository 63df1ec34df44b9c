#pragma once

/**
 * Toy reversible tokenizer and the base-|V| tag codec.
 *
 * Surface strings are joined by a single space, so tokenization is an exact
 * bijection between valid text and id sequences. A tag is carried as a
 * fixed-length little-endian base-v digit list so a detector can always
 * split "prompt || tail" at the same position.
 */

#include "branchwm/crypto.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bwm {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

inline constexpr char kSeparator = ' ';

class Vocab {
public:
    // Surface strings must be non-empty, pairwise distinct and space-free.
    explicit Vocab(std::vector<std::string> surfaces);

    // 256 entries: an English word list followed by "tok_<id>" fillers.
    static const Vocab& toy();
    // "tok_0" .. "tok_<v-1>".
    static Vocab numbered(std::size_t v);
    // One surface string per line; line number is the id.
    static Vocab load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const { return surfaces_.size(); }
    const std::string& surface(TokenId id) const; // throws TokenizeError
    bool contains(std::string_view surface) const { return ids_.count(std::string(surface)) != 0; }
    TokenId id_of(std::string_view surface) const; // throws TokenizeError

private:
    std::vector<std::string> surfaces_;
    std::unordered_map<std::string, TokenId> ids_;
};

TokenSequence tok_encode(std::string_view text, const Vocab& vocab);
std::string tok_decode(std::span<const TokenId> ids, const Vocab& vocab);

// Big-endian bytes of each id, 4 bytes per id.
Bytes id_bytes(std::span<const TokenId> ids);

namespace codec {

// Smallest d with v^d >= 2^tag_bits.
std::size_t digit_count(int tag_bits, std::size_t v);

// Little-endian base-v digits of the tag read as a big-endian unsigned
// integer, zero padded to digit_count(tag_bits, v).
TokenSequence encode_tag_digits(const crypto::Tag& tag, std::size_t v);

// Inverse of encode_tag_digits. Throws MalformedTrigger on a wrong length,
// a digit >= v, or a value that does not fit in tag_bits.
crypto::Tag decode_tag_digits(std::span<const TokenId> digits, std::size_t v, int tag_bits);

} // namespace codec

} // namespace bwm
