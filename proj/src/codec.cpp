#include "branchwm/codec.hpp"

#include "branchwm/error.hpp"

#include <fstream>

namespace bwm {

namespace detail {
extern const std::vector<std::string_view> kToyWords;
}

namespace {
constexpr std::size_t kToyVocabSize = 256;
}

Vocab::Vocab(std::vector<std::string> surfaces) : surfaces_(std::move(surfaces)) {
    if (surfaces_.size() < 2) throw ConfigError("vocabulary needs at least 2 entries");
    if (surfaces_.size() > (std::size_t{1} << 31)) throw ConfigError("vocabulary too large");
    ids_.reserve(surfaces_.size());
    for (std::size_t i = 0; i < surfaces_.size(); ++i) {
        const auto& s = surfaces_[i];
        if (s.empty()) throw ConfigError("empty surface string at id " + std::to_string(i));
        if (s.find(kSeparator) != std::string::npos || s.find('\n') != std::string::npos) {
            throw ConfigError("surface string contains a separator at id " + std::to_string(i));
        }
        if (!ids_.emplace(s, static_cast<TokenId>(i)).second) {
            throw ConfigError("duplicate surface string '" + s + "'");
        }
    }
}

const Vocab& Vocab::toy() {
    static const Vocab vocab = [] {
        std::vector<std::string> s(detail::kToyWords.begin(), detail::kToyWords.end());
        for (std::size_t i = s.size(); i < kToyVocabSize; ++i) s.push_back("tok_" + std::to_string(i));
        return Vocab(std::move(s));
    }();
    return vocab;
}

Vocab Vocab::numbered(std::size_t v) {
    std::vector<std::string> s;
    s.reserve(v);
    for (std::size_t i = 0; i < v; ++i) s.push_back("tok_" + std::to_string(i));
    return Vocab(std::move(s));
}

Vocab Vocab::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read vocabulary file: " + path.string());
    std::vector<std::string> s;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        s.push_back(line);
    }
    // A trailing newline does not create an entry; interior blank lines are errors.
    while (!s.empty() && s.back().empty()) s.pop_back();
    return Vocab(std::move(s));
}

void Vocab::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write vocabulary file: " + path.string());
    for (const auto& s : surfaces_) out << s << '\n';
}

const std::string& Vocab::surface(TokenId id) const {
    if (id >= surfaces_.size()) throw TokenizeError("token id " + std::to_string(id) + " out of range");
    return surfaces_[id];
}

TokenId Vocab::id_of(std::string_view surface) const {
    auto it = ids_.find(std::string(surface));
    if (it == ids_.end()) throw TokenizeError("unknown token '" + std::string(surface) + "'");
    return it->second;
}

TokenSequence tok_encode(std::string_view text, const Vocab& vocab) {
    TokenSequence ids;
    if (text.empty()) return ids;
    std::size_t start = 0;
    while (true) {
        std::size_t end = text.find(kSeparator, start);
        std::string_view piece = text.substr(start, end == std::string_view::npos ? end : end - start);
        ids.push_back(vocab.id_of(piece));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return ids;
}

std::string tok_decode(std::span<const TokenId> ids, const Vocab& vocab) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out.push_back(kSeparator);
        out += vocab.surface(ids[i]);
    }
    return out;
}

Bytes id_bytes(std::span<const TokenId> ids) {
    Bytes out;
    out.reserve(ids.size() * 4);
    for (TokenId id : ids) {
        out.push_back(static_cast<std::uint8_t>(id >> 24));
        out.push_back(static_cast<std::uint8_t>(id >> 16));
        out.push_back(static_cast<std::uint8_t>(id >> 8));
        out.push_back(static_cast<std::uint8_t>(id));
    }
    return out;
}

namespace codec {

namespace {

// Big-endian magnitude; returns remainder.
std::uint64_t divmod_in_place(Bytes& value, std::uint64_t divisor) {
    std::uint64_t rem = 0;
    for (auto& byte : value) {
        std::uint64_t cur = rem << 8 | byte;
        byte = static_cast<std::uint8_t>(cur / divisor);
        rem = cur % divisor;
    }
    return rem;
}

// value = value * factor + addend; returns false on overflow of value's width.
bool muladd_in_place(Bytes& value, std::uint64_t factor, std::uint64_t addend) {
    std::uint64_t carry = addend;
    for (auto it = value.rbegin(); it != value.rend(); ++it) {
        std::uint64_t cur = static_cast<std::uint64_t>(*it) * factor + carry;
        *it = static_cast<std::uint8_t>(cur & 0xff);
        carry = cur >> 8;
    }
    return carry == 0;
}

void check_radix(std::size_t v) {
    if (v < 2 || v > (std::uint64_t{1} << 32)) throw ConfigError("radix out of range: " + std::to_string(v));
}

} // namespace

std::size_t digit_count(int tag_bits, std::size_t v) {
    check_radix(v);
    if (tag_bits <= 0 || tag_bits % 8 != 0) throw ConfigError("invalid tag length");
    // Count multiplications by v until the running power overflows tag_bits.
    Bytes power(tag_bits / 8, 0);
    power.back() = 1;
    std::size_t d = 0;
    while (true) {
        ++d;
        if (!muladd_in_place(power, v, 0)) return d;
    }
}

TokenSequence encode_tag_digits(const crypto::Tag& tag, std::size_t v) {
    const std::size_t d = digit_count(tag.bit_length(), v);
    Bytes value = tag.bytes();
    TokenSequence digits(d, 0);
    for (std::size_t i = 0; i < d; ++i) digits[i] = static_cast<TokenId>(divmod_in_place(value, v));
    return digits;
}

crypto::Tag decode_tag_digits(std::span<const TokenId> digits, std::size_t v, int tag_bits) {
    const std::size_t d = digit_count(tag_bits, v);
    if (digits.size() != d) throw MalformedTrigger("expected " + std::to_string(d) + " digits");
    Bytes value(tag_bits / 8, 0);
    for (std::size_t i = d; i-- > 0;) {
        if (digits[i] >= v) throw MalformedTrigger("digit out of range");
        if (!muladd_in_place(value, v, digits[i])) throw MalformedTrigger("digit value exceeds tag width");
    }
    return crypto::Tag(std::move(value), tag_bits);
}

} // namespace codec

} // namespace bwm
