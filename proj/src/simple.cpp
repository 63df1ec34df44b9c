#include "branchwm/simple.hpp"

#include "branchwm/error.hpp"

namespace bwm::simple {

std::string trigger_gen(std::string_view prompt, const crypto::SecretKey& key, const Vocab& vocab,
                        int tag_bits) {
    if (prompt.empty()) throw TokenizeError("empty prompt cannot carry a trigger");
    tok_encode(prompt, vocab);
    const crypto::Tag tag = crypto::mac(key, prompt, tag_bits);
    const TokenSequence digits = codec::encode_tag_digits(tag, vocab.size());
    std::string out(prompt);
    out.push_back(kSeparator);
    out += tok_decode(digits, vocab);
    return out;
}

DetectionResult detect_ids(std::span<const TokenId> ids, const crypto::SecretKey& key, const Vocab& vocab,
                           int tag_bits) {
    DetectionResult result;
    try {
        const std::size_t d = codec::digit_count(tag_bits, vocab.size());
        if (ids.size() < d + 1) return result;
        auto head = ids.first(ids.size() - d);
        auto tail = ids.last(d);
        crypto::Tag tag = codec::decode_tag_digits(tail, vocab.size(), tag_bits);
        const std::string message = tok_decode(head, vocab);
        result.is_trigger = crypto::veri(key, message, tag);
        result.extracted_tag = std::move(tag);
    } catch (const std::exception&) {
        result.is_trigger = false;
    }
    return result;
}

DetectionResult detect(std::string_view candidate, const crypto::SecretKey& key, const Vocab& vocab,
                       int tag_bits) {
    TokenSequence ids;
    try {
        ids = tok_encode(candidate, vocab);
    } catch (const std::exception&) {
        return {};
    }
    return detect_ids(ids, key, vocab, tag_bits);
}

std::string prove(bool triggered, std::string response, std::string_view proclamation) {
    if (!triggered) return response;
    return std::string(proclamation);
}

bool verify_simple(const crypto::SecretKey& key, std::string_view trigger, std::string_view response,
                   const Vocab& vocab, int tag_bits, std::string_view proclamation) {
    return detect(trigger, key, vocab, tag_bits).is_trigger && response == proclamation;
}

} // namespace bwm::simple
