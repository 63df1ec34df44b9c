#pragma once

/**
 * Concealed scheme.
 *
 * Trigger side: after one freely sampled token, each tag bit picks which half
 * of a vocabulary split the next token must come from. The split is seeded by
 * keyed_hash(ek_in, previous token), so the bits can be read back from the
 * token ids alone.
 *
 * Evidence side: in Forensic state every decoding step adds delta to one of
 * 2^j vocabulary blocks. The block index is a j-bit chunk of the copyright
 * message; which chunk is chosen per step from keyed_hash(ek_out, ...) of the
 * trigger tag and the previous token. Extraction replays the same derivation
 * and takes a plurality vote per chunk.
 *
 * Bit order everywhere: MSB of byte 0 first. sigma' is split at
 * floor(len / 2) bytes. Token ids enter hashes as 4-byte big-endian words.
 */

#include "branchwm/codec.hpp"
#include "branchwm/crypto.hpp"
#include "branchwm/detection.hpp"
#include "branchwm/toy_lm.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bwm::concealed {

struct CopyrightMessage {
    std::vector<std::uint8_t> bits; // 0/1

    // "0110..." -> bits. Throws ConfigError on other characters or an empty string.
    static CopyrightMessage from_string(std::string_view s);
    std::string to_string() const;
    std::size_t size() const { return bits.size(); }

    friend bool operator==(const CopyrightMessage&, const CopyrightMessage&) = default;
};

struct VocabPartition {
    std::vector<TokenSequence> blocks;
    std::vector<std::uint32_t> block_of; // token id -> block index
};

// Fisher-Yates over 0..v-1 driven by a splitmix64 stream from `seed`, cut
// into `parts` contiguous blocks; the first v % parts blocks get one extra id.
// Throws ConfigError unless 1 <= parts <= v.
VocabPartition partition_vocab(std::uint64_t seed, std::size_t v, std::size_t parts);
inline std::vector<TokenSequence> permute_and_split(std::uint64_t seed, std::size_t v, std::size_t parts) {
    return partition_vocab(seed, v, parts).blocks;
}

struct ConcealedTrigger {
    TokenSequence original_ids;
    TokenId free_token = 0;
    TokenSequence bit_token_ids;

    TokenSequence flatten() const;
};

// Half split used for tag bit embedding after `prefix`.
VocabPartition trigger_split(const crypto::SecretKey& ek_in, TokenId prefix, std::size_t v);

// Throws TokenizeError if the prompt is not tokenizable.
ConcealedTrigger concealed_trigger_gen(std::string_view prompt, const crypto::SecretKey& key,
                                       const crypto::SecretKey& ek_in, const lm::LogitSource& model,
                                       const Vocab& vocab, int tag_bits = crypto::kDigestBits,
                                       const lm::SamplingPolicy& policy = lm::SamplingPolicy::greedy());

// Bits read back from tokens, chained from `prefix`.
std::vector<int> extract_trigger_bits(std::span<const TokenId> tokens, TokenId prefix,
                                      const crypto::SecretKey& ek_in, std::size_t v);

// Never throws. extracted_tag is the recovered sigma' whenever the sequence was long enough.
DetectionResult concealed_detect(std::span<const TokenId> candidate, const crypto::SecretKey& key,
                                 const crypto::SecretKey& ek_in, const Vocab& vocab,
                                 int tag_bits = crypto::kDigestBits);

struct EvidenceParams {
    crypto::SecretKey ek_out;
    double delta = 11.0;
    int j = 4;
    CopyrightMessage message;
    bool bind_evidence_key = false;

    // Throws ConfigError unless j >= 1, 2^j <= v, j <= |message|, delta >= 0.
    void validate(std::size_t v) const;
    std::size_t chunk_count() const { return (message.size() + j - 1) / j; }
};

// Key actually used for evidence after optional binding to the trigger tag:
// eight chained keyed_hash outputs over sigma give a 512-bit key.
crypto::SecretKey bound_evidence_key(const crypto::SecretKey& ek_out, const crypto::Tag& sigma);

// Per-request state for the evidence embedding: sigma' is computed once.
class EvidenceSchedule {
public:
    EvidenceSchedule(const EvidenceParams& params, const crypto::Tag& sigma, std::size_t v);

    struct Slot {
        VocabPartition blocks; // 2^j blocks
        std::size_t chunk = 0;  // index into the message's chunks
    };
    Slot slot(TokenId prefix) const;

    // j-bit value of chunk `chunk`, MSB first, zero padded past the message end.
    std::uint32_t chunk_value(std::size_t chunk) const;

    // In-place logit bias for one decoding step.
    void apply(lm::LogitVector& logits, TokenId prefix) const;

    const EvidenceParams& params() const { return params_; }

private:
    EvidenceParams params_;
    crypto::SecretKey key_;
    Bytes left_;  // sigma' first half
    Bytes right_; // sigma' second half
    std::size_t v_;
};

// Single-step form: r = false or delta = 0 leaves y untouched.
lm::LogitVector concealed_prove_step(bool triggered, lm::LogitVector y, const crypto::Tag& sigma, TokenId prefix,
                                     const EvidenceParams& params);

struct ExtractionReport {
    std::vector<std::uint8_t> recovered_bits;
    std::vector<std::vector<std::size_t>> tallies; // [chunk][value]
    std::vector<double> confidence;                 // (top - runner-up) / votes; 0 for empty chunks
    std::vector<bool> low_confidence;               // tie or no votes
    std::optional<double> bit_accuracy;

    bool any_low_confidence() const;
};

double bit_accuracy(std::span<const std::uint8_t> recovered, std::span<const std::uint8_t> reference);

// `first_prefix` is the final trigger token. Throws ConfigError for an empty response.
ExtractionReport extract_copyright(std::span<const TokenId> response, TokenId first_prefix,
                                   const crypto::Tag& sigma, const EvidenceParams& params, std::size_t v,
                                   const CopyrightMessage* reference = nullptr);

// threshold in (0.5, 1]; throws ConfigError otherwise.
bool verify_concealed(const CopyrightMessage& reference, const ExtractionReport& report, double threshold);

// "BWM1 <v> <tag_bits>" header, then one space-separated id list per line.
struct TriggerFile {
    std::size_t v = 0;
    int tag_bits = crypto::kDigestBits;
    std::vector<TokenSequence> records;
};
void write_trigger_file(std::ostream& out, const TriggerFile& file);
TriggerFile read_trigger_file(std::istream& in); // throws ConfigError

} // namespace bwm::concealed
