#pragma once

// Plain trigger scheme: the prompt's MAC tag, written in base-|V| digits,
// is appended as a token tail. Prove swaps the answer for a fixed statement.

#include "branchwm/codec.hpp"
#include "branchwm/crypto.hpp"
#include "branchwm/detection.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace bwm::simple {

inline constexpr std::string_view kDefaultProclamation = "I am model B from owner A!";

using bwm::DetectionResult;

// Throws TokenizeError when the prompt is empty or not tokenizable.
std::string trigger_gen(std::string_view prompt, const crypto::SecretKey& key, const Vocab& vocab,
                        int tag_bits = crypto::kDigestBits);

// Never throws; anything unparsable is "not a trigger".
DetectionResult detect(std::string_view candidate, const crypto::SecretKey& key, const Vocab& vocab,
                       int tag_bits = crypto::kDigestBits);
DetectionResult detect_ids(std::span<const TokenId> ids, const crypto::SecretKey& key, const Vocab& vocab,
                           int tag_bits = crypto::kDigestBits);

std::string prove(bool triggered, std::string response, std::string_view proclamation = kDefaultProclamation);

bool verify_simple(const crypto::SecretKey& key, std::string_view trigger, std::string_view response,
                   const Vocab& vocab, int tag_bits = crypto::kDigestBits,
                   std::string_view proclamation = kDefaultProclamation);

} // namespace bwm::simple
