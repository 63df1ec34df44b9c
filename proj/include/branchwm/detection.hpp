#pragma once

#include "branchwm/crypto.hpp"

#include <optional>

namespace bwm {

struct DetectionResult {
    bool is_trigger = false;
    std::optional<crypto::Tag> extracted_tag; // set whenever the tail parsed
};

} // namespace bwm
