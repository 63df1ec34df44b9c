#pragma once

/**
 * Deterministic pseudo language model.
 *
 * Scores are a keyed hash of (model seed, last context_window ids, candidate
 * id) mapped into [-5, 5). Nothing is learned; the point is a backend whose
 * every output is a pure function of its input, so watermark behaviour can be
 * checked bit-exactly.
 */

#include "branchwm/codec.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace bwm::lm {

using LogitVector = std::vector<double>;
using ProbVector = std::vector<double>;

inline constexpr double kLogitBound = 5.0;

// Anything that maps a history to next-token scores over a fixed vocabulary.
class LogitSource {
public:
    virtual ~LogitSource() = default;
    virtual std::size_t vocab_size() const = 0;
    virtual LogitVector logits(std::span<const TokenId> history) const = 0;
};

struct LmConfig {
    std::uint64_t model_seed = 0x5eed;
    std::size_t context_window = 4;
};

class ToyLm final : public LogitSource {
public:
    ToyLm(LmConfig config, std::size_t vocab_size);

    std::size_t vocab_size() const override { return vocab_size_; }
    LogitVector logits(std::span<const TokenId> history) const override;
    const LmConfig& config() const { return config_; }

private:
    LmConfig config_;
    std::size_t vocab_size_;
};

// Max-subtracted softmax.
ProbVector softmax(std::span<const double> logits);

struct SamplingPolicy {
    enum class Kind { greedy, multinomial };
    Kind kind = Kind::greedy;
    std::uint64_t seed = 0; // multinomial only; advanced per draw by the caller

    static SamplingPolicy greedy() { return {}; }
    static SamplingPolicy multinomial(std::uint64_t seed) { return {Kind::multinomial, seed}; }
};

// Greedy: highest probability in `allowed`, ties to the smallest id.
// Multinomial: renormalized draw over `allowed`. Throws ConfigError if allowed is empty.
TokenId sample_constrained(std::span<const double> probs, std::span<const TokenId> allowed,
                           const SamplingPolicy& policy);
// Unconstrained variant over the whole vocabulary.
TokenId sample(std::span<const double> probs, const SamplingPolicy& policy);

// Optional hook applied to each step's logits before sampling; the second
// argument is the previous token (the last history id).
using LogitHook = std::function<void(LogitVector&, TokenId prefix)>;

// Appends n sampled tokens to history and returns just the continuation.
// Multinomial draws use seed, seed+1, ... per step.
TokenSequence generate(const LogitSource& model, TokenSequence history, std::size_t n,
                       const SamplingPolicy& policy = SamplingPolicy::greedy(), const LogitHook& hook = {});

// exp(mean negative log-likelihood) of `tokens` with an empty starting context.
// Throws ConfigError for an empty sequence.
double perplexity(std::span<const TokenId> tokens, const LogitSource& model);
// Same, but each continuation token is conditioned on context ++ preceding continuation.
double conditional_perplexity(std::span<const TokenId> context, std::span<const TokenId> continuation,
                              const LogitSource& model);

// splitmix64 finalizer; shared by every deterministic derivation in the toy stack.
std::uint64_t mix64(std::uint64_t x);

// splitmix64 stream. Fixed construction, so sequences are portable across
// standard libraries (unlike <random> distributions).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }
    // Unbiased draw in [0, bound); bound > 0.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (true) {
            std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }
    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

} // namespace bwm::lm
