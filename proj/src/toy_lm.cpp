#include "branchwm/toy_lm.hpp"

#include "branchwm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bwm::lm {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

double unit_interval(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

} // namespace

std::uint64_t mix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

ToyLm::ToyLm(LmConfig config, std::size_t vocab_size) : config_(config), vocab_size_(vocab_size) {
    if (config_.context_window < 1) throw ConfigError("context_window must be >= 1");
    if (vocab_size_ < 2) throw ConfigError("vocabulary too small");
}

LogitVector ToyLm::logits(std::span<const TokenId> history) const {
    const std::size_t n = std::min(config_.context_window, history.size());
    auto context = history.last(n);
    std::uint64_t h = mix64(config_.model_seed);
    h = mix64(h ^ n);
    for (TokenId id : context) h = mix64(h ^ (static_cast<std::uint64_t>(id) + 1) * kGolden);

    LogitVector out(vocab_size_);
    for (std::size_t j = 0; j < vocab_size_; ++j) {
        double u = unit_interval(mix64(h + (j + 1) * kGolden));
        out[j] = -kLogitBound + 2 * kLogitBound * u;
    }
    return out;
}

ProbVector softmax(std::span<const double> logits) {
    ProbVector out(logits.size());
    if (logits.empty()) return out;
    const double max = *std::max_element(logits.begin(), logits.end());
    double sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max);
        sum += out[i];
    }
    for (double& p : out) p /= sum;
    return out;
}

TokenId sample_constrained(std::span<const double> probs, std::span<const TokenId> allowed,
                           const SamplingPolicy& policy) {
    if (allowed.empty()) throw ConfigError("empty allowed set");
    for (TokenId id : allowed) {
        if (id >= probs.size()) throw ConfigError("allowed id outside the probability vector");
    }
    if (policy.kind == SamplingPolicy::Kind::greedy) {
        TokenId best = allowed.front();
        for (TokenId id : allowed) {
            if (probs[id] > probs[best] || (probs[id] == probs[best] && id < best)) best = id;
        }
        return best;
    }
    double total = 0;
    for (TokenId id : allowed) total += probs[id];
    if (!(total > 0)) {
        return *std::min_element(allowed.begin(), allowed.end());
    }
    double target = unit_interval(mix64(policy.seed)) * total;
    for (TokenId id : allowed) {
        target -= probs[id];
        if (target < 0) return id;
    }
    return allowed.back();
}

TokenId sample(std::span<const double> probs, const SamplingPolicy& policy) {
    TokenSequence all(probs.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<TokenId>(i);
    return sample_constrained(probs, all, policy);
}

TokenSequence generate(const LogitSource& model, TokenSequence history, std::size_t n,
                       const SamplingPolicy& policy, const LogitHook& hook) {
    TokenSequence out;
    out.reserve(n);
    SamplingPolicy step_policy = policy;
    for (std::size_t i = 0; i < n; ++i) {
        LogitVector logits = model.logits(history);
        if (hook) hook(logits, history.empty() ? TokenId{0} : history.back());
        TokenId next = sample(softmax(logits), step_policy);
        history.push_back(next);
        out.push_back(next);
        ++step_policy.seed;
    }
    return out;
}

double conditional_perplexity(std::span<const TokenId> context, std::span<const TokenId> continuation,
                              const LogitSource& model) {
    if (continuation.empty()) throw ConfigError("perplexity of an empty sequence");
    TokenSequence history(context.begin(), context.end());
    double nll = 0;
    for (TokenId id : continuation) {
        ProbVector p = softmax(model.logits(history));
        if (id >= p.size()) throw ConfigError("token id outside vocabulary");
        nll -= std::log(std::max(p[id], std::numeric_limits<double>::min()));
        history.push_back(id);
    }
    return std::exp(nll / static_cast<double>(continuation.size()));
}

double perplexity(std::span<const TokenId> tokens, const LogitSource& model) {
    return conditional_perplexity({}, tokens, model);
}

} // namespace bwm::lm
