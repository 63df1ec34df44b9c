#pragma once

/**
 * Owner-side tooling: trigger artifacts, evidence verification, probing a
 * suspect endpoint, the three-way correctness check, and the interference
 * attack simulations.
 */

#include "branchwm/codec.hpp"
#include "branchwm/concealed.hpp"
#include "branchwm/crypto.hpp"
#include "branchwm/gateway.hpp"
#include "branchwm/toy_lm.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bwm::forensic {

// ---------------------------------------------------------------------------
// Prompt corpus
// ---------------------------------------------------------------------------

// Story-style sentences over the toy vocabulary's words, distinct, deterministic in seed.
std::vector<std::string> story_prompts(std::size_t n, std::uint64_t seed);
// The shipped 500-line corpus is story_prompts(500, kCorpusSeed).
inline constexpr std::uint64_t kCorpusSeed = 20240601;
std::vector<std::string> load_prompts(const std::filesystem::path& path); // throws ConfigError

// Deterministic key material for reproducible experiments (never for deployment).
crypto::SecretKey seeded_key(std::uint64_t seed, std::string_view label, int bits = 1024);

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

struct OwnerSecrets {
    gateway::Mode mode = gateway::Mode::simple;
    crypto::SecretKey mac_key;
    std::optional<crypto::SecretKey> ek_in;
    std::optional<crypto::SecretKey> ek_out;
    concealed::CopyrightMessage copyright;
    int j = 4;
    int tag_bits = crypto::kDigestBits;
    std::string proclamation = "I am model B from owner A!";
    bool bind_evidence_key = false;
    bool timestamp_evidence = false;
    std::uint32_t timestamp_window_minutes = 60;
    double threshold = 0.9;

    // Reads the key files named in a gateway config.
    static OwnerSecrets from_config(const gateway::GatewayConfig& config);
};

enum class Verdict { valid_evidence, invalid, error };
std::string_view to_string(Verdict v);

struct EvidenceCheck {
    bool trigger_valid = false;
    bool evidence_valid = false;
    std::optional<concealed::ExtractionReport> extraction; // concealed only
    std::optional<std::uint32_t> timestamp;                // when timestamp_evidence is on
};

class Verifier {
public:
    Verifier(OwnerSecrets secrets, std::shared_ptr<const Vocab> vocab);

    // Simple scheme: trigger_text is the full triggered prompt.
    EvidenceCheck check_simple(std::string_view trigger_text, std::string_view response_text) const;
    // Concealed scheme: ids of the full trigger and of the response continuation.
    EvidenceCheck check_concealed(std::span<const TokenId> trigger_ids, std::span<const TokenId> response_ids,
                                  std::uint32_t now_minute = gateway::current_unix_minute()) const;

    const OwnerSecrets& secrets() const { return secrets_; }
    const Vocab& vocab() const { return *vocab_; }

private:
    OwnerSecrets secrets_;
    std::shared_ptr<const Vocab> vocab_;
};

// ---------------------------------------------------------------------------
// Trigger artifacts and probing
// ---------------------------------------------------------------------------

struct TriggerArtifact {
    gateway::Mode mode = gateway::Mode::simple;
    std::string text;  // simple: full trigger text; concealed: tok_decode(ids)
    TokenSequence ids; // concealed
};

TriggerArtifact make_trigger(std::string_view prompt, const OwnerSecrets& secrets, const Vocab& vocab,
                             const lm::LogitSource& owner_model);
// Simple artifacts are the trigger text on one line; concealed ones use the BWM1 interchange format.
void write_artifact(const std::filesystem::path& path, const TriggerArtifact& artifact, const Vocab& vocab);
TriggerArtifact read_artifact(const std::filesystem::path& path, const Vocab& vocab); // throws ConfigError

struct ProbeResult {
    std::string endpoint;
    std::string trigger;
    std::string raw_response;
    Verdict verdict = Verdict::error;
    std::chrono::microseconds latency{0};
    std::string detail;
};

// Keep-alive client for one endpoint; not thread-safe.
class Prober {
public:
    explicit Prober(std::string endpoint, std::size_t max_tokens = 64);
    ~Prober();
    Prober(const Prober&) = delete;
    Prober& operator=(const Prober&) = delete;

    ProbeResult probe(const TriggerArtifact& artifact, const Verifier& verifier);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string endpoint_;
    std::size_t max_tokens_;
};

// ---------------------------------------------------------------------------
// Correctness triad
// ---------------------------------------------------------------------------

struct TriadOptions {
    gateway::Mode mode = gateway::Mode::simple;
    std::vector<std::string> prompts;
    std::uint64_t seed = 1;
    std::size_t max_tokens = 64;
    std::uint64_t model_seed = 0x5eed;
    // Owner keys; when absent they are derived from seed.
    std::optional<OwnerSecrets> secrets;
};

struct TriadReport {
    gateway::Mode mode = gateway::Mode::simple;
    std::size_t n = 0;
    std::size_t deployed_valid = 0;      // Verify = 1 against the watermarked API
    std::size_t bare_invalid = 0;        // Verify = 0 against the bare API
    std::size_t wrong_key_invalid = 0;   // Verify = 0 against an API deployed with an independent key
    double seconds = 0;

    bool passed() const { return deployed_valid == n && bare_invalid == n && wrong_key_invalid == n; }
};

// Starts a bare backend, a gateway with the owner key and one with an
// independent key on ephemeral localhost ports, then probes all three.
TriadReport run_triad(const TriadOptions& options); // throws ConfigError for an empty prompt list
void write_triad_csv(std::ostream& out, const std::vector<TriadReport>& reports);

// ---------------------------------------------------------------------------
// Interference attacks
// ---------------------------------------------------------------------------

struct FilterRow {
    std::string population; // natural | simple | concealed
    std::size_t n = 0;
    double flag_rate = 0;
    double threshold = 0;
};

struct FilterOptions {
    std::size_t trials = 200;
    std::size_t tail = 64;
    double false_positive_rate = 0.05;
    std::uint64_t seed = 1;
    std::uint64_t model_seed = 0x5eed;
};

// Perplexity filter calibrated on natural continuations.
std::vector<FilterRow> simulate_filter(const FilterOptions& options);

struct ErasureRow {
    double rho = 0;
    std::size_t trials = 0;
    double mean_accuracy = 0;
};

struct ErasureOptions {
    std::vector<double> rhos = {0.0, 0.05, 0.1, 0.2};
    std::size_t trials = 50;
    std::size_t response_tokens = 256;
    std::string copyright = "10110010011101001011000111010110";
    int j = 4;
    double delta = 11.0;
    std::uint64_t seed = 1;
    std::uint64_t model_seed = 0x5eed;
};

// Each evidence token is replaced by a uniform random token with probability rho.
// Randomness is shared across rho values, so a substitution at rho1 is also one at rho2 > rho1.
std::vector<ErasureRow> simulate_erasure(const ErasureOptions& options);

struct ReplayRow {
    bool bind_evidence_key = false;
    std::size_t trials = 0;
    std::size_t replay_passes = 0;  // evidence of A accepted as evidence for B
    std::size_t genuine_passes = 0; // control: B's own evidence accepted
};

struct ReplayOptions {
    std::size_t trials = 100;
    std::size_t response_tokens = 128;
    std::string copyright = "10110010011101001011000111010110";
    std::uint64_t seed = 1;
    std::uint64_t model_seed = 0x5eed;
};

std::vector<ReplayRow> simulate_replay(const ReplayOptions& options);

void write_filter_csv(std::ostream& out, const std::vector<FilterRow>& rows);
void write_erasure_csv(std::ostream& out, const std::vector<ErasureRow>& rows);
void write_replay_csv(std::ostream& out, const std::vector<ReplayRow>& rows);

// ---------------------------------------------------------------------------
// Soundness game
// ---------------------------------------------------------------------------

struct SoundnessReport {
    std::size_t observed = 0;
    std::size_t attempts = 0;
    std::size_t accepted = 0;
};

// The adversary sees `observed` (prompt, simple trigger) pairs, then grafts
// every observed digit tail onto each of `fresh` unseen prompts.
SoundnessReport soundness_game(std::size_t observed, std::size_t fresh, std::uint64_t seed);

} // namespace bwm::forensic
