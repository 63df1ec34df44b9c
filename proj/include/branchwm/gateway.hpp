#pragma once

/**
 * Watermarked generation API.
 *
 * GenerationService is the bare backend: prompt in, greedy continuation out.
 * Gateway wraps a backend with the detect/prove branch. On every request it
 * runs Detect first; non-triggers are forwarded untouched, so the reply is
 * byte-for-byte what the bare backend would have produced. Triggers switch
 * the request to Forensic state: the simple scheme answers with the
 * proclamation, the concealed scheme regenerates with the evidence bias.
 *
 * Wire format (application/json, UTF-8):
 *   POST /v1/generate  {"prompt": str, "max_tokens": int} -> {"text": str, "tokens": [int]}
 *   POST /v1/logits    {"history": [int]} -> {"logits": [float]}   (bare backend only)
 *   GET  /healthz      -> 200 "ok"
 */

#include "branchwm/codec.hpp"
#include "branchwm/concealed.hpp"
#include "branchwm/crypto.hpp"
#include "branchwm/toy_lm.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_set>
#include <variant>

namespace httplib {
class Server;
}

namespace bwm::gateway {

enum class Mode { bare, simple, concealed };
enum class ApiState { service, forensic };

Mode parse_mode(std::string_view s); // throws ConfigError
std::string_view to_string(Mode m);

struct GatewayConfig {
    Mode mode = Mode::simple;
    std::filesystem::path mac_key;
    std::filesystem::path ek_in;
    std::filesystem::path ek_out;
    std::string copyright; // 0/1 string
    double delta = 11.0;
    int j = 4;
    int tag_bits = crypto::kDigestBits;
    std::string proclamation = "I am model B from owner A!";
    std::string backend = "toy"; // "toy" or "http://host:port"
    std::uint64_t model_seed = 0x5eed;
    std::size_t context_window = 4;
    std::filesystem::path vocab; // empty: built-in toy vocabulary
    std::size_t max_tokens_cap = 512;
    bool one_time_registry = false;
    bool bind_evidence_key = false;
    bool timestamp_evidence = false;
    std::uint32_t timestamp_window_minutes = 60;
    double threshold = 0.9; // owner-side evidence acceptance, bit accuracy
    std::string listen = "127.0.0.1:8080";

    // Flat key=value lines; '#' starts a comment. Unknown keys are errors.
    static GatewayConfig parse(std::istream& in);
    // Relative key and vocab paths resolve against the config file's directory.
    static GatewayConfig load(const std::filesystem::path& path, bool env_overrides = true);
    // Applies BWM_<KEY> environment variables (e.g. BWM_MODE, BWM_MAC_KEY).
    void apply_env();
    void set(const std::string& key, const std::string& value);
};

struct HttpReply {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";

    friend bool operator==(const HttpReply&, const HttpReply&) = default;
};

struct GenerateRequest {
    std::string prompt;
    TokenSequence prompt_ids;
    std::size_t max_tokens = 0;
};

// Parses and validates a /v1/generate body; the error alternative is the reply to send.
std::variant<GenerateRequest, HttpReply> parse_generate(const std::string& body, const Vocab& vocab,
                                                        std::size_t max_tokens_cap);
std::string generate_response_body(const TokenSequence& tokens, const Vocab& vocab,
                                   std::optional<ApiState> state = std::nullopt);

// Bare backend.
class GenerationService {
public:
    GenerationService(std::shared_ptr<const lm::LogitSource> model, std::shared_ptr<const Vocab> vocab,
                      std::size_t max_tokens_cap);

    HttpReply generate(const std::string& body) const;
    HttpReply logits(const std::string& body) const;

    const lm::LogitSource& model() const { return *model_; }
    const Vocab& vocab() const { return *vocab_; }
    std::size_t max_tokens_cap() const { return cap_; }

private:
    std::shared_ptr<const lm::LogitSource> model_;
    std::shared_ptr<const Vocab> vocab_;
    std::size_t cap_;
};

// What the gateway needs from the model it protects.
class Backend {
public:
    virtual ~Backend() = default;
    // Service path: the bare model's reply to an unmodified request body.
    virtual HttpReply forward_generate(const std::string& body) const = 0;
    // Forensic path: raw next-token scores.
    virtual const lm::LogitSource& logit_source() const = 0;
};

class InProcessBackend final : public Backend {
public:
    explicit InProcessBackend(std::shared_ptr<const GenerationService> service) : service_(std::move(service)) {}
    HttpReply forward_generate(const std::string& body) const override { return service_->generate(body); }
    const lm::LogitSource& logit_source() const override { return service_->model(); }

private:
    std::shared_ptr<const GenerationService> service_;
};

// Logits over HTTP from a bare backend's /v1/logits.
class RemoteLogitSource final : public lm::LogitSource {
public:
    RemoteLogitSource(std::string base_url, std::size_t vocab_size);
    std::size_t vocab_size() const override { return vocab_size_; }
    lm::LogitVector logits(std::span<const TokenId> history) const override; // throws NetworkError

private:
    std::string base_url_;
    std::size_t vocab_size_;
};

class RemoteBackend final : public Backend {
public:
    RemoteBackend(std::string base_url, std::size_t vocab_size);
    HttpReply forward_generate(const std::string& body) const override; // 502 if unreachable
    const lm::LogitSource& logit_source() const override { return logits_; }

private:
    std::string base_url_;
    RemoteLogitSource logits_;
};

// Linearizable set of tag fingerprints for one-time triggers.
class OneTimeRegistry {
public:
    enum class Outcome { fresh, replayed };
    Outcome check_and_insert(const crypto::Tag& sigma);
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::unordered_set<std::string> seen_;
};

// Resolved watermark parameters (keys loaded).
struct WatermarkSettings {
    Mode mode = Mode::simple;
    std::optional<crypto::SecretKey> mac_key;
    std::optional<crypto::SecretKey> ek_in;
    std::optional<crypto::SecretKey> ek_out;
    concealed::CopyrightMessage copyright;
    double delta = 11.0;
    int j = 4;
    int tag_bits = crypto::kDigestBits;
    std::string proclamation = "I am model B from owner A!";
    bool one_time_registry = false;
    bool bind_evidence_key = false;
    bool timestamp_evidence = false;

    // Throws ConfigError if a key or parameter needed by `mode` is missing or invalid.
    void validate(std::size_t v) const;
};

WatermarkSettings resolve_settings(const GatewayConfig& config); // reads key files
std::shared_ptr<const Vocab> load_vocab(const GatewayConfig& config);

// Copyright bits followed by a 32-bit unix-minute timestamp, MSB first.
concealed::CopyrightMessage timestamped_message(const concealed::CopyrightMessage& c, std::uint32_t unix_minute);
std::uint32_t current_unix_minute();

class Gateway {
public:
    struct Stats {
        std::uint64_t requests = 0;
        std::uint64_t forensic = 0;
        std::uint64_t replayed = 0;
    };
    using Clock = std::function<std::uint32_t()>; // unix minutes

    Gateway(WatermarkSettings settings, std::shared_ptr<const Vocab> vocab, std::shared_ptr<const Backend> backend,
            std::size_t max_tokens_cap, Clock clock = current_unix_minute);

    HttpReply handle_generate(const std::string& body);
    Stats stats() const;
    const WatermarkSettings& settings() const { return settings_; }

private:
    std::optional<crypto::Tag> detect(const TokenSequence& ids) const;
    HttpReply forensic_reply(const GenerateRequest& req, const crypto::Tag& sigma) const;

    WatermarkSettings settings_;
    std::shared_ptr<const Vocab> vocab_;
    std::shared_ptr<const Backend> backend_;
    std::size_t cap_;
    Clock clock_;
    OneTimeRegistry registry_;
    TokenSequence proclamation_ids_;
    std::atomic<std::uint64_t> requests_{0};
    std::atomic<std::uint64_t> forensic_{0};
    std::atomic<std::uint64_t> replayed_{0};
};

// A listening HTTP server on its own thread; stops on destruction.
class ServiceHandle {
public:
    ServiceHandle(std::unique_ptr<httplib::Server> server, std::string host, int port);
    ~ServiceHandle();
    ServiceHandle(const ServiceHandle&) = delete;
    ServiceHandle& operator=(const ServiceHandle&) = delete;

    int port() const { return port_; }
    std::string url() const { return "http://" + host_ + ":" + std::to_string(port_); }
    void stop();
    void wait(); // blocks until stopped

private:
    std::unique_ptr<httplib::Server> server_;
    std::string host_;
    int port_;
    std::thread thread_;
};

struct Deployment {
    std::shared_ptr<Gateway> gateway;              // null for a bare deployment
    std::shared_ptr<GenerationService> bare;       // null when proxying a remote backend
    std::unique_ptr<ServiceHandle> handle;
};

// Port 0 in `listen` binds an ephemeral port. Throws ConfigError on invalid
// keys, missing parameters or a port that cannot be bound.
Deployment deploy(const GatewayConfig& config);

// Lower-level entry points used by deploy() and tests.
std::unique_ptr<ServiceHandle> serve_gateway(std::shared_ptr<Gateway> gateway, const std::string& listen,
                                             std::size_t max_body_bytes = 1 << 20);
std::unique_ptr<ServiceHandle> serve_bare(std::shared_ptr<const GenerationService> service,
                                          const std::string& listen, std::size_t max_body_bytes = 1 << 20);

} // namespace bwm::gateway
