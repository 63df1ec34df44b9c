#include "branchwm/gateway.hpp"

#include "branchwm/error.hpp"
#include "branchwm/simple.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bwm::gateway {

using nlohmann::json;

namespace {

HttpReply error_reply(int status, std::string_view message) {
    return {status, json{{"error", message}}.dump()};
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("invalid boolean for " + key + ": " + v);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    T out{};
    if (!(in >> out) || !in.eof()) throw ConfigError("invalid number for " + key + ": " + v);
    return out;
}

std::string trim(std::string s) {
    const char* ws = " \t\r\n";
    s.erase(0, s.find_first_not_of(ws));
    s.erase(s.find_last_not_of(ws) + 1);
    return s;
}

std::pair<std::string, int> split_listen(const std::string& listen) {
    auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw ConfigError("listen address must be host:port");
    int port = parse_number<int>("listen", listen.substr(colon + 1));
    if (port < 0 || port > 65535) throw ConfigError("port out of range");
    return {listen.substr(0, colon), port};
}

constexpr const char* kConfigKeys[] = {
    "mode", "mac_key", "ek_in", "ek_out", "copyright", "delta", "j", "tag_bits", "proclamation", "backend",
    "model_seed", "context_window", "vocab", "max_tokens_cap", "one_time_registry", "bind_evidence_key",
    "timestamp_evidence", "timestamp_window_minutes", "threshold", "listen"};

} // namespace

Mode parse_mode(std::string_view s) {
    if (s == "bare") return Mode::bare;
    if (s == "simple") return Mode::simple;
    if (s == "concealed") return Mode::concealed;
    throw ConfigError("unknown mode: " + std::string(s));
}

std::string_view to_string(Mode m) {
    switch (m) {
    case Mode::bare: return "bare";
    case Mode::simple: return "simple";
    case Mode::concealed: return "concealed";
    }
    return "?";
}

void GatewayConfig::set(const std::string& key, const std::string& value) {
    if (key == "mode") mode = parse_mode(value);
    else if (key == "mac_key") mac_key = value;
    else if (key == "ek_in") ek_in = value;
    else if (key == "ek_out") ek_out = value;
    else if (key == "copyright") copyright = value;
    else if (key == "delta") delta = parse_number<double>(key, value);
    else if (key == "j") j = parse_number<int>(key, value);
    else if (key == "tag_bits") tag_bits = parse_number<int>(key, value);
    else if (key == "proclamation") proclamation = value;
    else if (key == "backend") backend = value;
    else if (key == "model_seed") model_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "context_window") context_window = parse_number<std::size_t>(key, value);
    else if (key == "vocab") vocab = value;
    else if (key == "max_tokens_cap") max_tokens_cap = parse_number<std::size_t>(key, value);
    else if (key == "one_time_registry") one_time_registry = parse_bool(key, value);
    else if (key == "bind_evidence_key") bind_evidence_key = parse_bool(key, value);
    else if (key == "timestamp_evidence") timestamp_evidence = parse_bool(key, value);
    else if (key == "timestamp_window_minutes") timestamp_window_minutes = parse_number<std::uint32_t>(key, value);
    else if (key == "threshold") threshold = parse_number<double>(key, value);
    else if (key == "listen") listen = value;
    else throw ConfigError("unknown configuration key: " + key);
}

GatewayConfig GatewayConfig::parse(std::istream& in) {
    GatewayConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

GatewayConfig GatewayConfig::load(const std::filesystem::path& path, bool env_overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config: " + path.string());
    GatewayConfig cfg = parse(in);
    // Relative file paths in a config file are relative to that file.
    const auto base = path.parent_path();
    for (auto* p : {&cfg.mac_key, &cfg.ek_in, &cfg.ek_out, &cfg.vocab}) {
        if (!p->empty() && p->is_relative()) *p = base / *p;
    }
    if (env_overrides) cfg.apply_env();
    return cfg;
}

void GatewayConfig::apply_env() {
    for (const char* key : kConfigKeys) {
        std::string name = "BWM_";
        for (const char* p = key; *p; ++p) name.push_back(static_cast<char>(std::toupper(*p)));
        if (const char* v = std::getenv(name.c_str())) set(key, v);
    }
}

std::variant<GenerateRequest, HttpReply> parse_generate(const std::string& body, const Vocab& vocab,
                                                        std::size_t max_tokens_cap) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) return error_reply(400, "invalid JSON");
    if (!j.is_object() || !j.contains("prompt") || !j["prompt"].is_string() || !j.contains("max_tokens") ||
        !j["max_tokens"].is_number_integer()) {
        return error_reply(400, "expected {\"prompt\": string, \"max_tokens\": integer}");
    }
    const auto max_tokens = j["max_tokens"].get<std::int64_t>();
    if (max_tokens < 1 || static_cast<std::uint64_t>(max_tokens) > max_tokens_cap) {
        return error_reply(413, "max_tokens out of range");
    }
    GenerateRequest req;
    req.prompt = j["prompt"].get<std::string>();
    req.max_tokens = static_cast<std::size_t>(max_tokens);
    try {
        req.prompt_ids = tok_encode(req.prompt, vocab);
    } catch (const TokenizeError&) {
        return error_reply(400, "prompt not tokenizable");
    }
    return req;
}

std::string generate_response_body(const TokenSequence& tokens, const Vocab& vocab, std::optional<ApiState> state) {
    json out{{"text", tok_decode(tokens, vocab)}, {"tokens", tokens}};
    if (state) out["state"] = *state == ApiState::forensic ? "forensic" : "service";
    return out.dump();
}

GenerationService::GenerationService(std::shared_ptr<const lm::LogitSource> model,
                                     std::shared_ptr<const Vocab> vocab, std::size_t max_tokens_cap)
    : model_(std::move(model)), vocab_(std::move(vocab)), cap_(max_tokens_cap) {
    if (model_->vocab_size() != vocab_->size()) throw ConfigError("model and vocabulary sizes differ");
}

HttpReply GenerationService::generate(const std::string& body) const {
    auto parsed = parse_generate(body, *vocab_, cap_);
    if (auto* err = std::get_if<HttpReply>(&parsed)) return *err;
    const auto& req = std::get<GenerateRequest>(parsed);
    TokenSequence out = lm::generate(*model_, req.prompt_ids, req.max_tokens);
    return {200, generate_response_body(out, *vocab_)};
}

HttpReply GenerationService::logits(const std::string& body) const {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("history") || !j["history"].is_array()) {
        return error_reply(400, "expected {\"history\": [integer]}");
    }
    TokenSequence history;
    for (const auto& id : j["history"]) {
        if (!id.is_number_unsigned() || id.get<std::uint64_t>() >= vocab_->size()) {
            return error_reply(400, "history id out of range");
        }
        history.push_back(id.get<TokenId>());
    }
    return {200, json{{"logits", model_->logits(history)}}.dump()};
}

RemoteLogitSource::RemoteLogitSource(std::string base_url, std::size_t vocab_size)
    : base_url_(std::move(base_url)), vocab_size_(vocab_size) {}

lm::LogitVector RemoteLogitSource::logits(std::span<const TokenId> history) const {
    httplib::Client client(base_url_);
    client.set_connection_timeout(5, 0);
    client.set_tcp_nodelay(true);
    json body{{"history", TokenSequence(history.begin(), history.end())}};
    auto res = client.Post("/v1/logits", body.dump(), "application/json");
    if (!res) throw NetworkError("backend unreachable: " + base_url_);
    if (res->status != 200) throw NetworkError("backend returned status " + std::to_string(res->status));
    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("logits") || !j["logits"].is_array() || j["logits"].size() != vocab_size_) {
        throw NetworkError("malformed logits reply");
    }
    return j["logits"].get<lm::LogitVector>();
}

RemoteBackend::RemoteBackend(std::string base_url, std::size_t vocab_size)
    : base_url_(base_url), logits_(std::move(base_url), vocab_size) {}

HttpReply RemoteBackend::forward_generate(const std::string& body) const {
    httplib::Client client(base_url_);
    client.set_connection_timeout(5, 0);
    client.set_tcp_nodelay(true);
    auto res = client.Post("/v1/generate", body, "application/json");
    if (!res) return error_reply(502, "upstream unavailable");
    HttpReply reply{res->status, res->body, res->get_header_value("Content-Type")};
    if (reply.content_type.empty()) reply.content_type = "application/json";
    return reply;
}

OneTimeRegistry::Outcome OneTimeRegistry::check_and_insert(const crypto::Tag& sigma) {
    std::lock_guard lock(mu_);
    return seen_.insert(to_hex(sigma.bytes())).second ? Outcome::fresh : Outcome::replayed;
}

std::size_t OneTimeRegistry::size() const {
    std::lock_guard lock(mu_);
    return seen_.size();
}

void WatermarkSettings::validate(std::size_t v) const {
    if (mode == Mode::bare) return;
    if (!mac_key) throw ConfigError("mac_key is required");
    if (tag_bits <= 0 || tag_bits % 8 != 0 || tag_bits > crypto::kDigestBits) throw ConfigError("invalid tag_bits");
    if (mode == Mode::concealed) {
        if (!ek_in) throw ConfigError("ek_in is required in concealed mode");
        if (!ek_out) throw ConfigError("ek_out is required in concealed mode");
        concealed::EvidenceParams p{*ek_out, delta, j, copyright, bind_evidence_key};
        p.validate(v);
    }
}

WatermarkSettings resolve_settings(const GatewayConfig& config) {
    WatermarkSettings s;
    s.mode = config.mode;
    auto load = [](const std::filesystem::path& p) -> std::optional<crypto::SecretKey> {
        if (p.empty()) return std::nullopt;
        return crypto::read_key_file(p);
    };
    if (config.mode != Mode::bare) {
        s.mac_key = load(config.mac_key);
        if (config.mode == Mode::concealed) {
            s.ek_in = load(config.ek_in);
            s.ek_out = load(config.ek_out);
            if (config.copyright.empty()) throw ConfigError("copyright is required in concealed mode");
            s.copyright = concealed::CopyrightMessage::from_string(config.copyright);
        }
    }
    s.delta = config.delta;
    s.j = config.j;
    s.tag_bits = config.tag_bits;
    s.proclamation = config.proclamation;
    s.one_time_registry = config.one_time_registry;
    s.bind_evidence_key = config.bind_evidence_key;
    s.timestamp_evidence = config.timestamp_evidence;
    return s;
}

std::shared_ptr<const Vocab> load_vocab(const GatewayConfig& config) {
    if (config.vocab.empty()) return std::make_shared<const Vocab>(Vocab::toy());
    return std::make_shared<const Vocab>(Vocab::load(config.vocab));
}

concealed::CopyrightMessage timestamped_message(const concealed::CopyrightMessage& c, std::uint32_t unix_minute) {
    concealed::CopyrightMessage out = c;
    for (int b = 31; b >= 0; --b) out.bits.push_back(static_cast<std::uint8_t>(unix_minute >> b & 1));
    return out;
}

std::uint32_t current_unix_minute() {
    auto now = std::chrono::system_clock::now().time_since_epoch();
    return static_cast<std::uint32_t>(std::chrono::duration_cast<std::chrono::minutes>(now).count());
}

Gateway::Gateway(WatermarkSettings settings, std::shared_ptr<const Vocab> vocab,
                 std::shared_ptr<const Backend> backend, std::size_t max_tokens_cap, Clock clock)
    : settings_(std::move(settings)),
      vocab_(std::move(vocab)),
      backend_(std::move(backend)),
      cap_(max_tokens_cap),
      clock_(std::move(clock)) {
    settings_.validate(vocab_->size());
    try {
        proclamation_ids_ = tok_encode(settings_.proclamation, *vocab_);
    } catch (const TokenizeError&) {
        proclamation_ids_.clear();
    }
}

std::optional<crypto::Tag> Gateway::detect(const TokenSequence& ids) const {
    DetectionResult r;
    switch (settings_.mode) {
    case Mode::bare: return std::nullopt;
    case Mode::simple: r = simple::detect_ids(ids, *settings_.mac_key, *vocab_, settings_.tag_bits); break;
    case Mode::concealed:
        r = concealed::concealed_detect(ids, *settings_.mac_key, *settings_.ek_in, *vocab_, settings_.tag_bits);
        break;
    }
    if (!r.is_trigger) return std::nullopt;
    return r.extracted_tag;
}

HttpReply Gateway::forensic_reply(const GenerateRequest& req, const crypto::Tag& sigma) const {
    std::optional<ApiState> state;
#ifdef BWM_DEBUG_STATE
    state = ApiState::forensic;
#endif
    if (settings_.mode == Mode::simple) {
        json out{{"text", settings_.proclamation}, {"tokens", proclamation_ids_}};
        if (state) out["state"] = "forensic";
        return {200, out.dump()};
    }
    concealed::EvidenceParams params{*settings_.ek_out, settings_.delta, settings_.j, settings_.copyright,
                                     settings_.bind_evidence_key};
    if (settings_.timestamp_evidence) params.message = timestamped_message(settings_.copyright, clock_());
    const concealed::EvidenceSchedule schedule(params, sigma, vocab_->size());
    try {
        TokenSequence out = lm::generate(backend_->logit_source(), req.prompt_ids, req.max_tokens,
                                         lm::SamplingPolicy::greedy(),
                                         [&](lm::LogitVector& y, TokenId prefix) { schedule.apply(y, prefix); });
        return {200, generate_response_body(out, *vocab_, state)};
    } catch (const NetworkError&) {
        return error_reply(502, "upstream unavailable");
    }
}

HttpReply Gateway::handle_generate(const std::string& body) {
    ++requests_;
    auto parsed = parse_generate(body, *vocab_, cap_);
    std::optional<crypto::Tag> sigma;
    if (auto* req = std::get_if<GenerateRequest>(&parsed)) sigma = detect(req->prompt_ids);
    if (sigma && settings_.one_time_registry &&
        registry_.check_and_insert(*sigma) == OneTimeRegistry::Outcome::replayed) {
        ++replayed_;
        sigma.reset();
    }
    if (!sigma) {
        HttpReply reply = backend_->forward_generate(body);
#ifdef BWM_DEBUG_STATE
        json j = json::parse(reply.body, nullptr, false);
        if (reply.status == 200 && j.is_object()) {
            j["state"] = "service";
            reply.body = j.dump();
        }
#endif
        return reply;
    }
    ++forensic_;
    return forensic_reply(std::get<GenerateRequest>(parsed), *sigma);
}

Gateway::Stats Gateway::stats() const {
    return {requests_.load(), forensic_.load(), replayed_.load()};
}

ServiceHandle::ServiceHandle(std::unique_ptr<httplib::Server> server, std::string host, int port)
    : server_(std::move(server)), host_(std::move(host)), port_(port) {
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

ServiceHandle::~ServiceHandle() { stop(); }

void ServiceHandle::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

void ServiceHandle::wait() {
    if (thread_.joinable()) thread_.join();
}

namespace {

std::unique_ptr<ServiceHandle> bind_and_start(std::unique_ptr<httplib::Server> server, const std::string& listen,
                                              std::size_t max_body_bytes) {
    auto [host, port] = split_listen(listen);
    server->set_payload_max_length(max_body_bytes);
    server->set_tcp_nodelay(true);
    // No SO_REUSEPORT: a second deployment on a taken port must fail, not share it.
    server->set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    server->Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });
    if (port == 0) {
        port = server->bind_to_any_port(host);
        if (port < 0) throw ConfigError("cannot bind " + host);
    } else if (!server->bind_to_port(host, port)) {
        throw ConfigError("cannot bind " + listen);
    }
    return std::make_unique<ServiceHandle>(std::move(server), host, port);
}

void send(httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
}

} // namespace

std::unique_ptr<ServiceHandle> serve_gateway(std::shared_ptr<Gateway> gateway, const std::string& listen,
                                             std::size_t max_body_bytes) {
    auto server = std::make_unique<httplib::Server>();
    server->Post("/v1/generate", [gateway](const httplib::Request& req, httplib::Response& res) {
        send(res, gateway->handle_generate(req.body));
    });
    return bind_and_start(std::move(server), listen, max_body_bytes);
}

std::unique_ptr<ServiceHandle> serve_bare(std::shared_ptr<const GenerationService> service,
                                          const std::string& listen, std::size_t max_body_bytes) {
    auto server = std::make_unique<httplib::Server>();
    server->Post("/v1/generate", [service](const httplib::Request& req, httplib::Response& res) {
        send(res, service->generate(req.body));
    });
    server->Post("/v1/logits", [service](const httplib::Request& req, httplib::Response& res) {
        send(res, service->logits(req.body));
    });
    return bind_and_start(std::move(server), listen, max_body_bytes);
}

Deployment deploy(const GatewayConfig& config) {
    auto vocab = load_vocab(config);
    Deployment d;
    std::shared_ptr<const Backend> backend;
    if (config.backend == "toy") {
        auto model = std::make_shared<const lm::ToyLm>(lm::LmConfig{config.model_seed, config.context_window},
                                                       vocab->size());
        d.bare = std::make_shared<GenerationService>(model, vocab, config.max_tokens_cap);
        backend = std::make_shared<InProcessBackend>(d.bare);
    } else if (config.backend.rfind("http://", 0) == 0) {
        if (config.mode == Mode::bare) throw ConfigError("a bare deployment needs the in-process toy backend");
        backend = std::make_shared<RemoteBackend>(config.backend, vocab->size());
    } else {
        throw ConfigError("backend must be 'toy' or an http:// URL");
    }

    if (config.mode == Mode::bare) {
        d.handle = serve_bare(d.bare, config.listen);
        return d;
    }
    d.gateway = std::make_shared<Gateway>(resolve_settings(config), vocab, backend, config.max_tokens_cap);
    d.handle = serve_gateway(d.gateway, config.listen);
    return d;
}

} // namespace bwm::gateway
